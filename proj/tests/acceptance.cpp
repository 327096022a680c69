// Acceptance report: one PASS/FAIL/SKIP/EXCLUDED line per criterion.
// Exit status is non-zero only when a criterion fails.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sarfa/sarfa.hpp"
#include "support/reference.hpp"
#include "support/synthetic.hpp"

using namespace sarfa;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip, excluded };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::fail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

QProfile random_profile(std::mt19937_64& rng, int n, double lo = -10, double hi = 10) {
  std::uniform_real_distribution<double> q(lo, hi);
  std::vector<QEntry> e;
  for (int i = 0; i < n; ++i) e.push_back({"a" + std::to_string(i), q(rng)});
  return QProfile("s", std::move(e));
}

QProfile shifted(const QProfile& p, double c) {
  std::vector<QEntry> e(p.entries().begin(), p.entries().end());
  for (auto& x : e) x.q += c;
  return QProfile("s", std::move(e));
}

ref::Q to_ref(const QProfile& p) {
  ref::Q out;
  for (const auto& e : p.entries()) out.emplace_back(e.action, e.q);
  return out;
}

// ---------------------------------------------------------------------------

Outcome ac1_reference_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int n = 3 + static_cast<int>(rng() % 8);
    const auto o = random_profile(rng, n);
    const auto p = random_profile(rng, n);
    const auto sel = "a" + std::to_string(rng() % n);
    const auto got = sarfa_score(o, p, sel);
    const auto want = ref::sarfa(to_ref(o), to_ref(p), sel);
    for (double d : {got.delta_p - want.dp, got.kl - want.kl, got.k_sim - want.k, got.score - want.score})
      worst = std::max(worst, std::abs(d));
  }
  const double secs = seconds_since(t0);
  const auto detail = fmt::format("10000 pairs, max |diff| {:.2e}, {:.3f} s", worst, secs);
  return worst <= 1e-9 && secs < 5.0 ? pass(detail) : fail(detail);
}

Outcome ac2_fixtures() {
  const auto two = sarfa_score(QProfile("s", {{"a", 1}, {"b", 0}}), QProfile("s", {{"a", 0}, {"b", 0}}), "a");
  const auto three = sarfa_score(QProfile("s", {{"a", 2}, {"b", 1}, {"c", 0}}),
                                 QProfile("s", {{"a", 2}, {"b", 1}, {"c", 1}}), "a");
  const bool ok = std::abs(two.score - 0.37543) <= 1e-4 && std::abs(three.score - 0.16208) <= 1e-4;
  return {ok ? Verdict::pass : Verdict::fail,
          fmt::format("two-action S = {:.7f} (0.37543), three-action S = {:.7f} (0.16208)", two.score, three.score)};
}

Outcome ac3_properties() {
  constexpr int kCases = 1000;
  std::vector<std::string> failures;
  auto check = [&](const char* name, const std::function<bool(std::mt19937_64&)>& prop, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < kCases; ++i)
      if (!prop(rng)) {
        failures.push_back(fmt::format("{} (case {})", name, i));
        return;
      }
  };

  check("shift invariance", [](auto& rng) {
    const int n = 2 + static_cast<int>(rng() % 9);
    const auto o = random_profile(rng, n), p = random_profile(rng, n);
    const auto sel = "a" + std::to_string(rng() % n);
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    const auto a = sarfa_score(o, p, sel), b = sarfa_score(shifted(o, c), shifted(p, c), sel);
    return std::abs(a.score - b.score) < 1e-9 && std::abs(a.kl - b.kl) < 1e-9 &&
           std::abs(softmax_selected(o, sel) - softmax_selected(shifted(o, c), sel)) < 1e-9;
  }, 301);

  check("bounds", [](auto& rng) {
    const int n = 1 + static_cast<int>(rng() % 10);
    const auto o = random_profile(rng, n, -20, 20), p = random_profile(rng, n, -20, 20);
    const auto s = sarfa_score(o, p, "a" + std::to_string(rng() % n));
    return s.score >= 0 && s.score <= 1 && s.k_sim > 0 && s.k_sim <= 1 && s.delta_p > -1 && s.delta_p < 1;
  }, 302);

  check("identity perturbation scores zero", [](auto& rng) {
    const int n = 1 + static_cast<int>(rng() % 10);
    const auto o = random_profile(rng, n, -20, 20);
    const auto s = sarfa_score(o, o, "a" + std::to_string(rng() % n));
    return s.score == 0.0 && s.delta_p == 0.0 && s.kl == 0.0;
  }, 303);

  check("KL non-negativity and Gibbs equality", [](auto& rng) {
    const int n = 3 + static_cast<int>(rng() % 8);  // at least two remaining actions
    const auto d1 = rem_distribution(random_profile(rng, n), "a0");
    const auto d2 = rem_distribution(random_profile(rng, n), "a0");
    return kl_divergence(d2, d1) > 0.0 && kl_divergence(d1, d1) == 0.0;
  }, 304);

  check("specificity monotone", [](auto& rng) {
    std::uniform_real_distribution<double> q(-8, 8), step(0.01, 3);
    const int n = 3 + static_cast<int>(rng() % 6);
    const double rest = q(rng);
    std::vector<QEntry> e{{"a0", q(rng)}};
    for (int k = 1; k < n; ++k) e.push_back({"a" + std::to_string(k), rest});
    const QProfile o("s", e);
    const double hi = q(rng), lo = hi - step(rng);
    auto pert = [&](double v) {
      auto c = e;
      c[0].q = v;
      return QProfile("s", c);
    };
    const auto s_hi = sarfa_score(o, pert(hi), "a0"), s_lo = sarfa_score(o, pert(lo), "a0");
    return s_lo.delta_p > s_hi.delta_p && (s_lo.delta_p <= 0.0 || s_lo.score > s_hi.score);
  }, 305);

  check("relevance monotone", [](auto& rng) {
    while (true) {
      std::uniform_real_distribution<double> q(-5, 5);
      const int n = 3 + static_cast<int>(rng() % 6);
      const auto o = random_profile(rng, n, -5, 5);
      std::vector<double> base;
      for (int k = 1; k < n; ++k) base.push_back(q(rng));
      const double a0 = o.q("a0").value() - 2.0;
      auto build = [&](double spread) {
        double target = 0, now = 0;
        for (double x : base) target += std::exp(x);
        for (double x : base) now += std::exp(x * spread);
        const double shift = std::log(target) - std::log(now);
        std::vector<QEntry> e{{"a0", a0}};
        for (int k = 1; k < n; ++k) e.push_back({"a" + std::to_string(k), base[k - 1] * spread + shift});
        return QProfile("s", e);
      };
      const auto s1 = sarfa_score(o, build(1.0), "a0");
      const auto s2 = sarfa_score(o, build(1.5 + double(rng() % 4)), "a0");
      if (!(s1.delta_p > 0.0) || !(s2.kl > s1.kl + 1e-9)) continue;
      return std::abs(s1.delta_p - s2.delta_p) < 1e-9 && s2.score < s1.score;
    }
  }, 306);

  auto random_items = [](std::mt19937_64& rng) {
    std::vector<eval::ScoredItem> items(3 + rng() % 60);
    for (auto& it : items) {
      it.score = static_cast<double>(rng() % 21) / 20.0;
      it.positive = rng() % 3 == 0;
    }
    items[0].positive = true;
    items[1].positive = false;
    return items;
  };
  check("AUC rank invariance", [&](auto& rng) {
    const auto items = random_items(rng);
    auto cubed = items;
    for (auto& it : cubed) it.score = std::exp(3 * it.score) - 7;
    return std::abs(eval::roc_from_items(items).auc - eval::roc_from_items(cubed).auc) < 1e-12;
  }, 307);
  check("AUC reversal", [&](auto& rng) {
    const auto items = random_items(rng);
    auto reversed = items;
    for (auto& it : reversed) it.score = -it.score;
    return std::abs(eval::roc_from_items(items).auc + eval::roc_from_items(reversed).auc - 1.0) < 1e-12;
  }, 308);

  if (!failures.empty()) return fail("violated: " + failures.front());
  return pass(fmt::format("8 properties x {} cases", kCases));
}

Outcome ac4_gridworld() {
  const auto t0 = std::chrono::steady_clock::now();
  // The goal's only open neighbour is (2,1).
  const auto world = grid::GridWorld::parse("#####/#S.G#/#..##/#..##/#####", {10.0, -1.0, 0.0, 0.9});
  const double residual = grid::solve_gridworld(world).bellman_residual();
  grid::GridworldOracle oracle(world);
  const auto cells = grid::compute_grid_saliency(world, grid::Action::right, oracle);
  const double secs = seconds_since(t0);
  const grid::CellSaliency* best = nullptr;
  bool strict = true;
  for (const auto& c : cells)
    if (!best || c.breakdown.score > best->breakdown.score) best = &c;
  for (const auto& c : cells)
    if (&c != best && c.breakdown.score >= best->breakdown.score) strict = false;
  const bool decisive = best && best->perturbation.cell == grid::Pos{2, 1} && strict;
  const auto detail = fmt::format("top cell ({},{}) S = {:.4f}, residual {:.1e}, {:.3f} s", best->perturbation.cell.x,
                                  best->perturbation.cell.y, best->breakdown.score, residual, secs);
  return decisive && residual < 1e-8 && secs < 1.0 ? pass(detail) : fail(detail);
}

Outcome ac5_synthetic_auc() {
  const auto entries = synth::make_puzzles(10, 2024);
  SessionPool planted(synth::planted_oracle(entries));
  SessionPool constant(synth::constant_oracle(entries));
  const double auc_planted = eval::roc(eval::score_dataset(entries, planted, {}), entries).auc;
  const double auc_constant = eval::roc(eval::score_dataset(entries, constant, {}), entries).auc;
  const auto detail = fmt::format("10 puzzles: planted AUC = {}, constant AUC = {}", auc_planted, auc_constant);
  return auc_planted == 1.0 && auc_constant == 0.5 ? pass(detail) : fail(detail);
}

Outcome ac6_paper_scale() {
  const char* engine = std::getenv("SARFA_ENGINE");
  const char* dataset = std::getenv("SARFA_DATASET");
  if (!engine || !*engine || !dataset || !*dataset)
    return {Verdict::skip, "integration suite; set SARFA_ENGINE and SARFA_DATASET to run"};

  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = chess::load_dataset(dataset);
  OracleConfig config;
  config.executable_path = engine;
  const char* depth = std::getenv("SARFA_DEPTH");
  config.search_limit = uci::Depth{depth ? std::atoi(depth) : 12};
  const char* workers_env = std::getenv("SARFA_WORKERS");
  const std::size_t workers =
      workers_env ? static_cast<std::size_t>(std::atoi(workers_env)) : std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
  auto pool = open_pool(config, workers);

  std::optional<eval::EvaluationStore> store;
  if (const char* results = std::getenv("SARFA_RESULTS"))
    store.emplace(results, nlohmann::json{{"engine", engine}, {"depth", std::get<uci::Depth>(config.search_limit).plies}});
  const auto evals = eval::evaluate_dataset(entries, pool, store ? &*store : nullptr);
  const auto rows = eval::ablation_from_evaluations(evals, entries);
  double harmonic = 0;
  for (const auto& r : rows)
    if (r.spec.label() == "sarfa") harmonic = r.auc;
  bool dominates = true;
  for (const auto& r : rows)
    if (r.auc > harmonic) dominates = false;

  std::vector<double> deltas;
  for (auto mode : {eval::RobustnessMode::human_nonsalient, eval::RobustnessMode::sarfa_nonsalient}) {
    const auto r = eval::robustness_from(evals, entries, pool, 1, mode);
    deltas.push_back(r.auc_after - r.auc_before);
  }
  const bool robust = std::all_of(deltas.begin(), deltas.end(), [](double d) { return std::abs(d) <= 0.02; });
  const auto detail = fmt::format("AUC {:.4f} (0.92 +/- 0.05), robustness deltas {:+.4f}/{:+.4f}, harmonic {} best, {:.0f} s",
                                  harmonic, deltas[0], deltas[1], dominates ? "is" : "is not", seconds_since(t0));
  return std::abs(harmonic - 0.92) <= 0.05 && robust && dominates ? pass(detail) : fail(detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac8_cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "sarfa_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  image::Frame frame(30, 20);
  frame.at(22, 7) = 1.0;
  image::write_pgm((root / "frame.pgm").string(), frame);

  const std::string cli = SARFA_CLI_PATH;
  const std::string engine = fmt::format("--engine '{}' --depth 3 --workers 3", FAKE_UCI_PATH);
  const std::string data = std::string(DATA_DIR);
  const std::string fen = "r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3";
  // Outputs use relative names and each run executes in its own directory,
  // so the embedded settings are the same for both runs.
  const std::vector<std::string> commands = {
      fmt::format("explain-chess --fen '{}' {} --out chess.json --svg chess.svg", fen, engine),
      fmt::format("explain-chess --fen '{}' --move f3e5 --method iyer {} --out iyer.json", fen, engine),
      fmt::format("explain-frame --pgm {} --agent-cmd '{} planted 30 20 22 7' --action a --workers 3 "
                  "--out frame.json --overlay frame.png --heatmap heat.pgm",
                  (root / "frame.pgm").string(), STUB_AGENT_PATH),
      "explain-grid --layout '#####/#S.G#/#..##/#..##/#####' --action right --out grid.json",
      fmt::format("eval-auc --dataset {}/tiny.jsonl --methods sarfa,iyer,greydanus_value {} --out auc.json "
                  "--csv auc.csv --roc-csv roc.csv",
                  data, engine),
      fmt::format("eval-ablation --dataset {}/tiny.jsonl {} --out ablation.json --csv ablation.csv",
                  data, engine),
      fmt::format("eval-robustness --dataset {}/tiny.jsonl --seed 11 {} --out robust.json "
                  "--csv robust.csv --perturbed-out perturbed.jsonl",
                  data, engine),
      fmt::format("dataset-build --raw-labels {}/raw_labels.jsonl --out dataset.jsonl", data),
  };

  for (const char* run : {"run1", "run2"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    for (const auto& cmd : commands) {
      const std::string line = fmt::format("cd '{}' && '{}' {} 2>/dev/null", dir.string(), cli, cmd);
      if (std::system(line.c_str()) != 0) return fail("command failed: " + cmd);
    }
  }

  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(root / "run1")) {
    if (slurp(entry.path()) != slurp(root / "run2" / entry.path().filename())) return fail("outputs differ: " + entry.path().filename().string());
    ++compared;
  }
  return pass(fmt::format("{} commands run twice, {} output files byte-identical", commands.size(), compared));
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "math-core oracle equivalence", ac1_reference_equivalence},
      {"AC2", "hand-computed fixtures", ac2_fixtures},
      {"AC3", "invariant suite", ac3_properties},
      {"AC4", "gridworld end-to-end", ac4_gridworld},
      {"AC5", "synthetic AUC", ac5_synthetic_auc},
      {"AC6", "paper-scale reproduction", ac6_paper_scale},
      {"AC7", "human study and trained Atari/Go agents",
       [] { return Outcome{Verdict::excluded, "not reproducible; covered by AC5 and the stub-agent protocol tests"}; }},
      {"AC8", "CLI determinism", ac8_cli_determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    static constexpr const char* kNames[] = {"PASS", "FAIL", "SKIP", "EXCLUDED"};
    fmt::print("{} {} {}: {}\n", kNames[static_cast<int>(o.verdict)], c.id, c.title, o.detail);
    failed += o.verdict == Verdict::fail;
  }
  std::fflush(stdout);
  return failed ? 1 : 0;
}
