#pragma once

// Dataset-level evaluation: score every puzzle, rank squares against the
// human labels (ROC/AUC), compare combiners and baselines, and check that
// removing non-salient pieces leaves the AUC unchanged.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sarfa/board_saliency.hpp"
#include "sarfa/dataset.hpp"
#include "sarfa/oracle.hpp"

namespace sarfa::eval {

using chess::BoardEvaluation;
using chess::SaliencyDatasetEntry;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Persistence of raw agent answers (JSON Lines, one puzzle per line, header
// line first). Scores for any method can be recomputed from these.

inline nlohmann::json profile_to_json(const QProfile& q) {
  auto arr = nlohmann::json::array();
  for (const auto& e : q.entries()) arr.push_back(nlohmann::json::array({e.action, e.q}));
  return arr;
}

inline QProfile profile_from_json(const nlohmann::json& j, std::string state_id) {
  std::vector<QEntry> entries;
  for (const auto& pair : j) entries.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
  return QProfile(std::move(state_id), std::move(entries));
}

struct PuzzleEvaluation {
  std::size_t index = 0;
  std::string fen;
  std::optional<BoardEvaluation> board;  // empty when the puzzle failed
  std::string error;
};

inline nlohmann::json puzzle_to_json(const PuzzleEvaluation& p) {
  nlohmann::json j;
  j["index"] = p.index;
  j["fen"] = p.fen;
  if (!p.board) {
    j["failed"] = true;
    j["error"] = p.error;
    return j;
  }
  j["selected"] = p.board->selected;
  j["original"] = profile_to_json(p.board->original);
  auto arr = nlohmann::json::array();
  for (const auto& pe : p.board->perturbed) {
    nlohmann::json e;
    e["square"] = chess::square_name(pe.perturbation.square);
    e["piece"] = std::string(1, pe.perturbation.removed_piece);
    e["fen"] = pe.fen;
    e["selected_legal"] = pe.selected_legal;
    e["q"] = pe.q ? profile_to_json(*pe.q) : nlohmann::json(nullptr);
    if (!pe.error.empty()) e["error"] = pe.error;
    arr.push_back(std::move(e));
  }
  j["perturbed"] = std::move(arr);
  return j;
}

inline PuzzleEvaluation puzzle_from_json(const nlohmann::json& j) {
  PuzzleEvaluation p;
  p.index = j.at("index").get<std::size_t>();
  p.fen = j.at("fen").get<std::string>();
  if (j.value("failed", false)) {
    p.error = j.value("error", std::string());
    return p;
  }
  std::vector<chess::PerturbedEvaluation> perturbed;
  for (const auto& e : j.at("perturbed")) {
    chess::PerturbedEvaluation pe;
    pe.perturbation.square = *chess::parse_square(e.at("square").get<std::string>());
    pe.perturbation.removed_piece = e.at("piece").get<std::string>().at(0);
    pe.fen = e.at("fen").get<std::string>();
    pe.selected_legal = e.at("selected_legal").get<bool>();
    if (!e.at("q").is_null()) pe.q = profile_from_json(e.at("q"), pe.fen);
    pe.error = e.value("error", std::string());
    perturbed.push_back(std::move(pe));
  }
  p.board = BoardEvaluation{p.fen, j.at("selected").get<std::string>(),
                            profile_from_json(j.at("original"), p.fen), std::move(perturbed)};
  return p;
}

/// Append-only store of puzzle evaluations. Reopening a file written with the
/// same header resumes it; a different header is an error.
class EvaluationStore {
 public:
  EvaluationStore(std::string path, nlohmann::json header) : path_(std::move(path)) {
    header_["schema"] = kSchemaVersion;
    header_["kind"] = "sarfa-evaluations";
    header_["config"] = std::move(header);
    if (std::filesystem::exists(path_)) load();
    if (!has_header_) {
      std::ofstream out(path_, std::ios::trunc);
      if (!out) throw IoError("cannot write " + path_);
      out << header_.dump() << '\n';
      has_header_ = true;
    }
  }

  const PuzzleEvaluation* find(std::size_t index, const std::string& fen) const {
    auto it = done_.find(index);
    if (it == done_.end() || it->second.fen != fen) return nullptr;
    return &it->second;
  }

  void append(const PuzzleEvaluation& p) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to " + path_);
    out << puzzle_to_json(p).dump() << '\n';
    if (!out) throw IoError("write failed for " + path_);
    done_.insert_or_assign(p.index, p);
  }

  const std::string& path() const noexcept { return path_; }

 private:
  void load() {
    std::ifstream in(path_);
    if (!in) throw IoError("cannot read " + path_);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        // A torn final line from an interrupted run; everything before it stands.
        break;
      }
      if (first) {
        if (j != header_)
          throw InputError(path_ + " was written with a different configuration; remove it or change --out");
        has_header_ = true;
        first = false;
        continue;
      }
      auto p = puzzle_from_json(j);
      done_.insert_or_assign(p.index, std::move(p));
    }
    if (!first) return;
    // Empty file: rewrite the header.
    has_header_ = false;
  }

  std::string path_;
  nlohmann::json header_;
  bool has_header_ = false;
  std::map<std::size_t, PuzzleEvaluation> done_;
};

/// Evaluates every puzzle in order, reusing stored results. Puzzle failures
/// are recorded; an oracle failure on the unperturbed position fails only
/// that puzzle.
inline std::vector<PuzzleEvaluation> evaluate_dataset(const std::vector<SaliencyDatasetEntry>& entries,
                                                      SessionPool& pool, EvaluationStore* store = nullptr) {
  std::vector<PuzzleEvaluation> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (store) {
      if (const auto* done = store->find(i, e.fen)) {
        out.push_back(*done);
        continue;
      }
    }
    PuzzleEvaluation p;
    p.index = i;
    p.fen = e.fen;
    try {
      p.board = chess::evaluate_board(chess::parse_fen(e.fen), e.best_move, pool);
    } catch (const OracleError& err) {
      p.error = err.what();
    } catch (const ContractViolation& err) {
      p.error = err.what();
    }
    if (store) store->append(p);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method runs

struct PuzzleScores {
  std::size_t index = 0;
  bool ok = false;
  std::map<std::string, double> raw;  // square -> raw score, skipped squares 0
  std::string error;
};

struct MethodRun {
  ScoringSpec spec;
  std::vector<PuzzleScores> puzzles;

  std::size_t n_failed() const {
    return static_cast<std::size_t>(
        std::count_if(puzzles.begin(), puzzles.end(), [](const PuzzleScores& p) { return !p.ok; }));
  }
};

inline MethodRun score_evaluations(const std::vector<PuzzleEvaluation>& evals, const ScoringSpec& spec) {
  MethodRun run{spec, {}};
  for (const auto& pe : evals) {
    PuzzleScores ps;
    ps.index = pe.index;
    if (!pe.board) {
      ps.error = pe.error;
      run.puzzles.push_back(std::move(ps));
      continue;
    }
    ps.ok = true;
    for (const auto& [square, s] : chess::score_board(*pe.board, spec))
      ps.raw[square] = has_score(s.breakdown.status) ? s.breakdown.score : 0.0;
    run.puzzles.push_back(std::move(ps));
  }
  return run;
}

inline MethodRun score_dataset(const std::vector<SaliencyDatasetEntry>& entries, SessionPool& pool,
                               const ScoringSpec& spec, EvaluationStore* store = nullptr) {
  return score_evaluations(evaluate_dataset(entries, pool, store), spec);
}

// ---------------------------------------------------------------------------
// ROC / AUC

enum class Normalization : std::uint8_t { global, per_puzzle };

struct ScoredItem {
  double score = 0.0;
  bool positive = false;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocReport {
  std::vector<RocPoint> points;
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Threshold sweep from the highest score down; equal scores form a single
/// step. AUC by the trapezoidal rule. Throws InputError without both classes.
inline RocReport roc_from_items(std::vector<ScoredItem> items) {
  RocReport r;
  for (const auto& it : items) (it.positive ? r.n_pos : r.n_neg)++;
  if (r.n_pos == 0 || r.n_neg == 0) throw InputError("AUC is undefined without both positives and negatives");
  std::stable_sort(items.begin(), items.end(),
                   [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });
  r.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) {
      (items[j].positive ? tp : fp)++;
      ++j;
    }
    const RocPoint next{double(fp) / double(r.n_neg), double(tp) / double(r.n_pos)};
    const RocPoint& prev = r.points.back();
    r.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
    r.points.push_back(next);
    i = j;
  }
  return r;
}

inline void min_max(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, b = *hi;
  for (double& x : v) x = b > a ? (x - a) / (b - a) : 0.0;
}

/// Labeled items for ROC: every occupied non-king square of every scored
/// puzzle; positives are the human-salient squares. Scores are min-max
/// scaled to [0,1].
inline std::vector<ScoredItem> collect_items(const MethodRun& run,
                                             const std::vector<SaliencyDatasetEntry>& entries,
                                             Normalization norm = Normalization::global) {
  std::vector<ScoredItem> items;
  std::vector<double> values;
  for (const auto& ps : run.puzzles) {
    if (!ps.ok) continue;
    const auto& e = entries.at(ps.index);
    const auto candidates = chess::candidate_squares(chess::parse_fen(e.fen));
    std::vector<double> local;
    for (const auto& sq : candidates) {
      auto it = ps.raw.find(sq);
      local.push_back(it == ps.raw.end() ? 0.0 : it->second);
      items.push_back({0.0, e.salient_squares.count(sq) > 0});
    }
    if (norm == Normalization::per_puzzle) min_max(local);
    values.insert(values.end(), local.begin(), local.end());
  }
  if (norm == Normalization::global) min_max(values);
  for (std::size_t i = 0; i < items.size(); ++i) items[i].score = values[i];
  return items;
}

inline RocReport roc(const MethodRun& run, const std::vector<SaliencyDatasetEntry>& entries,
                     Normalization norm = Normalization::global) {
  return roc_from_items(collect_items(run, entries, norm));
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  ScoringSpec spec;
  double auc = 0.0;
  std::size_t n_puzzles = 0;
  std::size_t n_skipped = 0;
  RocReport roc;
};

inline std::vector<ScoringSpec> ablation_specs(double temperature = 1.0) {
  std::vector<ScoringSpec> specs;
  for (auto c : {Combiner::harmonic, Combiner::dp_only, Combiner::k_only, Combiner::arithmetic_mean,
                 Combiner::geometric_mean, Combiner::minimum})
    specs.push_back({Method::sarfa, c, temperature});
  for (auto m : {Method::iyer, Method::greydanus_policy, Method::greydanus_value})
    specs.push_back({m, Combiner::harmonic, temperature});
  return specs;
}

/// AUC per method/combiner, best first (ties keep the canonical order).
inline std::vector<AblationRow> ablation_from_evaluations(const std::vector<PuzzleEvaluation>& evals,
                                                          const std::vector<SaliencyDatasetEntry>& entries,
                                                          double temperature = 1.0,
                                                          Normalization norm = Normalization::global) {
  std::vector<AblationRow> rows;
  for (const auto& spec : ablation_specs(temperature)) {
    const auto run = score_evaluations(evals, spec);
    auto report = roc(run, entries, norm);
    rows.push_back({spec, report.auc, run.puzzles.size() - run.n_failed(), run.n_failed(), std::move(report)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) { return a.auc > b.auc; });
  return rows;
}

inline std::vector<AblationRow> ablation(const std::vector<SaliencyDatasetEntry>& entries, SessionPool& pool,
                                         EvaluationStore* store = nullptr, double temperature = 1.0,
                                         Normalization norm = Normalization::global) {
  return ablation_from_evaluations(evaluate_dataset(entries, pool, store), entries, temperature, norm);
}

// ---------------------------------------------------------------------------
// Robustness to irrelevant removals

enum class RobustnessMode : std::uint8_t { human_nonsalient, sarfa_nonsalient };

constexpr std::string_view to_string(RobustnessMode m) noexcept {
  return m == RobustnessMode::human_nonsalient ? "human_nonsalient" : "sarfa_nonsalient";
}

inline std::optional<RobustnessMode> parse_robustness_mode(std::string_view s) noexcept {
  if (s == "human_nonsalient") return RobustnessMode::human_nonsalient;
  if (s == "sarfa_nonsalient") return RobustnessMode::sarfa_nonsalient;
  return std::nullopt;
}

struct Removal {
  std::size_t index = 0;
  std::optional<std::string> square;  // empty when the puzzle was skipped
};

/// Removes one random non-salient piece per puzzle. A candidate must be a
/// valid removal that keeps best_move legal. `non_salient(i, square)` decides
/// salience. Puzzles without candidates are kept unchanged.
inline std::vector<SaliencyDatasetEntry> perturb_dataset(
    const std::vector<SaliencyDatasetEntry>& entries, std::uint64_t seed,
    const std::function<bool(std::size_t, const std::string&)>& non_salient, std::vector<Removal>* removals = nullptr) {
  std::mt19937_64 rng(seed);
  std::vector<SaliencyDatasetEntry> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto pos = chess::parse_fen(e.fen);
    std::vector<chess::PerturbedPosition> candidates;
    for (auto& pp : chess::enumerate_perturbations(pos)) {
      const auto sq = chess::square_name(pp.perturbation.square);
      if (e.salient_squares.count(sq) == 0 && non_salient(i, sq) && pp.position.is_legal(e.best_move))
        candidates.push_back(std::move(pp));
    }
    if (candidates.empty()) {
      out.push_back(e);
      if (removals) removals->push_back({i, std::nullopt});
      continue;
    }
    const auto& pick = candidates[rng() % candidates.size()];
    SaliencyDatasetEntry next = e;
    next.fen = pick.position.fen();
    next.expert_labels.reset();
    out.push_back(std::move(next));
    if (removals) removals->push_back({i, chess::square_name(pick.perturbation.square)});
  }
  return out;
}

struct RobustnessReport {
  RobustnessMode mode = RobustnessMode::human_nonsalient;
  std::uint64_t seed = 0;
  double auc_before = 0.0;
  double auc_after = 0.0;
  std::size_t n_perturbed = 0;
  std::size_t n_skipped = 0;
  std::vector<Removal> removals;
  std::vector<SaliencyDatasetEntry> perturbed;
};

struct RobustnessOptions {
  double sarfa_threshold = 0.1;  // raw SARFA score below this counts as non-salient
  double temperature = 1.0;
  Normalization normalization = Normalization::global;
  EvaluationStore* before_store = nullptr;
  EvaluationStore* after_store = nullptr;
};

/// As robustness(), starting from already computed evaluations of the
/// unperturbed dataset; lets several modes share one baseline.
inline RobustnessReport robustness_from(const std::vector<PuzzleEvaluation>& before_evals,
                                        const std::vector<SaliencyDatasetEntry>& entries, SessionPool& pool,
                                        std::uint64_t seed, RobustnessMode mode, const RobustnessOptions& opts = {}) {
  const ScoringSpec spec{Method::sarfa, Combiner::harmonic, opts.temperature};
  const auto before = score_evaluations(before_evals, spec);

  RobustnessReport r;
  r.mode = mode;
  r.seed = seed;
  r.auc_before = roc(before, entries, opts.normalization).auc;

  auto non_salient = [&](std::size_t i, const std::string& sq) {
    if (mode == RobustnessMode::human_nonsalient) return true;
    const auto& ps = before.puzzles.at(i);
    if (!ps.ok) return false;
    auto it = ps.raw.find(sq);
    return it != ps.raw.end() && it->second < opts.sarfa_threshold;
  };
  r.perturbed = perturb_dataset(entries, seed, non_salient, &r.removals);
  for (const auto& rm : r.removals) (rm.square ? r.n_perturbed : r.n_skipped)++;

  const auto after = score_dataset(r.perturbed, pool, spec, opts.after_store);
  r.auc_after = roc(after, r.perturbed, opts.normalization).auc;
  return r;
}

inline RobustnessReport robustness(const std::vector<SaliencyDatasetEntry>& entries, SessionPool& pool,
                                   std::uint64_t seed, RobustnessMode mode, const RobustnessOptions& opts = {}) {
  return robustness_from(evaluate_dataset(entries, pool, opts.before_store), entries, pool, seed, mode, opts);
}

}  // namespace sarfa::eval
