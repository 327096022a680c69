// sarfa: explain chess positions, frames and gridworlds; run the evaluation
// suite; build datasets from raw expert labels.
//
// Settings resolve as flag > SARFA_<KEY> environment variable > --config
// file (one flat JSON object keyed by flag name) > built-in default.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sarfa/sarfa.hpp"

namespace {

using nlohmann::json;
using namespace sarfa;
using chess::SaliencyDatasetEntry;

enum class Kind { text, integer, number, seed };

struct Setting {
  std::string name;
  Kind kind;
  json fallback;  // null: unset unless supplied
  std::string help;
};

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

const std::vector<Setting>& all_settings() {
  static const std::vector<Setting> table = {
      {"engine", Kind::text, nullptr, "UCI engine executable"},
      {"oracle", Kind::text, "uci", "chess oracle: uci or external"},
      {"agent-cmd", Kind::text, nullptr, "external agent, run through /bin/sh -c"},
      {"depth", Kind::integer, 12, "engine search depth"},
      {"movetime", Kind::integer, nullptr, "engine time per position in ms; replaces depth"},
      {"multipv", Kind::integer, 10, "ranked moves requested per position"},
      {"q-scale", Kind::number, 1.0, "pawns per Q unit"},
      {"q-cap", Kind::number, 20.0, "largest |Q| after mapping"},
      {"mate-base", Kind::number, 15.0, "Q assigned to the slowest mate"},
      {"handshake-timeout-ms", Kind::integer, 10000, "engine start-up timeout"},
      {"reply-timeout-ms", Kind::integer, 300000, "per-query timeout"},
      {"workers", Kind::integer, default_workers(), "oracle sessions run in parallel"},
      {"method", Kind::text, "sarfa", "sarfa, iyer, greydanus_policy or greydanus_value"},
      {"combiner", Kind::text, "harmonic", "SARFA combiner"},
      {"methods", Kind::text, "sarfa", "comma-separated labels, e.g. sarfa,iyer,sarfa:minimum"},
      {"temperature", Kind::number, 1.0, "softmax temperature of the policy baseline"},
      {"normalization", Kind::text, "global", "global or per_puzzle"},
      {"seed", Kind::seed, nullptr, "perturbation seed"},
      {"mode", Kind::text, "both", "human_nonsalient, sarfa_nonsalient or both"},
      {"sarfa-threshold", Kind::number, 0.1, "score below which SARFA calls a square non-salient"},
      {"colormap", Kind::text, "red_alpha", "red_alpha or viridis"},
      {"opacity", Kind::number, 0.85, "heat opacity at full score"},
      {"fen", Kind::text, nullptr, "position to explain"},
      {"move", Kind::text, nullptr, "move to explain (default: the engine's choice)"},
      {"layout", Kind::text, nullptr, "gridworld rows separated by '/'"},
      {"action", Kind::text, nullptr, "action to explain"},
      {"goal-reward", Kind::number, 1.0, "gridworld goal reward"},
      {"pit-reward", Kind::number, -1.0, "gridworld pit reward"},
      {"step-reward", Kind::number, 0.0, "gridworld reward per move"},
      {"discount", Kind::number, 0.9, "gridworld discount"},
      {"pgm", Kind::text, nullptr, "input frame (binary PGM)"},
      {"sigma-blur", Kind::number, 3.0, "blur radius of the perturbation"},
      {"sigma-mask", Kind::number, 5.0, "mask radius of the perturbation"},
      {"stride", Kind::integer, 5, "pixels between perturbation centres"},
      {"dataset", Kind::text, nullptr, "JSON Lines puzzle dataset"},
      {"raw-labels", Kind::text, nullptr, "JSON Lines with fen, best_move, expert_labels"},
      {"results", Kind::text, nullptr, "per-puzzle evaluation log; reused on rerun"},
      {"out", Kind::text, nullptr, "main output file (default: stdout)"},
      {"svg", Kind::text, nullptr, "SVG board output"},
      {"csv", Kind::text, nullptr, "CSV summary output"},
      {"roc-csv", Kind::text, nullptr, "ROC points as CSV"},
      {"overlay", Kind::text, nullptr, "frame with heat overlay (.png or .ppm)"},
      {"heatmap", Kind::text, nullptr, "heat levels as PGM"},
      {"perturbed-out", Kind::text, nullptr, "perturbed dataset output"},
  };
  return table;
}

const Setting& setting(const std::string& name) {
  for (const auto& s : all_settings())
    if (s.name == name) return s;
  throw ContractViolation("unknown setting " + name);
}

std::string env_name(const std::string& key) {
  std::string out = "SARFA_";
  for (char c : key) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

template <class T>
bool parse_full(const std::string& s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

json convert(const Setting& s, const json& v, const std::string& origin) {
  if (v.is_null()) return v;
  auto bad = [&] { return InputError(fmt::format("invalid value for {} ({}): {}", s.name, origin, v.dump())); };
  switch (s.kind) {
    case Kind::text:
      if (v.is_string()) return v;
      if (v.is_number() || v.is_boolean()) return v.dump();
      throw bad();
    case Kind::integer: {
      if (v.is_number_integer()) return v;
      std::int64_t n = 0;
      if (v.is_string() && parse_full(v.get<std::string>(), n)) return n;
      throw bad();
    }
    case Kind::number: {
      if (v.is_number()) return v.get<double>();
      double d = 0;
      if (v.is_string() && parse_full(v.get<std::string>(), d)) return d;
      throw bad();
    }
    case Kind::seed: {
      if (v.is_number_unsigned()) return v;
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
      std::uint64_t n = 0;
      if (v.is_string() && parse_full(v.get<std::string>(), n)) return n;
      throw bad();
    }
  }
  throw bad();
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError(path + ": config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(all_settings().begin(), all_settings().end(),
                                   [&](const Setting& s) { return s.name == key; });
    if (!known) throw InputError(path + ": unknown setting '" + key + "'");
  }
  return j;
}

/// Resolved settings of one command.
class RunConfig {
 public:
  RunConfig(std::string command, json values) : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& command() const { return command_; }

  std::optional<std::string> text(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<std::string>();
  }
  std::string need_text(const std::string& key) const {
    auto v = text(key);
    if (!v || v->empty()) throw InputError(fmt::format("--{} is required for {}", key, command_));
    return *v;
  }
  std::optional<std::int64_t> maybe_integer(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<std::int64_t>();
  }
  int integer(const std::string& key) const {
    const auto v = maybe_integer(key);
    if (!v) throw InputError(fmt::format("--{} is required for {}", key, command_));
    if (*v < INT32_MIN || *v > INT32_MAX) throw InputError(fmt::format("--{} is out of range", key));
    return static_cast<int>(*v);
  }
  double number(const std::string& key) const { return at(key).get<double>(); }
  std::optional<std::uint64_t> seed(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<std::uint64_t>();
  }

  /// Provenance block written into every output.
  json header(std::string_view kind) const {
    return {{"schema", eval::kSchemaVersion}, {"kind", kind}, {"command", command_}, {"config", values_}};
  }

  /// The subset of settings that determines oracle answers.
  json oracle_identity() const {
    json j = json::object();
    for (const char* k : {"oracle", "engine", "agent-cmd", "depth", "movetime", "multipv", "q-scale", "q-cap",
                          "mate-base"})
      if (values_.contains(k)) j[k] = values_[k];
    return j;
  }

 private:
  const json& at(const std::string& key) const {
    if (!values_.contains(key)) throw ContractViolation("setting " + key + " not declared for " + command_);
    return values_[key];
  }

  std::string command_;
  json values_;
};

/// A subcommand with its declared settings.
struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<std::string> keys;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  RunConfig resolve() const {
    const json file = config_path.empty() ? json::object() : load_config_file(config_path);
    json values = json::object();
    for (const auto& key : keys) {
      const auto& s = setting(key);
      json v = s.fallback;
      std::string origin = "default";
      if (file.contains(key)) {
        v = file[key];
        origin = config_path;
      }
      if (const char* env = std::getenv(env_name(key).c_str())) {
        v = std::string(env);
        origin = env_name(key);
      }
      if (options.at(key)->count() > 0) {
        v = flag_values.at(key);
        origin = "--" + key;
      }
      values[key] = convert(s, v, origin);
    }
    return RunConfig(name, std::move(values));
  }
};

Command& declare(CLI::App& app, std::vector<std::unique_ptr<Command>>& commands, const std::string& name,
                 const std::string& help, std::vector<std::string> keys) {
  auto cmd = std::make_unique<Command>();
  cmd->name = name;
  cmd->app = app.add_subcommand(name, help);
  cmd->keys = std::move(keys);
  cmd->app->add_option("--config", cmd->config_path, "JSON settings file")->check(CLI::ExistingFile);
  for (const auto& key : cmd->keys) {
    const auto& s = setting(key);
    std::string help_text = s.help;
    if (!s.fallback.is_null()) help_text += " [" + (s.fallback.is_string() ? s.fallback.get<std::string>() : s.fallback.dump()) + "]";
    cmd->options[key] = cmd->app->add_option("--" + key, cmd->flag_values[key], help_text);
  }
  commands.push_back(std::move(cmd));
  return *commands.back();
}

// ---------------------------------------------------------------------------
// Shared helpers

const std::vector<std::string> kOracleKeys = {"engine",    "oracle",          "agent-cmd",
                                              "depth",     "movetime",        "multipv",
                                              "q-scale",   "q-cap",           "mate-base",
                                              "handshake-timeout-ms", "reply-timeout-ms", "workers"};

std::vector<std::string> with(std::vector<std::string> keys, const std::vector<std::string>& more) {
  keys.insert(keys.end(), more.begin(), more.end());
  return keys;
}

std::size_t workers(const RunConfig& c) {
  const int n = c.integer("workers");
  if (n < 1) throw InputError("--workers must be >= 1");
  return static_cast<std::size_t>(n);
}

OracleConfig oracle_config(const RunConfig& c, OracleKind kind) {
  OracleConfig o;
  o.kind = kind;
  if (kind == OracleKind::uci) o.executable_path = c.text("engine");
  if (kind == OracleKind::external) o.executable_path = c.text("agent-cmd");
  o.reply_timeout = std::chrono::milliseconds(c.integer("reply-timeout-ms"));
  if (kind == OracleKind::uci) {
    if (const auto mt = c.maybe_integer("movetime"))
      o.search_limit = uci::MoveTime{static_cast<int>(*mt)};
    else
      o.search_limit = uci::Depth{c.integer("depth")};
    o.multipv = c.integer("multipv");
    o.mapping.q_scale = c.number("q-scale");
    o.mapping.q_cap = c.number("q-cap");
    o.mapping.mate_base = c.number("mate-base");
    o.handshake_timeout = std::chrono::milliseconds(c.integer("handshake-timeout-ms"));
  }
  if (o.reply_timeout.count() < 1 || o.handshake_timeout.count() < 1) throw InputError("timeouts must be positive");
  o.check();
  return o;
}

OracleConfig chess_oracle(const RunConfig& c) {
  const auto kind = c.need_text("oracle");
  if (kind == "uci") return oracle_config(c, OracleKind::uci);
  if (kind == "external") return oracle_config(c, OracleKind::external);
  throw InputError("--oracle must be uci or external, not " + kind);
}

ScoringSpec scoring_spec(const RunConfig& c) {
  ScoringSpec spec;
  const auto m = parse_method(c.need_text("method"));
  if (!m) throw InputError("unknown --method " + c.need_text("method"));
  const auto comb = parse_combiner(c.need_text("combiner"));
  if (!comb) throw InputError("unknown --combiner " + c.need_text("combiner"));
  spec.method = *m;
  spec.combiner = *comb;
  spec.temperature = c.number("temperature");
  if (!(spec.temperature > 0.0)) throw InputError("--temperature must be positive");
  return spec;
}

render::HeatmapStyle heat_style(const RunConfig& c) {
  render::HeatmapStyle style;
  const auto map = render::parse_colormap(c.need_text("colormap"));
  if (!map) throw InputError("unknown --colormap " + c.need_text("colormap"));
  style.colormap = *map;
  style.opacity = c.number("opacity");
  if (!(style.opacity > 0.0 && style.opacity <= 1.0)) throw InputError("--opacity must lie in (0,1]");
  return style;
}

eval::Normalization normalization(const RunConfig& c) {
  const auto n = c.need_text("normalization");
  if (n == "global") return eval::Normalization::global;
  if (n == "per_puzzle") return eval::Normalization::per_puzzle;
  throw InputError("--normalization must be global or per_puzzle, not " + n);
}

void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw InputError(what + " not found: " + path);
}

bool has_extension(const std::string& path, std::string_view ext) {
  auto e = std::filesystem::path(path).extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return e == ext;
}

void emit(const std::optional<std::string>& path, std::string_view bytes) {
  if (path) {
    render::write_file(*path, bytes);
  } else {
    std::cout << bytes;
    std::cout.flush();
  }
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

/// CSV documents start with one '#' line carrying the provenance header.
std::string csv_text(const json& header, const std::vector<std::string>& rows) {
  std::string out = "# " + header.dump() + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

json breakdown_json(const ScoreBreakdown& b) {
  return {{"delta_p", b.delta_p}, {"kl", b.kl}, {"k_sim", b.k_sim}, {"score", b.score},
          {"status", std::string(to_string(b.status))}};
}

void fail_if_all_failed(const std::vector<eval::PuzzleEvaluation>& evals) {
  if (evals.empty()) throw InputError("dataset is empty");
  for (const auto& e : evals)
    if (e.board) return;
  throw OracleError("oracle failed on every puzzle; first error: " + evals.front().error);
}

json failures_json(const std::vector<eval::PuzzleEvaluation>& evals) {
  auto arr = json::array();
  for (const auto& e : evals)
    if (!e.board) arr.push_back({{"index", e.index}, {"fen", e.fen}, {"error", e.error}});
  return arr;
}

std::size_t count_failed(const std::vector<eval::PuzzleEvaluation>& evals) {
  return static_cast<std::size_t>(std::count_if(evals.begin(), evals.end(), [](const auto& e) { return !e.board; }));
}

json roc_points(const eval::RocReport& r) {
  auto arr = json::array();
  for (const auto& p : r.points) arr.push_back({p.fpr, p.tpr});
  return arr;
}

void append_roc_rows(std::vector<std::string>& rows, const std::string& label, const eval::RocReport& r) {
  for (const auto& p : r.points) rows.push_back(fmt::format("{},{},{}", label, p.fpr, p.tpr));
}

std::vector<eval::PuzzleEvaluation> evaluate(const RunConfig& c, const std::vector<SaliencyDatasetEntry>& entries,
                                             SessionPool& pool, const std::optional<std::string>& results_path) {
  std::optional<eval::EvaluationStore> store;
  if (results_path) store.emplace(*results_path, c.oracle_identity());
  auto evals = eval::evaluate_dataset(entries, pool, store ? &*store : nullptr);
  fail_if_all_failed(evals);
  return evals;
}

void note(const std::string& message) { fmt::print(stderr, "{}\n", message); }

// ---------------------------------------------------------------------------
// Commands

int explain_chess(const RunConfig& c) {
  const auto pos = chess::parse_fen(c.need_text("fen"));
  if (pos.legal_moves().empty()) throw InputError("the position has no legal moves");
  const auto given = c.text("move");
  if (given && !pos.is_legal(*given)) throw InputError("move " + *given + " is not legal in this position");
  const auto spec = scoring_spec(c);
  const auto style = heat_style(c);
  const auto out = c.text("out");
  const auto svg_path = c.text("svg");

  auto pool = open_pool(chess_oracle(c), workers(c));
  std::string selected;
  if (given) {
    selected = pos.find_legal(*given)->uci();
  } else {
    auto lease = pool.acquire();
    selected = lease->evaluate(pos.fen()).best_action();
  }
  const auto board = chess::evaluate_board(pos, selected, pool);
  const auto saliency = chess::score_board(board, spec);

  auto doc = c.header("sarfa-explain-chess");
  doc["fen"] = pos.fen();
  doc["move"] = selected;
  doc["move_source"] = given ? "given" : "oracle";
  doc["method"] = spec.label();
  doc["original"] = eval::profile_to_json(board.original);
  json squares = json::object();
  std::map<std::string, double> scores;
  std::size_t skipped = 0;
  for (const auto& [name, sq] : saliency) {
    auto j = breakdown_json(sq.breakdown);
    j["piece"] = std::string(1, pos.at(sq.perturbation.square));
    squares[name] = std::move(j);
    scores[name] = sq.breakdown.score;
    skipped += !has_score(sq.breakdown.status);
  }
  doc["squares"] = std::move(squares);
  doc["skipped"] = skipped;

  const auto metadata = c.header("sarfa-explain-chess").dump();
  const auto svg = [&] { return render::chess_svg(pos, scores, style, metadata); };
  if (out && has_extension(*out, ".svg")) {
    render::write_file(*out, svg());
  } else if (out || !svg_path) {
    emit(out, json_text(doc));
  }
  if (svg_path) render::write_file(*svg_path, svg());
  if (skipped) note(fmt::format("{} square(s) skipped after oracle failures", skipped));
  return 0;
}

int explain_frame(const RunConfig& c) {
  const auto pgm = c.need_text("pgm");
  require_file(pgm, "frame");
  const auto frame = image::read_pgm(pgm);
  const auto action = c.need_text("action");
  c.need_text("agent-cmd");
  const image::BlurSpec blur{c.number("sigma-blur"), c.number("sigma-mask"), c.integer("stride")};
  if (!(blur.sigma_blur > 0.0) || !(blur.sigma_mask > 0.0) || blur.stride < 1)
    throw InputError("--sigma-blur, --sigma-mask and --stride must be positive");
  const auto spec = scoring_spec(c);
  const auto style = heat_style(c);
  const auto overlay = c.text("overlay");
  if (overlay && !has_extension(*overlay, ".png") && !has_extension(*overlay, ".ppm"))
    throw InputError("--overlay must name a .png or .ppm file");

  auto pool = open_pool(oracle_config(c, OracleKind::external), workers(c));
  const auto sal = image::compute_frame_saliency(frame, action, pool, blur, spec);

  auto doc = c.header("sarfa-explain-frame");
  doc["width"] = frame.width;
  doc["height"] = frame.height;
  doc["action"] = action;
  doc["method"] = spec.label();
  doc["grid_width"] = sal.grid_width;
  doc["grid_height"] = sal.grid_height;
  doc["stride"] = sal.stride;
  auto cells = json::array();
  std::size_t skipped = 0;
  for (int gy = 0; gy < sal.grid_height; ++gy)
    for (int gx = 0; gx < sal.grid_width; ++gx) {
      const auto& b = sal.cell(gx, gy);
      auto j = breakdown_json(b);
      j["gx"] = gx;
      j["gy"] = gy;
      j["x"] = image::grid_center(gx, sal.stride, frame.width);
      j["y"] = image::grid_center(gy, sal.stride, frame.height);
      cells.push_back(std::move(j));
      skipped += !has_score(b.status);
    }
  doc["cells"] = std::move(cells);
  doc["skipped"] = skipped;

  const auto metadata = c.header("sarfa-explain-frame").dump();
  const auto out = c.text("out");
  const auto heatmap = c.text("heatmap");
  if (out || (!overlay && !heatmap)) emit(out, json_text(doc));
  if (overlay) {
    const auto img = render::overlay_frame(frame, sal.upsampled, style);
    render::write_file(*overlay, has_extension(*overlay, ".png") ? render::encode_png(img, {{"sarfa-run", metadata}})
                                                                 : render::encode_ppm(img, metadata));
  }
  if (heatmap)
    render::write_file(*heatmap, render::heat_pgm(frame.width, frame.height, sal.upsampled, style, metadata));
  if (skipped) note(fmt::format("{} cell(s) skipped after agent failures", skipped));
  return 0;
}

int explain_grid(const RunConfig& c) {
  const grid::Rewards rewards{c.number("goal-reward"), c.number("pit-reward"), c.number("step-reward"),
                              c.number("discount")};
  const auto world = grid::GridWorld::parse(c.need_text("layout"), rewards);
  const auto action = grid::parse_action(c.need_text("action"));
  if (!action) throw InputError("--action must be up, down, left or right");
  const auto spec = scoring_spec(c);

  grid::GridworldOracle oracle(world);
  const auto cells = grid::compute_grid_saliency(world, *action, oracle, spec);

  auto doc = c.header("sarfa-explain-grid");
  doc["layout"] = world.layout();
  doc["action"] = std::string(grid::to_string(*action));
  doc["method"] = spec.label();
  doc["original"] = eval::profile_to_json(oracle.evaluate(world.layout()));
  auto arr = json::array();
  for (const auto& cell : cells) {
    auto j = breakdown_json(cell.breakdown);
    j["x"] = cell.perturbation.cell.x;
    j["y"] = cell.perturbation.cell.y;
    j["before"] = std::string(1, static_cast<char>(cell.perturbation.before));
    j["after"] = std::string(1, static_cast<char>(cell.perturbation.after));
    arr.push_back(std::move(j));
  }
  doc["cells"] = std::move(arr);
  emit(c.text("out"), json_text(doc));
  return 0;
}

std::vector<ScoringSpec> method_list(const RunConfig& c) {
  std::vector<ScoringSpec> specs;
  const auto text = c.need_text("methods");
  const double t = c.number("temperature");
  if (!(t > 0.0)) throw InputError("--temperature must be positive");
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto label = text.substr(start, end - start);
    const auto spec = parse_scoring_label(label, t);
    if (!spec) throw InputError("unknown method label '" + label + "'");
    specs.push_back(*spec);
    start = end + 1;
  }
  return specs;
}

std::vector<SaliencyDatasetEntry> dataset(const RunConfig& c) {
  const auto path = c.need_text("dataset");
  require_file(path, "dataset");
  auto entries = chess::load_dataset(path);
  if (entries.empty()) throw InputError("dataset " + path + " has no entries");
  return entries;
}

int eval_auc(const RunConfig& c) {
  const auto entries = dataset(c);
  const auto specs = method_list(c);
  const auto norm = normalization(c);
  auto pool = open_pool(chess_oracle(c), workers(c));
  const auto evals = evaluate(c, entries, pool, c.text("results"));

  auto doc = c.header("sarfa-auc");
  doc["n_puzzles"] = entries.size();
  doc["n_failed"] = count_failed(evals);
  doc["failures"] = failures_json(evals);
  auto results = json::array();
  std::vector<std::string> rows{"method,auc,n_puzzles,n_failed,n_pos,n_neg"}, roc_rows{"method,fpr,tpr"};
  for (const auto& spec : specs) {
    const auto rep = eval::roc(eval::score_evaluations(evals, spec), entries, norm);
    results.push_back(
        {{"method", spec.label()}, {"auc", rep.auc}, {"n_pos", rep.n_pos}, {"n_neg", rep.n_neg}, {"roc", roc_points(rep)}});
    rows.push_back(fmt::format("{},{},{},{},{},{}", spec.label(), rep.auc, entries.size(), count_failed(evals),
                               rep.n_pos, rep.n_neg));
    append_roc_rows(roc_rows, spec.label(), rep);
    note(fmt::format("{}: AUC {:.4f}", spec.label(), rep.auc));
  }
  doc["results"] = std::move(results);

  emit(c.text("out"), json_text(doc));
  if (const auto p = c.text("csv")) render::write_file(*p, csv_text(c.header("sarfa-auc"), rows));
  if (const auto p = c.text("roc-csv")) render::write_file(*p, csv_text(c.header("sarfa-roc"), roc_rows));
  return 0;
}

int eval_ablation(const RunConfig& c) {
  const auto entries = dataset(c);
  const double t = c.number("temperature");
  if (!(t > 0.0)) throw InputError("--temperature must be positive");
  const auto norm = normalization(c);
  auto pool = open_pool(chess_oracle(c), workers(c));
  const auto evals = evaluate(c, entries, pool, c.text("results"));
  const auto table = eval::ablation_from_evaluations(evals, entries, t, norm);

  auto doc = c.header("sarfa-ablation");
  doc["n_puzzles"] = entries.size();
  doc["n_failed"] = count_failed(evals);
  doc["failures"] = failures_json(evals);
  auto rows_json = json::array();
  std::vector<std::string> rows{"rank,method,auc,n_puzzles,n_skipped"}, roc_rows{"method,fpr,tpr"};
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table[i];
    rows_json.push_back({{"rank", i + 1},
                         {"method", r.spec.label()},
                         {"auc", r.auc},
                         {"n_puzzles", r.n_puzzles},
                         {"n_skipped", r.n_skipped},
                         {"roc", roc_points(r.roc)}});
    rows.push_back(fmt::format("{},{},{},{},{}", i + 1, r.spec.label(), r.auc, r.n_puzzles, r.n_skipped));
    append_roc_rows(roc_rows, r.spec.label(), r.roc);
    note(fmt::format("{:>2}. {:<22} AUC {:.4f}", i + 1, r.spec.label(), r.auc));
  }
  doc["rows"] = std::move(rows_json);

  emit(c.text("out"), json_text(doc));
  if (const auto p = c.text("csv")) render::write_file(*p, csv_text(c.header("sarfa-ablation"), rows));
  if (const auto p = c.text("roc-csv")) render::write_file(*p, csv_text(c.header("sarfa-roc"), roc_rows));
  return 0;
}

std::string with_suffix(const std::string& path, const std::string& tag) {
  const std::filesystem::path p(path);
  auto out = p.parent_path() / (p.stem().string() + "." + tag + p.extension().string());
  return out.string();
}

int eval_robustness(const RunConfig& c) {
  const auto seed = c.seed("seed");
  if (!seed) throw InputError("--seed is required for eval-robustness so runs can be reproduced");
  const auto entries = dataset(c);
  std::vector<eval::RobustnessMode> modes;
  const auto mode = c.need_text("mode");
  if (mode == "both") {
    modes = {eval::RobustnessMode::human_nonsalient, eval::RobustnessMode::sarfa_nonsalient};
  } else if (const auto m = eval::parse_robustness_mode(mode)) {
    modes = {*m};
  } else {
    throw InputError("--mode must be human_nonsalient, sarfa_nonsalient or both");
  }
  eval::RobustnessOptions opts;
  opts.sarfa_threshold = c.number("sarfa-threshold");
  opts.temperature = c.number("temperature");
  opts.normalization = normalization(c);
  const auto results = c.text("results");
  const auto perturbed_out = c.text("perturbed-out");

  auto pool = open_pool(chess_oracle(c), workers(c));
  const auto before = evaluate(c, entries, pool, results);

  auto doc = c.header("sarfa-robustness");
  doc["n_puzzles"] = entries.size();
  doc["n_failed"] = count_failed(before);
  doc["failures"] = failures_json(before);
  auto runs = json::array();
  std::vector<std::string> rows{"mode,seed,auc_before,auc_after,auc_change,n_perturbed,n_skipped"};
  for (const auto m : modes) {
    const std::string tag(eval::to_string(m));
    std::optional<eval::EvaluationStore> after_store;
    if (results) after_store.emplace(with_suffix(*results, tag), c.oracle_identity());
    opts.after_store = after_store ? &*after_store : nullptr;
    const auto r = eval::robustness_from(before, entries, pool, *seed, m, opts);

    auto removals = json::array();
    for (const auto& rm : r.removals)
      removals.push_back({{"index", rm.index}, {"square", rm.square ? json(*rm.square) : json(nullptr)}});
    runs.push_back({{"mode", tag},
                    {"seed", r.seed},
                    {"auc_before", r.auc_before},
                    {"auc_after", r.auc_after},
                    {"auc_change", r.auc_after - r.auc_before},
                    {"n_perturbed", r.n_perturbed},
                    {"n_skipped", r.n_skipped},
                    {"removals", std::move(removals)}});
    rows.push_back(fmt::format("{},{},{},{},{},{},{}", tag, r.seed, r.auc_before, r.auc_after,
                               r.auc_after - r.auc_before, r.n_perturbed, r.n_skipped));
    if (perturbed_out) {
      const auto path = modes.size() == 1 ? *perturbed_out : with_suffix(*perturbed_out, tag);
      chess::write_dataset(path, r.perturbed, c.header("sarfa-dataset"));
    }
    note(fmt::format("{}: AUC {:.4f} -> {:.4f} ({} perturbed, {} skipped)", tag, r.auc_before, r.auc_after,
                     r.n_perturbed, r.n_skipped));
  }
  doc["runs"] = std::move(runs);

  emit(c.text("out"), json_text(doc));
  if (const auto p = c.text("csv")) render::write_file(*p, csv_text(c.header("sarfa-robustness"), rows));
  return 0;
}

int dataset_build(const RunConfig& c) {
  const auto raw = c.need_text("raw-labels");
  require_file(raw, "raw label file");
  const auto entries = chess::load_raw_labels(raw);
  if (entries.empty()) throw InputError(raw + " has no entries");
  const auto header = c.header("sarfa-dataset");
  if (const auto out = c.text("out")) {
    chess::write_dataset(*out, entries, header);
  } else {
    std::string text = header.dump() + "\n";
    for (const auto& e : entries) text += chess::entry_to_json(e).dump() + "\n";
    emit(std::nullopt, text);
  }
  note(fmt::format("{} puzzle(s) written", entries.size()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency maps for black-box agents (specific and relevant feature attribution)", "sarfa"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;

  const std::vector<std::string> scoring = {"method", "combiner", "temperature"};
  const std::vector<std::string> style = {"colormap", "opacity"};

  declare(app, commands, "explain-chess", "Saliency of every piece for one move",
          with(with(with({"fen", "move", "out", "svg"}, scoring), style), kOracleKeys));
  declare(app, commands, "explain-frame", "Saliency grid for an image frame via an external agent",
          with(with({"pgm", "agent-cmd", "action", "sigma-blur", "sigma-mask", "stride", "out", "overlay", "heatmap",
                     "reply-timeout-ms", "handshake-timeout-ms", "workers"},
                    scoring),
               style));
  declare(app, commands, "explain-grid", "Saliency of gridworld cells for the action at the start cell",
          with({"layout", "action", "goal-reward", "pit-reward", "step-reward", "discount", "out"}, scoring));
  declare(app, commands, "eval-auc", "ROC/AUC of methods against expert labels",
          with({"dataset", "methods", "temperature", "normalization", "out", "csv", "roc-csv", "results"},
               kOracleKeys));
  declare(app, commands, "eval-ablation", "AUC of every combiner and baseline",
          with({"dataset", "temperature", "normalization", "out", "csv", "roc-csv", "results"}, kOracleKeys));
  declare(app, commands, "eval-robustness", "AUC before and after removing one irrelevant piece",
          with({"dataset", "seed", "mode", "sarfa-threshold", "temperature", "normalization", "out", "csv",
                "perturbed-out", "results"},
               kOracleKeys));
  declare(app, commands, "dataset-build", "Majority-vote dataset from three expert label sets",
          {"raw-labels", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::map<std::string, int (*)(const RunConfig&)> handlers = {
      {"explain-chess", explain_chess}, {"explain-frame", explain_frame}, {"explain-grid", explain_grid},
      {"eval-auc", eval_auc},           {"eval-ablation", eval_ablation}, {"eval-robustness", eval_robustness},
      {"dataset-build", dataset_build}};

  try {
    for (const auto& cmd : commands)
      if (cmd->app->parsed()) return handlers.at(cmd->name)(cmd->resolve());
  } catch (const InputError& e) {
    fmt::print(stderr, "sarfa: {}\n", e.what());
    return 2;
  } catch (const ContractViolation& e) {
    fmt::print(stderr, "sarfa: {}\n", e.what());
    return 2;
  } catch (const OracleError& e) {
    fmt::print(stderr, "sarfa: engine failure: {}\n", e.what());
    return 3;
  } catch (const IoError& e) {
    fmt::print(stderr, "sarfa: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "sarfa: {}\n", e.what());
    return 1;
  }
  return 2;
}
