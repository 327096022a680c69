#pragma once

// UCI chess-engine client. Q-values come from the engine's MultiPV scores:
// each reported principal variation gives the score of its first move from
// the side to move's point of view.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sarfa/errors.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/process.hpp"

namespace sarfa::uci {

struct Depth {
  int plies = 12;
};
struct MoveTime {
  int ms = 1000;
};
using SearchLimit = std::variant<Depth, MoveTime>;

inline std::string go_command(const SearchLimit& limit) {
  if (const auto* d = std::get_if<Depth>(&limit)) return "go depth " + std::to_string(d->plies);
  return "go movetime " + std::to_string(std::get<MoveTime>(limit).ms);
}

/// Maps engine scores onto Q-values in [-q_cap, q_cap].
///
/// Centipawns scale linearly (pawn units times q_scale) and saturate at the
/// mate floor; mates occupy the band above it, shallower mates higher.
struct ScoreMapping {
  double q_scale = 1.0;
  double q_cap = 20.0;
  double mate_base = 15.0;

  double mate_floor() const noexcept { return std::min(mate_base, 0.75 * q_cap); }
};

struct Centipawns {
  int value = 0;
};
struct MateIn {
  int moves = 1;  // never 0; negative when the side to move gets mated
};

struct EngineScore {
  std::string move;
  std::variant<Centipawns, MateIn> kind;
};

inline double score_to_q(const EngineScore& score, const ScoreMapping& m) {
  const double floor = m.mate_floor();
  if (const auto* cp = std::get_if<Centipawns>(&score.kind)) {
    const double q = cp->value / 100.0 * m.q_scale;
    return std::clamp(q, -floor, floor);
  }
  const int n = std::get<MateIn>(score.kind).moves;
  if (n == 0) throw ContractViolation("mate distance must be non-zero");
  const double q = floor + (m.q_cap - floor) / std::abs(n);
  return n > 0 ? q : -q;
}

/// One `info ... score ... pv ...` line.
struct InfoLine {
  int depth = 0;
  int multipv = 1;
  EngineScore score;
  bool bound = false;  // lowerbound/upperbound: not an exact score
};

/// Parses an info line that carries a score and a pv. Other info lines
/// (currmove, string, nodes only) give nullopt. Throws ProtocolError on a
/// score/pv line whose fields cannot be read.
inline std::optional<InfoLine> parse_info_line(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string tok;
  if (!(in >> tok) || tok != "info") return std::nullopt;

  InfoLine out;
  bool have_score = false;
  bool have_pv = false;
  auto read_int = [&](const char* what) {
    std::string v;
    int n = 0;
    if (!(in >> v)) throw ProtocolError(std::string("missing value after '") + what + "'");
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ProtocolError(std::string("bad integer after '") + what + "': " + v);
    return n;
  };

  while (in >> tok) {
    if (tok == "depth") {
      out.depth = read_int("depth");
    } else if (tok == "multipv") {
      out.multipv = read_int("multipv");
    } else if (tok == "score") {
      std::string kind;
      in >> kind;
      if (kind == "cp") {
        out.score.kind = Centipawns{read_int("cp")};
      } else if (kind == "mate") {
        out.score.kind = MateIn{read_int("mate")};
      } else {
        throw ProtocolError("unknown score kind '" + kind + "'");
      }
      have_score = true;
    } else if (tok == "lowerbound" || tok == "upperbound") {
      out.bound = true;
    } else if (tok == "pv") {
      if (!(in >> out.score.move)) throw ProtocolError("empty pv");
      have_pv = true;
      break;
    } else if (tok == "string") {
      return std::nullopt;
    }
  }
  if (!have_score || !have_pv) return std::nullopt;
  return out;
}

/// Collapses the info lines of one search into a score per move: the latest
/// exact line for each multipv slot, deduplicated by move (deeper wins).
inline std::vector<EngineScore> collect_scores(const std::vector<InfoLine>& lines) {
  std::map<int, InfoLine> by_slot;
  for (const auto& l : lines) {
    if (l.bound) continue;
    if (const auto* mate = std::get_if<MateIn>(&l.score.kind); mate && mate->moves == 0) continue;
    by_slot[l.multipv] = l;
  }
  std::vector<InfoLine> kept;
  for (const auto& [slot, l] : by_slot) {
    auto dup = std::find_if(kept.begin(), kept.end(),
                            [&](const InfoLine& k) { return k.score.move == l.score.move; });
    if (dup == kept.end()) kept.push_back(l);
    else if (l.depth > dup->depth) *dup = l;
  }
  std::vector<EngineScore> out;
  out.reserve(kept.size());
  for (auto& l : kept) out.push_back(std::move(l.score));
  return out;
}

struct EngineOptions {
  std::string executable;
  SearchLimit limit = Depth{12};
  int multipv = 10;
  ScoreMapping mapping;
  std::chrono::milliseconds handshake_timeout{10'000};
  std::chrono::milliseconds search_timeout{300'000};
};

/// A running engine process. evaluate() takes a FEN.
class UciOracle final : public Oracle {
 public:
  explicit UciOracle(EngineOptions options)
      : options_(std::move(options)), process_(std::vector<std::string>{options_.executable}) {
    if (options_.multipv < 1) throw ContractViolation("multipv must be >= 1");
    process_.write_line("uci");
    wait_for("uciok", options_.handshake_timeout);
    process_.write_line("setoption name Threads value 1");
    process_.write_line("setoption name MultiPV value " + std::to_string(options_.multipv));
    sync();
  }

  ~UciOracle() override {
    try {
      process_.write_line("quit");
    } catch (const Error&) {
    }
  }

  const std::string& engine_name() const noexcept { return engine_name_; }

  using Oracle::evaluate;

  QProfile evaluate(std::string_view fen, std::span<const std::string> must_include) override {
    process_.write_line("position fen " + std::string(fen));
    auto scores = search(go_command(options_.limit));
    if (scores.empty()) throw TerminalStateError("engine reports no legal moves for " + std::string(fen));

    for (const auto& move : must_include) {
      const bool present = std::any_of(scores.begin(), scores.end(),
                                       [&](const EngineScore& s) { return s.move == move; });
      if (present) continue;
      auto extra = search(go_command(options_.limit) + " searchmoves " + move);
      for (auto& s : extra)
        if (s.move == move) scores.push_back(std::move(s));
    }

    std::vector<QEntry> entries;
    entries.reserve(scores.size());
    for (const auto& s : scores) entries.push_back({s.move, score_to_q(s, options_.mapping)});
    return QProfile(std::string(fen), std::move(entries));
  }

 private:
  void sync() {
    process_.write_line("isready");
    wait_for("readyok", options_.handshake_timeout);
  }

  void wait_for(std::string_view token, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("engine did not answer '" + std::string(token) + "'");
      auto line = process_.read_line(left);
      if (!line) continue;
      if (line->rfind("id name ", 0) == 0) engine_name_ = line->substr(8);
      if (*line == token) return;
    }
  }

  std::vector<EngineScore> search(const std::string& go) {
    process_.write_line(go);
    std::vector<InfoLine> lines;
    const auto deadline = std::chrono::steady_clock::now() + options_.search_timeout;
    while (true) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("engine search timed out");
      std::optional<std::string> line;
      try {
        line = process_.read_line(left);
      } catch (const OracleError& e) {
        throw OracleError(std::string("engine died during search: ") + e.what());
      }
      if (!line) continue;
      if (line->rfind("bestmove", 0) == 0) break;
      if (auto info = parse_info_line(*line)) lines.push_back(std::move(*info));
    }
    return collect_scores(lines);
  }

  EngineOptions options_;
  ChildProcess process_;
  std::string engine_name_;
};

}  // namespace sarfa::uci
