// Deterministic UCI engine for tests. Scores each root move by a two-ply
// material look-ahead plus a small centralisation term, and answers MultiPV
// and searchmoves like a real engine.
//
// FAKE_UCI_MODE selects failure behaviour:
//   crash       exit on the first `go`
//   crash_after exit on go number FAKE_UCI_N
//   garbage     malformed score on every info line
//   mute        never answer `uci`

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sarfa/chess.hpp"

using namespace sarfa::chess;

namespace {

int value(char p) {
  switch (kind_of(p)) {
    case 'p': return 100;
    case 'n': return 300;
    case 'b': return 310;
    case 'r': return 500;
    case 'q': return 900;
    default: return 0;
  }
}

int material(const Position& pos, Color side) {
  int total = 0;
  for (Square s = 0; s < 64; ++s) {
    const char p = pos.at(s);
    if (p == '.') continue;
    total += color_of(p) == side ? value(p) : -value(p);
  }
  return total;
}

struct Scored {
  std::string move;
  bool mate = false;
  int cp = 0;
};

Scored score_move(const Position& pos, const Move& m) {
  const Color us = pos.side_to_move();
  const Position next = pos.play(m);
  const auto replies = next.legal_moves();
  if (replies.empty()) {
    if (next.in_check(next.side_to_move())) return {m.uci(), true, 1};
    return {m.uci(), false, 0};
  }
  int worst = material(next, us);
  for (const auto& r : replies) worst = std::min(worst, material(next.play(r), us));
  const int f = file_of(m.to), rk = rank_of(m.to);
  const int centre = 7 - (std::abs(2 * f - 7) + std::abs(2 * rk - 7)) / 2;
  return {m.uci(), false, worst + centre};
}

bool better(const Scored& a, const Scored& b) {
  if (a.mate != b.mate) return a.mate;
  if (a.cp != b.cp) return a.cp > b.cp;
  return a.move < b.move;
}

}  // namespace

int main() {
  const char* mode_env = std::getenv("FAKE_UCI_MODE");
  const std::string mode = mode_env ? mode_env : "";
  const int crash_at = std::getenv("FAKE_UCI_N") ? std::atoi(std::getenv("FAKE_UCI_N")) : 1;
  std::ios::sync_with_stdio(false);

  Position pos = start_position();
  int multipv = 1;
  int gos = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream in(line);
    std::string cmd;
    in >> cmd;
    if (cmd == "uci") {
      if (mode == "mute") continue;
      std::cout << "id name FakeUCI 1.0\nid author tests\n"
                << "option name MultiPV type spin default 1 min 1 max 500\n"
                << "option name Threads type spin default 1 min 1 max 1\nuciok" << std::endl;
    } else if (cmd == "isready") {
      std::cout << "readyok" << std::endl;
    } else if (cmd == "setoption") {
      std::string tok, name, val;
      in >> tok >> name >> tok >> val;
      if (name == "MultiPV") multipv = std::max(1, std::atoi(val.c_str()));
    } else if (cmd == "position") {
      std::string kind;
      in >> kind;
      std::string fen;
      std::string tok;
      if (kind == "startpos") {
        fen = Position::kStartFen;
        in >> tok;
      } else {
        while (in >> tok && tok != "moves") fen += (fen.empty() ? "" : " ") + tok;
      }
      try {
        pos = parse_fen(fen);
        if (tok == "moves")
          while (in >> tok) {
            auto m = pos.find_legal(tok);
            if (!m) break;
            pos = pos.play(*m);
          }
      } catch (const std::exception& e) {
        std::cout << "info string bad position: " << e.what() << std::endl;
      }
    } else if (cmd == "go") {
      ++gos;
      if (mode == "crash" || (mode == "crash_after" && gos >= crash_at)) return 1;
      int depth = 1;
      std::vector<std::string> only;
      std::string tok;
      while (in >> tok) {
        if (tok == "depth") in >> depth;
        else if (tok == "movetime") in >> tok;
        else if (tok == "searchmoves")
          while (in >> tok) only.push_back(tok);
      }
      std::vector<Scored> scored;
      for (const auto& m : pos.legal_moves()) {
        if (!only.empty() && std::find(only.begin(), only.end(), m.uci()) == only.end()) continue;
        scored.push_back(score_move(pos, m));
      }
      std::sort(scored.begin(), scored.end(), better);
      if (scored.empty()) {
        std::cout << "info depth 0 score " << (pos.in_check(pos.side_to_move()) ? "mate 0" : "cp 0") << std::endl;
        std::cout << "bestmove (none)" << std::endl;
        continue;
      }
      const int n = std::min<int>(multipv, static_cast<int>(scored.size()));
      // A shallow iteration first, as real engines report.
      for (int i = 0; i < n; ++i)
        std::cout << "info depth 1 seldepth 1 multipv " << i + 1 << " score cp 0 nodes 1 pv "
                  << scored[static_cast<std::size_t>(n - 1 - i)].move << std::endl;
      for (int i = 0; i < n; ++i) {
        const auto& s = scored[static_cast<std::size_t>(i)];
        std::cout << "info depth " << depth << " seldepth " << depth << " multipv " << i + 1 << " score ";
        if (mode == "garbage") std::cout << "cp x12";
        else if (s.mate) std::cout << "mate " << s.cp;
        else std::cout << "cp " << s.cp;
        std::cout << " nodes 42 nps 1000 pv " << s.move << std::endl;
      }
      std::cout << "bestmove " << scored.front().move << std::endl;
    } else if (cmd == "quit") {
      return 0;
    }
  }
  return 0;
}
