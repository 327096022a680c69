// Explains a move with a UCI engine and writes the heatmap as SVG.
//
//   chess_demo ENGINE [FEN [MOVE [OUT.svg]]]

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "sarfa/board_saliency.hpp"
#include "sarfa/gateway.hpp"
#include "sarfa/render.hpp"

using namespace sarfa;

int main(int argc, char** argv) {
  const char* env = std::getenv("SARFA_ENGINE");
  const std::string engine = argc > 1 ? argv[1] : env ? env : "";
  if (engine.empty()) {
    fmt::print(stderr, "usage: {} ENGINE [FEN [MOVE [OUT.svg]]]  (or set SARFA_ENGINE)\n", argv[0]);
    return 2;
  }
  auto arg = [&](int i) { return argc > i ? std::string(argv[i]) : std::string(); };
  std::string fen = arg(2);
  if (fen.empty()) fen = "r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3";
  std::string out = arg(4);
  if (out.empty()) out = "saliency.svg";

  try {
    const auto pos = chess::parse_fen(fen);
    OracleConfig config;
    config.executable_path = engine;
    config.search_limit = uci::Depth{10};
    auto pool = open_pool(config, std::clamp(std::thread::hardware_concurrency(), 1u, 4u));

    std::string move = arg(3);
    if (move.empty()) move = pool.acquire()->evaluate(pos.fen()).best_action();
    const auto saliency = chess::compute_board_saliency(pos, move, pool);

    std::vector<std::pair<double, std::string>> ranked;
    std::map<std::string, double> scores;
    for (const auto& [sq, s] : saliency) {
      ranked.emplace_back(s.breakdown.score, sq);
      scores[sq] = s.breakdown.score;
    }
    std::sort(ranked.rbegin(), ranked.rend());
    fmt::print("{}\nmove {}\n", pos.fen(), move);
    for (std::size_t i = 0; i < std::min<std::size_t>(8, ranked.size()); ++i)
      fmt::print("  {} {} {:.3f}\n", ranked[i].second, pos.at(*chess::parse_square(ranked[i].second)), ranked[i].first);
    render::write_file(out, render::chess_svg(pos, scores));
    fmt::print("wrote {}\n", out);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
