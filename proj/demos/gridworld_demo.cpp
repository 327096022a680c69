// Solves a small gridworld, then prints the saliency of every interior cell
// for the optimal first move.

#include <fmt/format.h>

#include <string>
#include <vector>

#include "sarfa/gridworld.hpp"

using namespace sarfa;
using namespace sarfa::grid;

int main(int argc, char** argv) {
  const std::string layout = argc > 1 ? argv[1] : "#######/#S..#G#/#.#.#.#/#.....#/#P#...#/#######";
  const auto world = GridWorld::parse(layout, {10.0, -10.0, -0.1, 0.9});
  GridworldOracle oracle(world);

  const auto start = oracle.evaluate(world.layout());
  fmt::print("Q at start:");
  for (const auto& e : start.entries()) fmt::print("  {}={:.3f}", e.action, e.q);
  const auto best = *parse_action(start.best_action());
  fmt::print("\nexplaining '{}'\n\n", to_string(best));

  const auto cells = compute_grid_saliency(world, best, oracle);
  std::vector<std::string> rows;
  for (int y = 0; y < world.height(); ++y) {
    std::string row;
    for (int x = 0; x < world.width(); ++x) row += fmt::format(" {:>5}", std::string(1, static_cast<char>(world.at({x, y}))));
    rows.push_back(row);
  }
  if (world.start().y >= 0) rows[world.start().y].replace(6 * world.start().x + 5, 1, "S");
  for (const auto& c : cells) {
    const auto p = c.perturbation.cell;
    rows[p.y].replace(6 * p.x + 1, 5, fmt::format("{:5.3f}", c.breakdown.score));
  }
  for (const auto& r : rows) fmt::print("{}\n", r);

  const CellSaliency* top = nullptr;
  for (const auto& c : cells)
    if (!top || c.breakdown.score > top->breakdown.score) top = &c;
  if (top)
    fmt::print("\nmost salient cell: ({},{}) '{}' -> '{}'  dP={:.3f} K={:.3f} S={:.3f}\n", top->perturbation.cell.x,
               top->perturbation.cell.y, static_cast<char>(top->perturbation.before),
               static_cast<char>(top->perturbation.after), top->breakdown.delta_p, top->breakdown.k_sim,
               top->breakdown.score);
}
