#pragma once

// Deterministic gridworld with an exact value-iteration agent. Serves as a
// white-box Q oracle: states are layout strings, features are cells.
//
// Layout text: rows top to bottom separated by '/', one character per cell:
//   '#' wall   '.' floor   'S' start (floor)   'G' goal   'P' pit
// Entering a goal or pit collects its reward and ends the episode. Moving
// into a wall leaves the agent in place.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarfa/errors.hpp"
#include "sarfa/oracle.hpp"

namespace sarfa::grid {

enum class Cell : char { floor = '.', wall = '#', goal = 'G', pit = 'P' };

enum class Action : int { up, down, left, right };
inline constexpr std::array<Action, 4> kActions = {Action::up, Action::down, Action::left,
                                                   Action::right};

constexpr std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::up: return "up";
    case Action::down: return "down";
    case Action::left: return "left";
    case Action::right: return "right";
  }
  return "?";
}

inline std::optional<Action> parse_action(std::string_view s) noexcept {
  for (auto a : kActions)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

struct Rewards {
  double goal = 1.0;
  double pit = -1.0;
  double step = 0.0;
  double discount = 0.9;
};

struct Pos {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pos&, const Pos&) = default;
};

class GridWorld {
 public:
  /// Parses a layout. Throws InputError when the world breaks its invariants:
  /// rectangular, at least 2x2, walled border, exactly one start, at least
  /// one goal.
  static GridWorld parse(std::string_view layout, Rewards rewards = {}) {
    GridWorld w;
    w.rewards_ = rewards;
    if (!(rewards.discount > 0.0 && rewards.discount < 1.0))
      throw InputError("gridworld discount must lie in (0,1)");
    std::vector<std::string> rows;
    std::string cur;
    for (char c : layout) {
      if (c == '/' || c == '\n') {
        rows.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) rows.push_back(cur);
    if (rows.size() < 2) throw InputError("gridworld needs at least 2 rows");
    w.width_ = static_cast<int>(rows.front().size());
    w.height_ = static_cast<int>(rows.size());
    if (w.width_ < 2) throw InputError("gridworld needs at least 2 columns");

    bool have_start = false;
    bool have_goal = false;
    w.cells_.reserve(static_cast<std::size_t>(w.width_ * w.height_));
    for (int y = 0; y < w.height_; ++y) {
      if (static_cast<int>(rows[y].size()) != w.width_) throw InputError("gridworld rows differ in width");
      for (int x = 0; x < w.width_; ++x) {
        const char c = rows[y][x];
        switch (c) {
          case 'S':
            if (have_start) throw InputError("gridworld has more than one start");
            have_start = true;
            w.start_ = {x, y};
            w.cells_.push_back(Cell::floor);
            break;
          case '.': w.cells_.push_back(Cell::floor); break;
          case '#': w.cells_.push_back(Cell::wall); break;
          case 'G':
            have_goal = true;
            w.cells_.push_back(Cell::goal);
            break;
          case 'P': w.cells_.push_back(Cell::pit); break;
          default: throw InputError(std::string("gridworld has unknown cell '") + c + "'");
        }
        const bool border = x == 0 || y == 0 || x == w.width_ - 1 || y == w.height_ - 1;
        if (border && w.cells_.back() != Cell::wall) throw InputError("gridworld border must be wall");
      }
    }
    if (!have_start) throw InputError("gridworld has no start");
    if (!have_goal) throw InputError("gridworld has no goal");
    return w;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Pos start() const noexcept { return start_; }
  const Rewards& rewards() const noexcept { return rewards_; }
  Cell at(Pos p) const { return cells_[index(p)]; }
  std::size_t index(Pos p) const { return static_cast<std::size_t>(p.y * width_ + p.x); }

  bool terminal(Pos p) const { return at(p) == Cell::goal || at(p) == Cell::pit; }
  double terminal_reward(Pos p) const { return at(p) == Cell::goal ? rewards_.goal : rewards_.pit; }

  /// Cell reached by taking `a` from `p`; walls bounce.
  Pos step(Pos p, Action a) const {
    Pos n = p;
    switch (a) {
      case Action::up: --n.y; break;
      case Action::down: ++n.y; break;
      case Action::left: --n.x; break;
      case Action::right: ++n.x; break;
    }
    return at(n) == Cell::wall ? p : n;
  }

  std::string layout() const {
    std::string out;
    for (int y = 0; y < height_; ++y) {
      if (y) out.push_back('/');
      for (int x = 0; x < width_; ++x) {
        const Pos p{x, y};
        out.push_back(p == start_ ? 'S' : static_cast<char>(at(p)));
      }
    }
    return out;
  }

  GridWorld with_cell(Pos p, Cell c) const {
    GridWorld w = *this;
    w.cells_[index(p)] = c;
    return w;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  Pos start_;
  Rewards rewards_;
  std::vector<Cell> cells_;
};

/// Optimal Q for every non-wall, non-terminal cell. Terminal cells hold their
/// reward as V.
class QTable {
 public:
  QTable(const GridWorld& w) : world_(&w), q_(w.width() * w.height()), v_(w.width() * w.height()) {}

  std::array<double, 4>& q(Pos p) { return q_[world_->index(p)]; }
  const std::array<double, 4>& q(Pos p) const { return q_[world_->index(p)]; }
  double& v(Pos p) { return v_[world_->index(p)]; }
  double v(Pos p) const { return v_[world_->index(p)]; }

  /// Bellman backup of one (cell, action) pair under the current V.
  double backup(Pos p, Action a) const {
    const Pos n = world_->step(p, a);
    const auto& r = world_->rewards();
    return r.step + (world_->terminal(n) ? world_->terminal_reward(n) : r.discount * v(n));
  }

  /// Largest |Q - backup(Q)| over all non-terminal cells and actions.
  double bellman_residual() const {
    double worst = 0.0;
    for (int y = 0; y < world_->height(); ++y)
      for (int x = 0; x < world_->width(); ++x) {
        const Pos p{x, y};
        if (world_->at(p) != Cell::floor) continue;
        for (auto a : kActions)
          worst = std::max(worst, std::abs(q(p)[static_cast<int>(a)] - backup(p, a)));
      }
    return worst;
  }

 private:
  const GridWorld* world_;
  std::vector<std::array<double, 4>> q_;
  std::vector<double> v_;
};

/// Value iteration until the sup-norm change falls below `tolerance`.
/// The returned table refers to `world`, which must outlive it.
inline QTable solve_gridworld(const GridWorld& world, double tolerance = 1e-12) {
  if (!(tolerance > 0.0)) throw ContractViolation("tolerance must be positive");
  QTable t(world);
  for (int y = 0; y < world.height(); ++y)
    for (int x = 0; x < world.width(); ++x)
      if (world.terminal({x, y})) t.v({x, y}) = world.terminal_reward({x, y});

  while (true) {
    double delta = 0.0;
    for (int y = 0; y < world.height(); ++y)
      for (int x = 0; x < world.width(); ++x) {
        const Pos p{x, y};
        if (world.at(p) != Cell::floor) continue;
        double best = -INFINITY;
        for (auto a : kActions) {
          const double q = t.backup(p, a);
          t.q(p)[static_cast<int>(a)] = q;
          best = std::max(best, q);
        }
        delta = std::max(delta, std::abs(best - t.v(p)));
        t.v(p) = best;
      }
    if (delta < tolerance) break;
  }
  // Final sweep so Q is consistent with the converged V.
  for (int y = 0; y < world.height(); ++y)
    for (int x = 0; x < world.width(); ++x) {
      const Pos p{x, y};
      if (world.at(p) != Cell::floor) continue;
      for (auto a : kActions) t.q(p)[static_cast<int>(a)] = t.backup(p, a);
    }
  return t;
}

inline QProfile start_profile(const GridWorld& world, const QTable& table) {
  std::vector<QEntry> entries;
  for (auto a : kActions)
    entries.push_back({std::string(to_string(a)), table.q(world.start())[static_cast<int>(a)]});
  return QProfile(world.layout(), std::move(entries));
}

/// Exact agent: parses each queried layout, solves it and reports Q at the
/// start cell. Solutions are cached per layout.
class GridworldOracle final : public Oracle {
 public:
  explicit GridworldOracle(Rewards rewards = {}, double tolerance = 1e-12)
      : rewards_(rewards), tolerance_(tolerance) {}

  /// Session with `base` already solved.
  GridworldOracle(const GridWorld& base, double tolerance = 1e-12)
      : rewards_(base.rewards()), tolerance_(tolerance) {
    evaluate(base.layout());
  }

  using Oracle::evaluate;

  QProfile evaluate(std::string_view layout, std::span<const std::string>) override {
    std::lock_guard lock(mutex_);
    const std::string key(layout);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const auto world = GridWorld::parse(layout, rewards_);
    const auto table = solve_gridworld(world, tolerance_);
    auto profile = start_profile(world, table);
    cache_.emplace(key, profile);
    return profile;
  }

 private:
  Rewards rewards_;
  double tolerance_;
  std::mutex mutex_;
  std::map<std::string, QProfile> cache_;
};

struct CellPerturbation {
  Pos cell;
  Cell before;
  Cell after;
};

/// Cell blanking: interior floor becomes wall, interior wall becomes floor,
/// pits become floor. Start and goal cells are never touched.
inline std::vector<std::pair<CellPerturbation, GridWorld>> enumerate_cell_perturbations(
    const GridWorld& world) {
  std::vector<std::pair<CellPerturbation, GridWorld>> out;
  for (int y = 1; y + 1 < world.height(); ++y)
    for (int x = 1; x + 1 < world.width(); ++x) {
      const Pos p{x, y};
      if (p == world.start()) continue;
      const Cell c = world.at(p);
      Cell after;
      switch (c) {
        case Cell::floor: after = Cell::wall; break;
        case Cell::wall: after = Cell::floor; break;
        case Cell::pit: after = Cell::floor; break;
        case Cell::goal: continue;
      }
      out.push_back({{p, c, after}, world.with_cell(p, after)});
    }
  return out;
}

struct CellSaliency {
  CellPerturbation perturbation;
  ScoreBreakdown breakdown;
};

/// Scores every cell perturbation of `world` for the action taken at start.
inline std::vector<CellSaliency> compute_grid_saliency(const GridWorld& world, Action selected,
                                                       Oracle& oracle,
                                                       const ScoringSpec& spec = {}) {
  const auto original = oracle.evaluate(world.layout());
  std::vector<CellSaliency> out;
  for (auto& [pert, perturbed] : enumerate_cell_perturbations(world)) {
    const auto q = oracle.evaluate(perturbed.layout());
    auto b = score_feature(original, q, to_string(selected), spec);
    b.feature_id = std::to_string(pert.cell.x) + "," + std::to_string(pert.cell.y);
    out.push_back({pert, std::move(b)});
  }
  return out;
}

}  // namespace sarfa::grid
