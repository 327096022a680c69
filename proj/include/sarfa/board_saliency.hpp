#pragma once

// Saliency of every board square for one move: remove the piece, ask the
// agent again, score the change.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sarfa/chess.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/saliency.hpp"

namespace sarfa::chess {

struct PerturbedEvaluation {
  SquarePerturbation perturbation;
  std::string fen;
  bool selected_legal = false;
  std::optional<QProfile> q;  // empty when the oracle failed on this position
  std::string error;
};

/// Raw agent answers for a position and all of its piece removals. Scoring
/// methods are applied afterwards, so one evaluation serves every method.
struct BoardEvaluation {
  std::string fen;
  std::string selected;
  QProfile original;
  std::vector<PerturbedEvaluation> perturbed;
};

/// Queries the pool for the original position and every valid removal.
/// The original evaluation failing is fatal; a failing removal is recorded.
inline BoardEvaluation evaluate_board(const Position& pos, const std::string& selected,
                                      SessionPool& pool) {
  if (!pos.is_legal(selected))
    throw InputError("move " + selected + " is not legal in " + pos.fen());
  const std::vector<std::string> need{selected};
  std::optional<QProfile> original;
  {
    auto lease = pool.acquire();
    original = lease->evaluate(pos.fen(), need);
  }
  if (!original->contains(selected))
    throw OracleError("agent gave no value for the explained move " + selected);

  auto removals = enumerate_perturbations(pos);
  std::vector<PerturbedEvaluation> perturbed(removals.size());
  pool.parallel_for(removals.size(), [&](Oracle& oracle, std::size_t i) {
    auto& out = perturbed[i];
    out.perturbation = removals[i].perturbation;
    out.fen = removals[i].position.fen();
    out.selected_legal = removals[i].position.is_legal(selected);
    const std::vector<std::string> include =
        out.selected_legal ? need : std::vector<std::string>{};
    try {
      out.q = oracle.evaluate(out.fen, include);
    } catch (const OracleError& e) {
      out.error = e.what();
    } catch (const ContractViolation& e) {
      out.error = e.what();
    }
  });
  return {pos.fen(), selected, std::move(*original), std::move(perturbed)};
}

struct SquareScore {
  SquarePerturbation perturbation;
  ScoreBreakdown breakdown;
};

/// Square name -> score, for every perturbed square (a1..h8 order).
using BoardSaliency = std::map<std::string, SquareScore>;

inline BoardSaliency score_board(const BoardEvaluation& eval, const ScoringSpec& spec) {
  BoardSaliency out;
  for (const auto& p : eval.perturbed) {
    const auto name = square_name(p.perturbation.square);
    ScoreBreakdown b;
    if (p.q) {
      b = score_feature(eval.original, *p.q, eval.selected, spec);
    } else {
      b.status = ScoreStatus::skipped_invalid_perturbation;
      b.k_sim = 1.0;
    }
    b.feature_id = name;
    out.emplace(name, SquareScore{p.perturbation, std::move(b)});
  }
  return out;
}

inline BoardSaliency compute_board_saliency(const Position& pos, const std::string& selected,
                                            SessionPool& pool, const ScoringSpec& spec = {}) {
  return score_board(evaluate_board(pos, selected, pool), spec);
}

}  // namespace sarfa::chess
