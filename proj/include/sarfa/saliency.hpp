#pragma once

// Specific and relevant feature attribution over Q-value profiles.
//
// Everything here is a pure function of its arguments. Given the Q-values an
// agent assigns to its actions in an original state s and in a perturbed
// state s', the score of the perturbed feature combines
//
//   specificity  dp = P(s, a) - P(s', a)             P = softmax over Q
//   relevance    K  = 1 / (1 + KL(Prem(s') || Prem(s)))
//
// through a harmonic mean, where Prem is the softmax over every action other
// than the explained one. Scoring only ever looks at actions legal in both
// states.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sarfa/errors.hpp"

namespace sarfa {

using ActionId = std::string;

struct QEntry {
  ActionId action;
  double q = 0.0;

  friend bool operator==(const QEntry&, const QEntry&) = default;
};

/// Expected return per legal action at one state.
///
/// Invariants (checked on construction): non-empty, unique action ids, every
/// q finite. Entry order is preserved and is significant for output ordering.
class QProfile {
 public:
  QProfile(std::string state_id, std::vector<QEntry> entries)
      : state_id_(std::move(state_id)), entries_(std::move(entries)) {
    if (entries_.empty()) throw ContractViolation("QProfile must not be empty");
    std::unordered_set<std::string_view> seen;
    for (const auto& e : entries_) {
      if (!std::isfinite(e.q))
        throw ContractViolation("QProfile value for '" + e.action + "' is not finite");
      if (!seen.insert(e.action).second)
        throw ContractViolation("duplicate action '" + e.action + "' in QProfile");
    }
  }

  const std::string& state_id() const noexcept { return state_id_; }
  std::span<const QEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::optional<double> q(std::string_view action) const noexcept {
    for (const auto& e : entries_)
      if (e.action == action) return e.q;
    return std::nullopt;
  }
  bool contains(std::string_view action) const noexcept { return q(action).has_value(); }

  double max_q() const noexcept {
    double m = entries_.front().q;
    for (const auto& e : entries_) m = std::max(m, e.q);
    return m;
  }

  /// Action with the highest Q; first one wins ties.
  const ActionId& best_action() const noexcept {
    const QEntry* best = &entries_.front();
    for (const auto& e : entries_)
      if (e.q > best->q) best = &e;
    return best->action;
  }

  friend bool operator==(const QProfile&, const QProfile&) = default;

 private:
  std::string state_id_;
  std::vector<QEntry> entries_;
};

struct ActionProb {
  ActionId action;
  double p = 0.0;
};

/// Strictly positive probabilities summing to one.
class ActionDistribution {
 public:
  explicit ActionDistribution(std::vector<ActionProb> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ContractViolation("ActionDistribution must not be empty");
    double total = 0.0;
    for (const auto& ap : probs_) {
      if (!(ap.p > 0.0) || ap.p > 1.0)
        throw ContractViolation("ActionDistribution probability out of (0,1]");
      total += ap.p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw ContractViolation("ActionDistribution does not sum to 1");
  }

  std::span<const ActionProb> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }

  std::optional<double> p(std::string_view action) const noexcept {
    for (const auto& ap : probs_)
      if (ap.action == action) return ap.p;
    return std::nullopt;
  }

 private:
  std::vector<ActionProb> probs_;
};

struct PolicyValueProfile {
  ActionDistribution policy;
  double value = 0.0;
};

enum class ScoreStatus : std::uint8_t {
  scored,
  skipped_no_overlap,
  skipped_invalid_perturbation,
  action_removed,
  degenerate_rem,
};

constexpr std::string_view to_string(ScoreStatus s) noexcept {
  switch (s) {
    case ScoreStatus::scored: return "scored";
    case ScoreStatus::skipped_no_overlap: return "skipped_no_overlap";
    case ScoreStatus::skipped_invalid_perturbation: return "skipped_invalid_perturbation";
    case ScoreStatus::action_removed: return "action_removed";
    case ScoreStatus::degenerate_rem: return "degenerate_rem";
  }
  return "unknown";
}

/// True for statuses that carry a meaningful score.
constexpr bool has_score(ScoreStatus s) noexcept {
  return s == ScoreStatus::scored || s == ScoreStatus::action_removed ||
         s == ScoreStatus::degenerate_rem;
}

/// Per-feature saliency with its diagnostics.
///
/// For the SARFA method `score` lies in [0,1]. Baseline methods store their
/// raw value in `score` (Iyer's difference may be negative) while the
/// dp/kl/k_sim fields still describe the SARFA decomposition.
struct ScoreBreakdown {
  std::string feature_id;
  double delta_p = 0.0;
  double kl = 0.0;
  double k_sim = 1.0;
  double score = 0.0;
  ScoreStatus status = ScoreStatus::scored;
};

struct CommonActions {
  QProfile orig;
  QProfile pert;
  bool selected_removed = false;
};

/// Restricts both profiles to the actions they share, keeping q_orig's order.
/// Throws NoOverlapError when nothing is shared.
inline CommonActions restrict_to_common_actions(const QProfile& q_orig, const QProfile& q_pert,
                                                std::string_view selected) {
  std::vector<QEntry> orig;
  std::vector<QEntry> pert;
  for (const auto& e : q_orig.entries()) {
    if (auto q = q_pert.q(e.action)) {
      orig.push_back(e);
      pert.push_back({e.action, *q});
    }
  }
  if (orig.empty()) throw NoOverlapError();
  return {QProfile(q_orig.state_id(), std::move(orig)),
          QProfile(q_pert.state_id(), std::move(pert)), !q_pert.contains(selected)};
}

namespace detail {

// exp(q - shift) summed over entries, optionally skipping one action.
inline double exp_sum(std::span<const QEntry> entries, double shift,
                      std::string_view skip = {}) {
  double sum = 0.0;
  for (const auto& e : entries)
    if (skip.empty() || e.action != skip) sum += std::exp(e.q - shift);
  return sum;
}

inline double max_excluding(std::span<const QEntry> entries, std::string_view skip) {
  double m = -INFINITY;
  for (const auto& e : entries)
    if (e.action != skip) m = std::max(m, e.q);
  return m;
}

// Softmax over every entry except `skip` (which may be absent). Requires at
// least one remaining entry.
inline ActionDistribution softmax_excluding(std::span<const QEntry> entries,
                                            std::string_view skip) {
  const double shift = max_excluding(entries, skip);
  const double denom = exp_sum(entries, shift, skip);
  std::vector<ActionProb> probs;
  probs.reserve(entries.size());
  for (const auto& e : entries)
    if (e.action != skip) probs.push_back({e.action, std::exp(e.q - shift) / denom});
  return ActionDistribution(std::move(probs));
}

}  // namespace detail

/// exp(Q(s,selected)) / sum_a exp(Q(s,a)), evaluated with max-subtraction.
inline double softmax_selected(const QProfile& q, std::string_view selected) {
  const auto qs = q.q(selected);
  if (!qs) throw ContractViolation("selected action '" + std::string(selected) + "' not in profile");
  const double shift = q.max_q();
  return std::exp(*qs - shift) / detail::exp_sum(q.entries(), shift);
}

/// Softmax over every action except the selected one.
inline ActionDistribution rem_distribution(const QProfile& q, std::string_view selected) {
  if (!q.contains(selected))
    throw ContractViolation("selected action '" + std::string(selected) + "' not in profile");
  if (q.size() < 2) throw DegenerateRemError();
  return detail::softmax_excluding(q.entries(), selected);
}

/// KL(p_pert || p_orig) in nats. Both distributions must cover the same actions.
inline double kl_divergence(const ActionDistribution& p_pert, const ActionDistribution& p_orig) {
  if (p_pert.size() != p_orig.size())
    throw ContractViolation("KL divergence over mismatched supports");
  double kl = 0.0;
  for (const auto& ap : p_pert.probs()) {
    const auto po = p_orig.p(ap.action);
    if (!po) throw ContractViolation("KL divergence over mismatched supports");
    kl += ap.p * std::log(ap.p / *po);
  }
  // Rounding can push an exact zero slightly negative.
  return std::max(kl, 0.0);
}

/// K = 1 / (1 + kl).
inline double similarity(double kl) {
  if (!(kl >= 0.0)) throw ContractViolation("similarity requires kl >= 0");
  return 1.0 / (1.0 + kl);
}

enum class Combiner : std::uint8_t {
  harmonic,
  arithmetic_mean,
  geometric_mean,
  minimum,
  dp_only,
  k_only,
};

constexpr std::string_view to_string(Combiner c) noexcept {
  switch (c) {
    case Combiner::harmonic: return "harmonic";
    case Combiner::arithmetic_mean: return "arithmetic_mean";
    case Combiner::geometric_mean: return "geometric_mean";
    case Combiner::minimum: return "minimum";
    case Combiner::dp_only: return "dp_only";
    case Combiner::k_only: return "k_only";
  }
  return "unknown";
}

inline std::optional<Combiner> parse_combiner(std::string_view s) noexcept {
  for (auto c : {Combiner::harmonic, Combiner::arithmetic_mean, Combiner::geometric_mean,
                 Combiner::minimum, Combiner::dp_only, Combiner::k_only})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

/// Combines specificity and relevance. A non-positive delta_p yields 0 for
/// every mode except k_only, which ignores delta_p entirely.
inline double combine(double delta_p, double k_sim, Combiner mode) noexcept {
  if (mode == Combiner::k_only) return k_sim;
  if (delta_p <= 0.0) return 0.0;
  switch (mode) {
    case Combiner::harmonic: return 2.0 * delta_p * k_sim / (delta_p + k_sim);
    case Combiner::arithmetic_mean: return 0.5 * (delta_p + k_sim);
    case Combiner::geometric_mean: return std::sqrt(delta_p * k_sim);
    case Combiner::minimum: return std::min(delta_p, k_sim);
    case Combiner::dp_only: return delta_p;
    case Combiner::k_only: return k_sim;
  }
  return 0.0;
}

/// Full SARFA decomposition of one perturbation, combined with `mode`.
///
/// Special cases:
///  - no common actions: status skipped_no_overlap, score 0.
///  - only the selected action is common: status degenerate_rem, K = 1.
///  - selected action missing from q_pert: P(s', a) = 0, status action_removed.
inline ScoreBreakdown sarfa_score(const QProfile& q_orig, const QProfile& q_pert,
                                  std::string_view selected, Combiner mode = Combiner::harmonic) {
  if (!q_orig.contains(selected))
    throw ContractViolation("selected action '" + std::string(selected) +
                            "' not in original profile");
  ScoreBreakdown out;
  out.feature_id = q_pert.state_id();

  std::optional<CommonActions> common;
  try {
    common.emplace(restrict_to_common_actions(q_orig, q_pert, selected));
  } catch (const NoOverlapError&) {
    out.status = ScoreStatus::skipped_no_overlap;
    return out;
  }

  double p_orig = 0.0;
  double p_pert = 0.0;
  if (common->selected_removed) {
    // Selected action re-attached to the common set for the original side.
    std::vector<QEntry> with_selected(common->orig.entries().begin(),
                                      common->orig.entries().end());
    with_selected.push_back({std::string(selected), *q_orig.q(selected)});
    p_orig = softmax_selected(QProfile(q_orig.state_id(), std::move(with_selected)), selected);
    out.status = ScoreStatus::action_removed;
  } else {
    p_orig = softmax_selected(common->orig, selected);
    p_pert = softmax_selected(common->pert, selected);
  }
  out.delta_p = p_orig - p_pert;

  const bool has_others =
      common->selected_removed ? common->orig.size() >= 1 : common->orig.size() >= 2;
  if (has_others) {
    const auto rem_orig = detail::softmax_excluding(common->orig.entries(), selected);
    const auto rem_pert = detail::softmax_excluding(common->pert.entries(), selected);
    out.kl = kl_divergence(rem_pert, rem_orig);
  } else {
    out.status = ScoreStatus::degenerate_rem;
    out.kl = 0.0;
  }
  out.k_sim = similarity(out.kl);
  out.score = combine(out.delta_p, out.k_sim, mode);
  return out;
}

/// Q(s, a) - Q(s', a); sign preserved.
inline double baseline_iyer(const QProfile& q_orig, const QProfile& q_pert,
                            std::string_view selected) {
  const auto a = q_orig.q(selected);
  const auto b = q_pert.q(selected);
  if (!a || !b) throw ContractViolation("selected action missing for Q-difference baseline");
  return *a - *b;
}

enum class GreydanusMode : std::uint8_t { policy, value };

/// policy: 0.5 * ||pi_s - pi_s'||^2, value: 0.5 * (V(s) - V(s'))^2.
inline double baseline_greydanus(const PolicyValueProfile& pv_orig,
                                 const PolicyValueProfile& pv_pert, GreydanusMode which) {
  if (which == GreydanusMode::value) {
    const double d = pv_orig.value - pv_pert.value;
    return 0.5 * d * d;
  }
  if (pv_orig.policy.size() != pv_pert.policy.size())
    throw ContractViolation("policy supports differ");
  double sq = 0.0;
  for (const auto& ap : pv_orig.policy.probs()) {
    const auto other = pv_pert.policy.p(ap.action);
    if (!other) throw ContractViolation("policy supports differ");
    const double d = ap.p - *other;
    sq += d * d;
  }
  return 0.5 * sq;
}

/// softmax(q / temperature) and max q.
inline PolicyValueProfile derive_policy_value(const QProfile& q, double temperature = 1.0) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ContractViolation("temperature must be positive");
  const double shift = q.max_q();
  double denom = 0.0;
  for (const auto& e : q.entries()) denom += std::exp((e.q - shift) / temperature);
  std::vector<ActionProb> probs;
  probs.reserve(q.size());
  for (const auto& e : q.entries())
    probs.push_back({e.action, std::exp((e.q - shift) / temperature) / denom});
  return {ActionDistribution(std::move(probs)), shift};
}

// ---------------------------------------------------------------------------
// Method dispatch

enum class Method : std::uint8_t { sarfa, iyer, greydanus_policy, greydanus_value };

constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::sarfa: return "sarfa";
    case Method::iyer: return "iyer";
    case Method::greydanus_policy: return "greydanus_policy";
    case Method::greydanus_value: return "greydanus_value";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) noexcept {
  for (auto m : {Method::sarfa, Method::iyer, Method::greydanus_policy, Method::greydanus_value})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct ScoringSpec {
  Method method = Method::sarfa;
  Combiner combiner = Combiner::harmonic;
  double temperature = 1.0;

  /// "sarfa" for the default harmonic combiner, "sarfa:<combiner>" otherwise,
  /// the method name for baselines.
  std::string label() const {
    if (method != Method::sarfa) return std::string(to_string(method));
    if (combiner == Combiner::harmonic) return "sarfa";
    return "sarfa:" + std::string(to_string(combiner));
  }
};

/// Inverse of ScoringSpec::label().
inline std::optional<ScoringSpec> parse_scoring_label(std::string_view label, double temperature = 1.0) {
  ScoringSpec spec;
  spec.temperature = temperature;
  if (label.starts_with("sarfa:")) {
    const auto c = parse_combiner(label.substr(6));
    if (!c) return std::nullopt;
    spec.combiner = *c;
    return spec;
  }
  const auto m = parse_method(label);
  if (!m) return std::nullopt;
  spec.method = *m;
  return spec;
}

/// Scores one perturbation with the requested method. The SARFA diagnostics
/// are always filled in; baselines overwrite `score` with their raw value.
inline ScoreBreakdown score_feature(const QProfile& q_orig, const QProfile& q_pert,
                                    std::string_view selected, const ScoringSpec& spec) {
  auto out = sarfa_score(q_orig, q_pert, selected, spec.combiner);
  if (spec.method == Method::sarfa || !has_score(out.status)) return out;

  if (spec.method == Method::iyer) {
    if (out.status == ScoreStatus::action_removed) {
      out.score = 0.0;
      return out;
    }
    out.score = baseline_iyer(q_orig, q_pert, selected);
    return out;
  }

  const auto common = restrict_to_common_actions(q_orig, q_pert, selected);
  auto pv_orig = derive_policy_value(common.orig, spec.temperature);
  auto pv_pert = derive_policy_value(common.pert, spec.temperature);
  pv_orig.value = q_orig.max_q();
  pv_pert.value = q_pert.max_q();
  out.score = baseline_greydanus(pv_orig, pv_pert,
                                 spec.method == Method::greydanus_policy ? GreydanusMode::policy
                                                                         : GreydanusMode::value);
  return out;
}

}  // namespace sarfa
