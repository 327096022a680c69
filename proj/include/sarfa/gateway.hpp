#pragma once

// One configuration type for every agent kind, and a factory for sessions.

#include <memory>
#include <optional>
#include <string>

#include "sarfa/errors.hpp"
#include "sarfa/external_agent.hpp"
#include "sarfa/gridworld.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/uci.hpp"

namespace sarfa {

enum class OracleKind : std::uint8_t { uci, external, gridworld };

constexpr std::string_view to_string(OracleKind k) noexcept {
  switch (k) {
    case OracleKind::uci: return "uci";
    case OracleKind::external: return "external";
    case OracleKind::gridworld: return "gridworld";
  }
  return "?";
}

struct OracleConfig {
  OracleKind kind = OracleKind::uci;
  std::optional<std::string> executable_path;  // engine binary, or agent shell command
  uci::SearchLimit search_limit = uci::Depth{12};
  int multipv = 10;
  uci::ScoreMapping mapping;
  std::chrono::milliseconds handshake_timeout{10'000};
  std::chrono::milliseconds reply_timeout{300'000};
  grid::Rewards rewards;  // gridworld only
  double tolerance = 1e-12;

  void check() const {
    if (multipv < 1) throw InputError("multipv must be >= 1");
    if (const auto* d = std::get_if<uci::Depth>(&search_limit); d && d->plies < 1)
      throw InputError("depth must be >= 1");
    if (const auto* t = std::get_if<uci::MoveTime>(&search_limit); t && t->ms < 1)
      throw InputError("movetime must be >= 1 ms");
    if (!(mapping.q_scale > 0.0) || !(mapping.q_cap > 0.0) || !(mapping.mate_base > 0.0))
      throw InputError("q_scale, q_cap and mate_base must be positive");
    if (!(tolerance > 0.0)) throw InputError("tolerance must be positive");
  }
};

/// Opens a ready session. For uci the handshake has completed when this
/// returns; a missing executable raises SpawnError.
inline std::unique_ptr<Oracle> open_session(const OracleConfig& config) {
  config.check();
  switch (config.kind) {
    case OracleKind::gridworld:
      return std::make_unique<grid::GridworldOracle>(config.rewards, config.tolerance);
    case OracleKind::uci: {
      if (!config.executable_path || config.executable_path->empty())
        throw SpawnError("no engine configured (set --engine or SARFA_ENGINE)");
      uci::EngineOptions o;
      o.executable = *config.executable_path;
      o.limit = config.search_limit;
      o.multipv = config.multipv;
      o.mapping = config.mapping;
      o.handshake_timeout = config.handshake_timeout;
      o.search_timeout = config.reply_timeout;
      return std::make_unique<uci::UciOracle>(std::move(o));
    }
    case OracleKind::external: {
      if (!config.executable_path || config.executable_path->empty())
        throw SpawnError("no agent command configured");
      return std::make_unique<agent::ExternalOracle>(
          agent::AgentOptions{*config.executable_path, config.reply_timeout});
    }
  }
  throw ContractViolation("unknown oracle kind");
}

inline SessionPool open_pool(const OracleConfig& config, std::size_t workers) {
  return SessionPool::create(std::max<std::size_t>(1, workers), [&] { return open_session(config); });
}

}  // namespace sarfa
