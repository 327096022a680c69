#pragma once

// Line protocol for agents living in another process.
//
//   request   EVAL <base64 state bytes>
//   reply     QVALUES <action>:<q>( <action>:<q>)*
//   failure   ERR <message>
//
// Messages are single UTF-8 lines terminated by '\n'. Action tokens contain
// no whitespace; the last ':' in a pair separates the value.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "sarfa/base64.hpp"
#include "sarfa/errors.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/process.hpp"

namespace sarfa::agent {

inline std::string format_eval_request(std::string_view state_bytes) {
  return "EVAL " + base64::encode(state_bytes);
}

/// Decodes an EVAL line back into the state bytes. Throws ProtocolError.
inline std::string parse_eval_request(std::string_view line) {
  constexpr std::string_view kPrefix = "EVAL ";
  if (line.substr(0, kPrefix.size()) != kPrefix) {
    if (line == "EVAL") return {};
    throw ProtocolError("expected EVAL request");
  }
  try {
    return base64::decode(line.substr(kPrefix.size()));
  } catch (const InputError& e) {
    throw ProtocolError(std::string("EVAL payload: ") + e.what());
  }
}

/// Shortest text that parses back to the same double.
inline std::string format_q(double q) { return fmt::format("{}", q); }

inline std::string format_qvalues_reply(const QProfile& q) {
  std::string out = "QVALUES";
  for (const auto& e : q.entries()) {
    out += ' ';
    out += e.action;
    out += ':';
    out += format_q(e.q);
  }
  return out;
}

inline std::string format_error_reply(std::string_view message) {
  std::string out = "ERR ";
  for (char c : message) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  return out;
}

struct ErrorReply {
  std::string message;
};

using Reply = std::variant<QProfile, ErrorReply>;

/// Parses a QVALUES or ERR line. Throws ProtocolError for anything malformed,
/// including an empty action list and duplicate actions.
inline Reply parse_reply(std::string_view line, std::string state_id = {}) {
  if (line.substr(0, 4) == "ERR " || line == "ERR")
    return ErrorReply{std::string(line.size() > 4 ? line.substr(4) : std::string_view{})};
  std::istringstream in{std::string(line)};
  std::string tok;
  if (!(in >> tok) || tok != "QVALUES") throw ProtocolError("malformed reply: " + std::string(line));

  std::vector<QEntry> entries;
  std::unordered_set<std::string> seen;
  while (in >> tok) {
    const auto colon = tok.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
      throw ProtocolError("malformed action/value pair '" + tok + "'");
    std::string action = tok.substr(0, colon);
    const std::string value = tok.substr(colon + 1);
    std::size_t used = 0;
    double q = 0.0;
    try {
      q = std::stod(value, &used);
    } catch (const std::exception&) {
      throw ProtocolError("malformed Q value '" + value + "'");
    }
    if (used != value.size() || !std::isfinite(q))
      throw ProtocolError("malformed Q value '" + value + "'");
    if (!seen.insert(action).second) throw ProtocolError("duplicate action '" + action + "'");
    entries.push_back({std::move(action), q});
  }
  if (entries.empty()) throw ProtocolError("QVALUES reply lists no actions");
  return QProfile(std::move(state_id), std::move(entries));
}

struct AgentOptions {
  std::string command;  // run through /bin/sh -c
  std::chrono::milliseconds reply_timeout{60'000};
};

/// Spawns the agent command once and queries it per state.
class ExternalOracle final : public Oracle {
 public:
  explicit ExternalOracle(AgentOptions options)
      : options_(std::move(options)),
        process_(std::vector<std::string>{"/bin/sh", "-c", options_.command}) {}

  using Oracle::evaluate;

  QProfile evaluate(std::string_view state, std::span<const std::string>) override {
    process_.write_line(format_eval_request(state));
    std::optional<std::string> line;
    try {
      line = process_.read_line(options_.reply_timeout);
    } catch (const OracleError& e) {
      throw OracleError(std::string("agent stopped responding: ") + e.what());
    }
    if (!line) throw TimeoutError("agent reply timed out");
    auto reply = parse_reply(*line, std::to_string(++queries_));
    if (auto* err = std::get_if<ErrorReply>(&reply)) throw OracleError("agent error: " + err->message);
    return std::get<QProfile>(std::move(reply));
  }

 private:
  AgentOptions options_;
  ChildProcess process_;
  std::size_t queries_ = 0;
};

}  // namespace sarfa::agent
