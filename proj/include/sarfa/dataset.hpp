#pragma once

// Chess saliency dataset: puzzles with a correct move and the squares human
// experts marked as important for it. Stored as JSON Lines:
//
//   {"fen": "...", "best_move": "e2e4", "salient_squares": ["a4", "b6"],
//    "expert_labels": [["a4"], ["a4", "b6"], ["b6"]]}
//
// expert_labels is optional; when present salient_squares must equal its
// majority vote.

#include <nlohmann/json.hpp>

#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sarfa/chess.hpp"
#include "sarfa/errors.hpp"

namespace sarfa::chess {

using SquareSet = std::set<std::string>;

struct SaliencyDatasetEntry {
  std::string fen;
  std::string best_move;
  SquareSet salient_squares;
  std::optional<std::array<SquareSet, 3>> expert_labels;
};

/// Squares named by at least two of the three label sets.
inline SquareSet majority_vote(const std::array<SquareSet, 3>& labels) {
  SquareSet out;
  for (const auto& set : labels)
    for (const auto& sq : set) {
      int votes = 0;
      for (const auto& other : labels) votes += other.count(sq) ? 1 : 0;
      if (votes >= 2) out.insert(sq);
    }
  return out;
}

namespace detail {

inline SquareSet parse_square_set(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + " must be an array of square names");
  SquareSet out;
  for (const auto& s : j) {
    if (!s.is_string() || !parse_square(s.get<std::string>()))
      throw InputError(where + " contains an invalid square");
    out.insert(s.get<std::string>());
  }
  return out;
}

inline nlohmann::json square_set_json(const SquareSet& s) {
  return nlohmann::json(std::vector<std::string>(s.begin(), s.end()));
}

}  // namespace detail

inline std::array<SquareSet, 3> parse_expert_labels(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw InputError(where + ": expert_labels must hold exactly 3 label sets");
  return {detail::parse_square_set(j[0], where + ": expert_labels[0]"),
          detail::parse_square_set(j[1], where + ": expert_labels[1]"),
          detail::parse_square_set(j[2], where + ": expert_labels[2]")};
}

/// Validates one entry against its position. Throws InputError.
inline void validate_entry(const SaliencyDatasetEntry& e, const std::string& where) {
  Position pos = [&] {
    try {
      return parse_fen(e.fen);
    } catch (const InputError& err) {
      throw InputError(where + ": " + err.what());
    }
  }();
  if (!pos.is_legal(e.best_move))
    throw InputError(where + ": best_move " + e.best_move + " is not legal");
  for (const auto& sq : e.salient_squares)
    if (pos.at(*parse_square(sq)) == '.')
      throw InputError(where + ": salient square " + sq + " is empty");
  if (e.expert_labels && majority_vote(*e.expert_labels) != e.salient_squares)
    throw InputError(where + ": salient_squares differ from the expert majority vote");
}

inline SaliencyDatasetEntry entry_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": entry must be a JSON object");
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string())
      throw InputError(where + ": missing string field '" + key + "'");
    return j[key].get<std::string>();
  };
  SaliencyDatasetEntry e;
  e.fen = str("fen");
  e.best_move = str("best_move");
  if (!j.contains("salient_squares")) throw InputError(where + ": missing field 'salient_squares'");
  e.salient_squares = detail::parse_square_set(j["salient_squares"], where + ": salient_squares");
  if (j.contains("expert_labels") && !j["expert_labels"].is_null())
    e.expert_labels = parse_expert_labels(j["expert_labels"], where);
  validate_entry(e, where);
  return e;
}

/// A raw annotation: fen, best_move and expert_labels (three square lists).
/// salient_squares is derived by majority vote; a given one is ignored.
inline SaliencyDatasetEntry entry_from_raw_labels(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": entry must be a JSON object");
  if (!j.contains("expert_labels")) throw InputError(where + ": missing field 'expert_labels'");
  auto copy = j;
  copy["salient_squares"] = detail::square_set_json(majority_vote(parse_expert_labels(j["expert_labels"], where)));
  return entry_from_json(copy, where);
}

inline nlohmann::json entry_to_json(const SaliencyDatasetEntry& e) {
  nlohmann::json j;
  j["fen"] = e.fen;
  j["best_move"] = e.best_move;
  j["salient_squares"] = detail::square_set_json(e.salient_squares);
  if (e.expert_labels) {
    auto labels = nlohmann::json::array();
    for (const auto& s : *e.expert_labels) labels.push_back(detail::square_set_json(s));
    j["expert_labels"] = labels;
  }
  return j;
}

namespace detail {

template <class Fn>
std::vector<SaliencyDatasetEntry> load_lines(const std::string& path, Fn&& parse_entry) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<SaliencyDatasetEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw InputError(where + ": " + err.what());
    }
    if (out.empty() && j.is_object() && j.contains("schema") && !j.contains("fen")) continue;
    out.push_back(parse_entry(j, where));
  }
  return out;
}

}  // namespace detail

/// Reads a JSON Lines dataset; blank lines and a leading metadata line (an
/// object with "schema" but no "fen") are skipped. Errors name the line.
inline std::vector<SaliencyDatasetEntry> load_dataset(const std::string& path) {
  return detail::load_lines(path, entry_from_json);
}

/// Reads raw annotations (see entry_from_raw_labels), one per line.
inline std::vector<SaliencyDatasetEntry> load_raw_labels(const std::string& path) {
  return detail::load_lines(path, entry_from_raw_labels);
}

inline void write_dataset(const std::string& path, const std::vector<SaliencyDatasetEntry>& entries,
                          const nlohmann::json& header = nullptr) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path);
  if (!header.is_null()) out << header.dump() << '\n';
  for (const auto& e : entries) out << entry_to_json(e).dump() << '\n';
  if (!out) throw IoError("write failed for " + path);
}

/// Occupied non-king squares: the features that ROC analysis ranks.
inline SquareSet candidate_squares(const Position& pos) {
  SquareSet out;
  for (Square s = 0; s < 64; ++s) {
    const char p = pos.at(s);
    if (p != '.' && kind_of(p) != 'k') out.insert(square_name(s));
  }
  return out;
}

}  // namespace sarfa::chess
