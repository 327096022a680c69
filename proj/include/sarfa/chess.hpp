#pragma once

// Minimal standard-chess model: FEN in/out, legal move generation, and the
// piece-removal perturbation used to probe board features.
//
// Squares are indexed 0..63 with a1 = 0, h1 = 7, a8 = 56. Pieces use FEN
// letters (uppercase white), empty squares hold '.'.

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sarfa/errors.hpp"

namespace sarfa::chess {

enum class Color : std::uint8_t { white, black };

constexpr Color opposite(Color c) noexcept { return c == Color::white ? Color::black : Color::white; }

using Square = int;

constexpr int file_of(Square s) noexcept { return s & 7; }
constexpr int rank_of(Square s) noexcept { return s >> 3; }
constexpr Square make_square(int file, int rank) noexcept { return rank * 8 + file; }

inline std::string square_name(Square s) {
  return {static_cast<char>('a' + file_of(s)), static_cast<char>('1' + rank_of(s))};
}

inline std::optional<Square> parse_square(std::string_view name) noexcept {
  if (name.size() != 2) return std::nullopt;
  const int f = name[0] - 'a';
  const int r = name[1] - '1';
  if (f < 0 || f > 7 || r < 0 || r > 7) return std::nullopt;
  return make_square(f, r);
}

constexpr bool is_white_piece(char p) noexcept { return p >= 'A' && p <= 'Z'; }
constexpr Color color_of(char p) noexcept { return is_white_piece(p) ? Color::white : Color::black; }
constexpr char kind_of(char p) noexcept { return is_white_piece(p) ? static_cast<char>(p - 'A' + 'a') : p; }
constexpr char piece_for(Color c, char kind) noexcept {
  return c == Color::white ? static_cast<char>(kind - 'a' + 'A') : kind;
}

// Castling right bits.
inline constexpr std::uint8_t kWhiteKingSide = 1;
inline constexpr std::uint8_t kWhiteQueenSide = 2;
inline constexpr std::uint8_t kBlackKingSide = 4;
inline constexpr std::uint8_t kBlackQueenSide = 8;

struct Move {
  Square from = 0;
  Square to = 0;
  char promotion = 0;  // lowercase piece kind or 0

  std::string uci() const {
    std::string s = square_name(from) + square_name(to);
    if (promotion) s.push_back(promotion);
    return s;
  }

  friend bool operator==(const Move&, const Move&) = default;
};

inline constexpr int kKnightSteps[8][2] = {{1, 2},   {2, 1},   {2, -1}, {1, -2},
                                           {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
inline constexpr int kDiagonals[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
inline constexpr int kOrthogonals[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

class Position;
std::optional<std::string> validate(const Position& pos);

/// Full board state. Construct through parse_fen or the standard start position.
class Position {
 public:
  static constexpr std::string_view kStartFen =
      "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

  char at(Square s) const noexcept { return board_[s]; }
  Color side_to_move() const noexcept { return side_; }
  std::uint8_t castling() const noexcept { return castling_; }
  std::optional<Square> en_passant() const noexcept { return ep_; }
  int halfmove_clock() const noexcept { return halfmove_; }
  int fullmove_number() const noexcept { return fullmove_; }

  int piece_count() const noexcept {
    int n = 0;
    for (char c : board_) n += c != '.';
    return n;
  }

  std::optional<Square> king_square(Color c) const noexcept {
    const char k = piece_for(c, 'k');
    for (Square s = 0; s < 64; ++s)
      if (board_[s] == k) return s;
    return std::nullopt;
  }

  /// Is `s` attacked by any piece of color `by`?
  bool attacked(Square s, Color by) const noexcept {
    const int f = file_of(s);
    const int r = rank_of(s);
    auto piece_at = [&](int ff, int rr) -> char {
      if (ff < 0 || ff > 7 || rr < 0 || rr > 7) return 0;
      return board_[make_square(ff, rr)];
    };
    // Pawns attack diagonally forward, so look backwards from the target.
    const int dir = by == Color::white ? -1 : 1;
    const char pawn = piece_for(by, 'p');
    if (piece_at(f - 1, r + dir) == pawn || piece_at(f + 1, r + dir) == pawn) return true;

    const char knight = piece_for(by, 'n');
    for (const auto& d : kKnightSteps)
      if (piece_at(f + d[0], r + d[1]) == knight) return true;

    const char king = piece_for(by, 'k');
    for (int df = -1; df <= 1; ++df)
      for (int dr = -1; dr <= 1; ++dr)
        if ((df || dr) && piece_at(f + df, r + dr) == king) return true;

    const char queen = piece_for(by, 'q');
    auto ray = [&](int df, int dr, char slider) {
      for (int ff = f + df, rr = r + dr; ff >= 0 && ff < 8 && rr >= 0 && rr < 8; ff += df, rr += dr) {
        const char p = board_[make_square(ff, rr)];
        if (p == '.') continue;
        return p == slider || p == queen;
      }
      return false;
    };
    const char rook = piece_for(by, 'r');
    const char bishop = piece_for(by, 'b');
    return ray(1, 0, rook) || ray(-1, 0, rook) || ray(0, 1, rook) || ray(0, -1, rook) ||
           ray(1, 1, bishop) || ray(1, -1, bishop) || ray(-1, 1, bishop) || ray(-1, -1, bishop);
  }

  bool in_check(Color c) const noexcept {
    const auto k = king_square(c);
    return k && attacked(*k, opposite(c));
  }

  /// Moves that obey piece movement rules but may leave the king in check.
  std::vector<Move> pseudo_legal_moves() const {
    std::vector<Move> moves;
    moves.reserve(64);
    const Color us = side_;
    const Color them = opposite(us);
    auto empty = [&](Square s) { return board_[s] == '.'; };
    auto enemy = [&](Square s) { return board_[s] != '.' && color_of(board_[s]) == them; };

    for (Square from = 0; from < 64; ++from) {
      const char p = board_[from];
      if (p == '.' || color_of(p) != us) continue;
      const int f = file_of(from);
      const int r = rank_of(from);
      const char kind = kind_of(p);

      auto add_pawn = [&](Square to) {
        if (rank_of(to) == 0 || rank_of(to) == 7) {
          for (char promo : {'q', 'r', 'b', 'n'}) moves.push_back({from, to, promo});
        } else {
          moves.push_back({from, to, 0});
        }
      };
      auto slide = [&](int df, int dr, bool repeat) {
        for (int ff = f + df, rr = r + dr; ff >= 0 && ff < 8 && rr >= 0 && rr < 8;
             ff += df, rr += dr) {
          const Square to = make_square(ff, rr);
          if (empty(to)) {
            moves.push_back({from, to, 0});
          } else {
            if (enemy(to)) moves.push_back({from, to, 0});
            break;
          }
          if (!repeat) break;
        }
      };

      switch (kind) {
        case 'p': {
          const int dir = us == Color::white ? 1 : -1;
          const int start_rank = us == Color::white ? 1 : 6;
          const int next = r + dir;
          if (next < 0 || next > 7) break;
          const Square one = make_square(f, next);
          if (empty(one)) {
            add_pawn(one);
            const Square two = make_square(f, r + 2 * dir);
            if (r == start_rank && empty(two)) moves.push_back({from, two, 0});
          }
          for (int df : {-1, 1}) {
            const int ff = f + df;
            if (ff < 0 || ff > 7) continue;
            const Square to = make_square(ff, next);
            if (enemy(to) || (ep_ && *ep_ == to)) add_pawn(to);
          }
          break;
        }
        case 'n':
          for (const auto& d : kKnightSteps) slide(d[0], d[1], false);
          break;
        case 'b':
          for (const auto& d : kDiagonals) slide(d[0], d[1], true);
          break;
        case 'r':
          for (const auto& d : kOrthogonals) slide(d[0], d[1], true);
          break;
        case 'q':
          for (const auto& d : kDiagonals) slide(d[0], d[1], true);
          for (const auto& d : kOrthogonals) slide(d[0], d[1], true);
          break;
        case 'k': {
          for (const auto& d : kDiagonals) slide(d[0], d[1], false);
          for (const auto& d : kOrthogonals) slide(d[0], d[1], false);
          const int home = us == Color::white ? 0 : 7;
          const auto ks = us == Color::white ? kWhiteKingSide : kBlackKingSide;
          const auto qs = us == Color::white ? kWhiteQueenSide : kBlackQueenSide;
          if (from != make_square(4, home)) break;
          if ((castling_ & ks) && empty(make_square(5, home)) && empty(make_square(6, home)) &&
              !attacked(make_square(4, home), them) && !attacked(make_square(5, home), them) &&
              !attacked(make_square(6, home), them))
            moves.push_back({from, make_square(6, home), 0});
          if ((castling_ & qs) && empty(make_square(3, home)) && empty(make_square(2, home)) &&
              empty(make_square(1, home)) && !attacked(make_square(4, home), them) &&
              !attacked(make_square(3, home), them) && !attacked(make_square(2, home), them))
            moves.push_back({from, make_square(2, home), 0});
          break;
        }
        default:
          break;
      }
    }
    return moves;
  }

  /// Applies a pseudo-legal move. Does not check legality.
  Position play(const Move& m) const {
    Position next = *this;
    const char p = board_[m.from];
    const char kind = kind_of(p);
    const Color us = side_;
    const bool capture = board_[m.to] != '.';

    next.board_[m.to] = m.promotion ? piece_for(us, m.promotion) : p;
    next.board_[m.from] = '.';
    next.ep_.reset();

    if (kind == 'p') {
      if (ep_ && m.to == *ep_ && file_of(m.from) != file_of(m.to) && !capture)
        next.board_[make_square(file_of(m.to), rank_of(m.from))] = '.';
      if (std::abs(rank_of(m.to) - rank_of(m.from)) == 2)
        next.ep_ = make_square(file_of(m.from), (rank_of(m.from) + rank_of(m.to)) / 2);
    }
    if (kind == 'k' && std::abs(file_of(m.to) - file_of(m.from)) == 2) {
      const int home = rank_of(m.from);
      if (file_of(m.to) == 6) {
        next.board_[make_square(5, home)] = next.board_[make_square(7, home)];
        next.board_[make_square(7, home)] = '.';
      } else {
        next.board_[make_square(3, home)] = next.board_[make_square(0, home)];
        next.board_[make_square(0, home)] = '.';
      }
    }
    next.castling_ &= rights_kept_after_touching(m.from) & rights_kept_after_touching(m.to);
    next.halfmove_ = (kind == 'p' || capture) ? 0 : halfmove_ + 1;
    if (us == Color::black) ++next.fullmove_;
    next.side_ = opposite(us);
    return next;
  }

  std::vector<Move> legal_moves() const {
    std::vector<Move> legal;
    for (const auto& m : pseudo_legal_moves()) {
      const Position next = play(m);
      if (!next.in_check(side_)) legal.push_back(m);
    }
    return legal;
  }

  std::vector<std::string> legal_move_tokens() const {
    std::vector<std::string> out;
    for (const auto& m : legal_moves()) out.push_back(m.uci());
    return out;
  }

  std::optional<Move> find_legal(std::string_view uci) const {
    for (const auto& m : legal_moves())
      if (m.uci() == uci) return m;
    return std::nullopt;
  }

  bool is_legal(std::string_view uci) const { return find_legal(uci).has_value(); }

  /// Board with the piece on `s` removed, castling rights that depended on it
  /// dropped and an en-passant target cleared when its pawn is gone. No
  /// validity check.
  Position without_piece(Square s) const {
    Position next = *this;
    next.board_[s] = '.';
    next.castling_ &= rights_kept_after_touching(s);
    if (ep_) {
      // The double-stepped pawn sits one rank past the target, towards the mover's opponent.
      const int pawn_rank = side_ == Color::white ? rank_of(*ep_) - 1 : rank_of(*ep_) + 1;
      if (s == make_square(file_of(*ep_), pawn_rank)) next.ep_.reset();
    }
    return next;
  }

  std::string fen() const {
    std::string out;
    for (int r = 7; r >= 0; --r) {
      int gap = 0;
      for (int f = 0; f < 8; ++f) {
        const char p = board_[make_square(f, r)];
        if (p == '.') {
          ++gap;
          continue;
        }
        if (gap) out.push_back(static_cast<char>('0' + gap));
        gap = 0;
        out.push_back(p);
      }
      if (gap) out.push_back(static_cast<char>('0' + gap));
      if (r) out.push_back('/');
    }
    out += side_ == Color::white ? " w " : " b ";
    if (!castling_) out.push_back('-');
    if (castling_ & kWhiteKingSide) out.push_back('K');
    if (castling_ & kWhiteQueenSide) out.push_back('Q');
    if (castling_ & kBlackKingSide) out.push_back('k');
    if (castling_ & kBlackQueenSide) out.push_back('q');
    out += ' ';
    out += ep_ ? square_name(*ep_) : "-";
    out += ' ' + std::to_string(halfmove_) + ' ' + std::to_string(fullmove_);
    return out;
  }

  friend bool operator==(const Position&, const Position&) = default;

  friend Position parse_fen(std::string_view text);

 private:
  static constexpr std::uint8_t rights_kept_after_touching(Square s) noexcept {
    switch (s) {
      case 0: return static_cast<std::uint8_t>(~kWhiteQueenSide);
      case 7: return static_cast<std::uint8_t>(~kWhiteKingSide);
      case 4: return static_cast<std::uint8_t>(~(kWhiteKingSide | kWhiteQueenSide));
      case 56: return static_cast<std::uint8_t>(~kBlackQueenSide);
      case 63: return static_cast<std::uint8_t>(~kBlackKingSide);
      case 60: return static_cast<std::uint8_t>(~(kBlackKingSide | kBlackQueenSide));
      default: return 0xff;
    }
  }

  std::array<char, 64> board_{};
  Color side_ = Color::white;
  std::uint8_t castling_ = 0;
  std::optional<Square> ep_;
  int halfmove_ = 0;
  int fullmove_ = 1;
};

/// Checks the structural invariants: one king per side, side not to move not
/// in check, no pawns on the back ranks, castling rights backed by king and
/// rook on their home squares, en-passant target consistent. Returns the first
/// violation.
inline std::optional<std::string> validate(const Position& pos) {
  int white_kings = 0;
  int black_kings = 0;
  for (Square s = 0; s < 64; ++s) {
    const char p = pos.at(s);
    if (p == 'K') ++white_kings;
    if (p == 'k') ++black_kings;
    if ((p == 'P' || p == 'p') && (rank_of(s) == 0 || rank_of(s) == 7))
      return "pawn on back rank at " + square_name(s);
  }
  if (white_kings != 1) return "white must have exactly one king";
  if (black_kings != 1) return "black must have exactly one king";
  if (pos.in_check(opposite(pos.side_to_move()))) return "side not to move is in check";

  const auto c = pos.castling();
  if ((c & (kWhiteKingSide | kWhiteQueenSide)) && pos.at(4) != 'K')
    return "white castling rights without king on e1";
  if ((c & kWhiteKingSide) && pos.at(7) != 'R') return "white king-side right without rook on h1";
  if ((c & kWhiteQueenSide) && pos.at(0) != 'R') return "white queen-side right without rook on a1";
  if ((c & (kBlackKingSide | kBlackQueenSide)) && pos.at(60) != 'k')
    return "black castling rights without king on e8";
  if ((c & kBlackKingSide) && pos.at(63) != 'r') return "black king-side right without rook on h8";
  if ((c & kBlackQueenSide) && pos.at(56) != 'r') return "black queen-side right without rook on a8";

  if (const auto ep = pos.en_passant()) {
    const bool white_to_move = pos.side_to_move() == Color::white;
    if (rank_of(*ep) != (white_to_move ? 5 : 2)) return "en-passant square on wrong rank";
    if (pos.at(*ep) != '.') return "en-passant square occupied";
    const Square pawn = make_square(file_of(*ep), white_to_move ? 4 : 3);
    if (pos.at(pawn) != (white_to_move ? 'p' : 'P')) return "en-passant square without pawn";
  }
  return std::nullopt;
}

/// Parses a six-field FEN (the two counters may be omitted). Throws InputError.
inline Position parse_fen(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string placement, side, castling, ep, half = "0", full = "1";
  if (!(in >> placement >> side >> castling >> ep)) throw InputError("FEN needs at least 4 fields");
  in >> half >> full;
  std::string extra;
  if (in >> extra) throw InputError("FEN has trailing fields");

  Position pos;
  pos.board_.fill('.');
  int rank = 7;
  int file = 0;
  for (char ch : placement) {
    if (ch == '/') {
      if (file != 8) throw InputError("FEN rank " + std::to_string(rank + 1) + " is not 8 squares");
      --rank;
      file = 0;
      if (rank < 0) throw InputError("FEN has more than 8 ranks");
    } else if (ch >= '1' && ch <= '8') {
      file += ch - '0';
      if (file > 8) throw InputError("FEN rank overflows");
    } else if (std::string_view("pnbrqkPNBRQK").find(ch) != std::string_view::npos) {
      if (file > 7) throw InputError("FEN rank overflows");
      pos.board_[make_square(file, rank)] = ch;
      ++file;
    } else {
      throw InputError(std::string("FEN has invalid piece character '") + ch + "'");
    }
  }
  if (rank != 0 || file != 8) throw InputError("FEN placement does not describe 64 squares");

  if (side == "w") pos.side_ = Color::white;
  else if (side == "b") pos.side_ = Color::black;
  else throw InputError("FEN side to move must be 'w' or 'b'");

  pos.castling_ = 0;
  if (castling != "-") {
    for (char ch : castling) {
      switch (ch) {
        case 'K': pos.castling_ |= kWhiteKingSide; break;
        case 'Q': pos.castling_ |= kWhiteQueenSide; break;
        case 'k': pos.castling_ |= kBlackKingSide; break;
        case 'q': pos.castling_ |= kBlackQueenSide; break;
        default: throw InputError("FEN castling field is invalid");
      }
    }
  }

  if (ep != "-") {
    const auto sq = parse_square(ep);
    if (!sq) throw InputError("FEN en-passant field is invalid");
    pos.ep_ = *sq;
  }

  auto parse_counter = [](const std::string& s, const char* what, int min) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < min)
      throw InputError(std::string("FEN ") + what + " is invalid");
    return v;
  };
  pos.halfmove_ = parse_counter(half, "halfmove clock", 0);
  pos.fullmove_ = parse_counter(full, "fullmove number", 1);

  if (auto err = validate(pos)) throw InputError("invalid position: " + *err);
  return pos;
}

inline Position start_position() { return parse_fen(Position::kStartFen); }

/// Legal moves as UCI long-algebraic tokens.
inline std::vector<std::string> legal_moves(const Position& pos) { return pos.legal_move_tokens(); }

struct SquarePerturbation {
  Square square = 0;
  char removed_piece = '.';
};

struct PerturbedPosition {
  SquarePerturbation perturbation;
  Position position;
};

/// Every single-piece removal that leaves a valid position, a1 to h8. Kings
/// are never removed.
inline std::vector<PerturbedPosition> enumerate_perturbations(const Position& pos) {
  std::vector<PerturbedPosition> out;
  for (Square s = 0; s < 64; ++s) {
    const char p = pos.at(s);
    if (p == '.' || kind_of(p) == 'k') continue;
    Position next = pos.without_piece(s);
    if (validate(next)) continue;
    out.push_back({{s, p}, std::move(next)});
  }
  return out;
}

/// Number of leaf nodes at `depth`; move generator self-check.
inline std::uint64_t perft(const Position& pos, int depth) {
  if (depth == 0) return 1;
  const auto moves = pos.legal_moves();
  if (depth == 1) return moves.size();
  std::uint64_t n = 0;
  for (const auto& m : moves) n += perft(pos.play(m), depth - 1);
  return n;
}

}  // namespace sarfa::chess
