#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chessbench/errors.hpp"

namespace chessbench {

enum class Color : std::uint8_t { white = 0, black = 1 };

constexpr Color opponent(Color c) {
  return c == Color::white ? Color::black : Color::white;
}

enum class PieceKind : std::uint8_t { pawn, knight, bishop, rook, queen, king };

struct Piece {
  Color color;
  PieceKind kind;
  friend bool operator==(const Piece&, const Piece&) = default;
};

// Board square, index 0..63 with a1 = 0, b1 = 1, ..., h8 = 63.
class Square {
 public:
  constexpr Square() = default;
  constexpr explicit Square(int index) : index_(static_cast<std::uint8_t>(index)) {
    if (index < 0 || index > 63) throw Error("square index out of range");
  }
  static constexpr Square of(int file, int rank) { return Square(rank * 8 + file); }
  // "e4" -> Square; nullopt on anything else.
  static std::optional<Square> parse(std::string_view name);

  constexpr int index() const { return index_; }
  constexpr int file() const { return index_ & 7; }
  constexpr int rank() const { return index_ >> 3; }
  std::string name() const;

  friend constexpr auto operator<=>(Square, Square) = default;

 private:
  std::uint8_t index_ = 0;
};

struct Move {
  Square from;
  Square to;
  std::optional<PieceKind> promotion;  // knight/bishop/rook/queen when set

  friend constexpr auto operator<=>(const Move&, const Move&) = default;
};

struct CastlingRights {
  bool white_kingside = false;
  bool white_queenside = false;
  bool black_kingside = false;
  bool black_queenside = false;

  bool can(Color c, bool kingside) const {
    if (c == Color::white) return kingside ? white_kingside : white_queenside;
    return kingside ? black_kingside : black_queenside;
  }
  bool any() const {
    return white_kingside || white_queenside || black_kingside || black_queenside;
  }
  friend bool operator==(const CastlingRights&, const CastlingRights&) = default;
};

namespace detail {
class PositionBuilder;
}

// Immutable chess position. All mutating operations return new values.
//
// Construction-time validation (from_parts, and therefore parse_fen):
// exactly one king per color, no pawns on the first or last rank, at most
// 8 pawns / 16 pieces per color, en-passant square consistent with a
// double push, castling rights consistent with king/rook placement,
// halfmove clock in [0, 150], fullmove >= 1, and the side not to move is
// never in check. apply() preserves the structural invariants by
// construction (the halfmove bound is input-side only).
class Position {
 public:
  // The standard initial position.
  Position();
  static Position initial() { return Position(); }

  // Validates and builds a position. `placement` is 64 entries, a1..h8.
  static Position from_parts(std::span<const std::optional<Piece>> placement,
                             Color side_to_move, CastlingRights castling,
                             std::optional<Square> en_passant, int halfmove_clock,
                             int fullmove_number);

  std::optional<Piece> piece_at(Square sq) const;
  Color side_to_move() const { return stm_; }
  CastlingRights castling() const { return castling_; }
  std::optional<Square> en_passant() const;
  int halfmove_clock() const { return halfmove_; }
  int fullmove_number() const { return fullmove_; }
  Square king_square(Color c) const { return Square(king_sq_[static_cast<int>(c)]); }

  friend bool operator==(const Position&, const Position&) = default;

 private:
  friend class detail::PositionBuilder;

  std::array<std::uint8_t, 64> board_{};  // 0 empty, else kind+1 | color<<3
  Color stm_ = Color::white;
  CastlingRights castling_{};
  std::int8_t ep_ = -1;
  std::int16_t halfmove_ = 0;
  std::int16_t fullmove_ = 1;
  std::array<std::uint8_t, 2> king_sq_{};
};

// True if `sq` is attacked by any piece of color `by`.
bool is_attacked(const Position& p, Square sq, Color by);

// True if the side to move is in check.
bool is_check(const Position& p);

// All legal moves, sorted by (from, to, promotion kind) for determinism.
std::vector<Move> legal_moves(const Position& p);

// True iff the side to move has at least one legal move (early-exit).
bool has_legal_move(const Position& p);

// Applies a legal move; throws IllegalMove otherwise.
Position apply(const Position& p, Move m);

enum class GameStatus : std::uint8_t {
  ongoing,
  checkmate,
  stalemate,
  draw_fifty_move,
  draw_insufficient_material,
  draw_repetition,
};

struct Outcome {
  GameStatus status = GameStatus::ongoing;
  std::optional<Color> winner;  // set iff status == checkmate

  bool over() const { return status != GameStatus::ongoing; }
  bool is_draw() const { return over() && status != GameStatus::checkmate; }
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// Terminal-state rules. `history` (earlier positions, oldest first) is only
// consulted for threefold repetition; the current position counts as one
// occurrence. Precedence: checkmate/stalemate, then fifty-move (halfmove
// clock >= 100), insufficient material, repetition.
Outcome outcome(const Position& p, std::span<const Position> history = {});

// Repetition equality: placement, side to move, castling rights and
// en-passant square; move counters are ignored.
bool same_for_repetition(const Position& a, const Position& b);

// Exhaustive legal-move leaf count to the given depth (depth 0 -> 1).
std::uint64_t perft(const Position& p, int depth);

// Color-flip transform: piece colors swapped, ranks mirrored, side to move
// flipped, castling rights swapped, en-passant rank mirrored. Useful for
// the black-to-move symmetry of the board encoder.
Position mirror(const Position& p);

namespace detail {
// Applies without checking legality; callers must guarantee m is at least
// pseudo-legal. Shared by movegen, perft and the notation replayers.
Position apply_unchecked(const Position& p, Move m);
bool in_check(const Position& p, Color c);
}  // namespace detail

}  // namespace chessbench
