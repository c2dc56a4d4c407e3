#include "chessbench/chess.hpp"

#include <algorithm>
#include <cstdlib>

namespace chessbench {
namespace {

constexpr std::uint8_t kEmpty = 0;

constexpr std::uint8_t code_of(Piece pc) {
  return static_cast<std::uint8_t>(static_cast<int>(pc.kind) + 1 +
                                   (pc.color == Color::black ? 8 : 0));
}

constexpr bool is_black_code(std::uint8_t c) { return (c & 8) != 0; }

constexpr Color color_of(std::uint8_t c) {
  return is_black_code(c) ? Color::black : Color::white;
}

constexpr PieceKind kind_of(std::uint8_t c) {
  return static_cast<PieceKind>((c & 7) - 1);
}

constexpr bool is_kind(std::uint8_t c, PieceKind k) {
  return c != kEmpty && kind_of(c) == k;
}

struct TargetList {
  std::uint8_t n = 0;
  std::uint8_t sq[8];
};

using TargetTable = std::array<TargetList, 64>;

constexpr int kKnightDelta[8][2] = {{2, 1},  {1, 2},   {-1, 2}, {-2, 1},
                                    {-2, -1}, {-1, -2}, {1, -2}, {2, -1}};
constexpr int kKingDelta[8][2] = {{1, 0},  {1, 1},   {0, 1},  {-1, 1},
                                  {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
constexpr int kOrthoDelta[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
constexpr int kDiagDelta[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};

TargetTable build_table(const int (*deltas)[2]) {
  TargetTable t{};
  for (int sq = 0; sq < 64; ++sq) {
    const int r = sq >> 3, f = sq & 7;
    for (int d = 0; d < 8; ++d) {
      const int nr = r + deltas[d][0], nf = f + deltas[d][1];
      if (nr < 0 || nr > 7 || nf < 0 || nf > 7) continue;
      t[sq].sq[t[sq].n++] = static_cast<std::uint8_t>(nr * 8 + nf);
    }
  }
  return t;
}

const TargetTable& knight_targets() {
  static const TargetTable t = build_table(kKnightDelta);
  return t;
}

const TargetTable& king_targets() {
  static const TargetTable t = build_table(kKingDelta);
  return t;
}

}  // namespace

namespace detail {

// Grants the implementation file access to Position internals.
class PositionBuilder {
 public:
  static std::array<std::uint8_t, 64>& board(Position& p) { return p.board_; }
  static const std::array<std::uint8_t, 64>& board(const Position& p) { return p.board_; }
  static void set_stm(Position& p, Color c) { p.stm_ = c; }
  static void set_castling(Position& p, CastlingRights cr) { p.castling_ = cr; }
  static void set_ep(Position& p, int sq) { p.ep_ = static_cast<std::int8_t>(sq); }
  static void set_halfmove(Position& p, int v) { p.halfmove_ = static_cast<std::int16_t>(v); }
  static void set_fullmove(Position& p, int v) { p.fullmove_ = static_cast<std::int16_t>(v); }
  static void set_king(Position& p, Color c, int sq) {
    p.king_sq_[static_cast<int>(c)] = static_cast<std::uint8_t>(sq);
  }
};

}  // namespace detail

using detail::PositionBuilder;

std::optional<Square> Square::parse(std::string_view name) {
  if (name.size() != 2) return std::nullopt;
  const int f = name[0] - 'a', r = name[1] - '1';
  if (f < 0 || f > 7 || r < 0 || r > 7) return std::nullopt;
  return Square::of(f, r);
}

std::string Square::name() const {
  return {static_cast<char>('a' + file()), static_cast<char>('1' + rank())};
}

Position::Position() {
  // back rank files: a..h = R N B Q K B N R
  constexpr PieceKind files[8] = {PieceKind::rook,   PieceKind::knight, PieceKind::bishop,
                                  PieceKind::queen,  PieceKind::king,   PieceKind::bishop,
                                  PieceKind::knight, PieceKind::rook};
  for (int f = 0; f < 8; ++f) {
    board_[f] = code_of({Color::white, files[f]});
    board_[8 + f] = code_of({Color::white, PieceKind::pawn});
    board_[48 + f] = code_of({Color::black, PieceKind::pawn});
    board_[56 + f] = code_of({Color::black, files[f]});
  }
  castling_ = {true, true, true, true};
  king_sq_ = {4, 60};
}

std::optional<Piece> Position::piece_at(Square sq) const {
  const std::uint8_t c = board_[sq.index()];
  if (c == kEmpty) return std::nullopt;
  return Piece{color_of(c), kind_of(c)};
}

std::optional<Square> Position::en_passant() const {
  if (ep_ < 0) return std::nullopt;
  return Square(ep_);
}

bool is_attacked(const Position& p, Square sq, Color by) {
  const auto& board = PositionBuilder::board(p);
  const int r = sq.rank(), f = sq.file();
  const std::uint8_t color_bit = by == Color::black ? 8 : 0;

  // pawns: a white pawn attacks from one rank below, black from above
  const int pr = by == Color::white ? r - 1 : r + 1;
  if (pr >= 0 && pr <= 7) {
    for (const int pf : {f - 1, f + 1}) {
      if (pf < 0 || pf > 7) continue;
      const std::uint8_t c = board[pr * 8 + pf];
      if (c == (code_of({by, PieceKind::pawn}))) return true;
    }
  }

  const std::uint8_t knight_code = (1 + static_cast<int>(PieceKind::knight)) | color_bit;
  const auto& kn = knight_targets()[sq.index()];
  for (int i = 0; i < kn.n; ++i) {
    if (board[kn.sq[i]] == knight_code) return true;
  }
  const std::uint8_t king_code = (1 + static_cast<int>(PieceKind::king)) | color_bit;
  const auto& kg = king_targets()[sq.index()];
  for (int i = 0; i < kg.n; ++i) {
    if (board[kg.sq[i]] == king_code) return true;
  }

  const auto scan = [&](const int(*deltas)[2], PieceKind slider) {
    for (int d = 0; d < 4; ++d) {
      int nr = r + deltas[d][0], nf = f + deltas[d][1];
      while (nr >= 0 && nr <= 7 && nf >= 0 && nf <= 7) {
        const std::uint8_t c = board[nr * 8 + nf];
        if (c != kEmpty) {
          if (color_of(c) == by &&
              (kind_of(c) == slider || kind_of(c) == PieceKind::queen))
            return true;
          break;
        }
        nr += deltas[d][0];
        nf += deltas[d][1];
      }
    }
    return false;
  };
  return scan(kOrthoDelta, PieceKind::rook) || scan(kDiagDelta, PieceKind::bishop);
}

namespace detail {

bool in_check(const Position& p, Color c) {
  return is_attacked(p, p.king_square(c), opponent(c));
}

Position apply_unchecked(const Position& p, Move m) {
  Position q = p;
  auto& board = PositionBuilder::board(q);
  const int from = m.from.index(), to = m.to.index();
  const std::uint8_t moving = board[from];
  const Color mover = color_of(moving);
  const bool is_pawn = kind_of(moving) == PieceKind::pawn;
  bool capture = board[to] != kEmpty;

  // en-passant capture: pawn moves diagonally onto the empty ep square
  if (is_pawn && p.en_passant() && m.to == *p.en_passant() && !capture &&
      m.to.file() != m.from.file()) {
    const int victim = m.from.rank() * 8 + m.to.file();
    board[victim] = kEmpty;
    capture = true;
  }

  board[to] = m.promotion ? code_of({mover, *m.promotion}) : moving;
  board[from] = kEmpty;

  if (kind_of(moving) == PieceKind::king) {
    PositionBuilder::set_king(q, mover, to);
    if (to - from == 2) {  // kingside: rook h -> f
      board[from + 1] = board[to + 1];
      board[to + 1] = kEmpty;
    } else if (from - to == 2) {  // queenside: rook a -> d
      board[from - 1] = board[to - 2];
      board[to - 2] = kEmpty;
    }
  }

  CastlingRights cr = p.castling();
  if (kind_of(moving) == PieceKind::king) {
    if (mover == Color::white) cr.white_kingside = cr.white_queenside = false;
    else cr.black_kingside = cr.black_queenside = false;
  }
  for (const int sq : {from, to}) {
    switch (sq) {
      case 0: cr.white_queenside = false; break;
      case 7: cr.white_kingside = false; break;
      case 56: cr.black_queenside = false; break;
      case 63: cr.black_kingside = false; break;
      default: break;
    }
  }
  PositionBuilder::set_castling(q, cr);

  const bool double_push = is_pawn && std::abs(m.to.rank() - m.from.rank()) == 2;
  PositionBuilder::set_ep(q, double_push ? (from + to) / 2 : -1);
  PositionBuilder::set_halfmove(q, (is_pawn || capture) ? 0 : p.halfmove_clock() + 1);
  PositionBuilder::set_fullmove(q, p.fullmove_number() + (mover == Color::black ? 1 : 0));
  PositionBuilder::set_stm(q, opponent(mover));
  return q;
}

}  // namespace detail

bool is_check(const Position& p) { return detail::in_check(p, p.side_to_move()); }

namespace {

// Generates pseudo-legal moves (castling is emitted fully legal). If
// `probe` is set, stops after finding one legal move and returns true.
bool generate(const Position& p, std::vector<Move>* out, bool probe) {
  const auto& board = PositionBuilder::board(p);
  const Color us = p.side_to_move();
  const Color them = opponent(us);
  bool found = false;

  const auto emit = [&](Move m) {
    if (probe) {
      const Position q = detail::apply_unchecked(p, m);
      if (!detail::in_check(q, us)) found = true;
    } else {
      out->push_back(m);
    }
    return found;
  };

  for (int from = 0; from < 64 && !found; ++from) {
    const std::uint8_t c = board[from];
    if (c == kEmpty || color_of(c) != us) continue;
    const int r = from >> 3, f = from & 7;

    switch (kind_of(c)) {
      case PieceKind::pawn: {
        const int dir = us == Color::white ? 1 : -1;
        const int start_rank = us == Color::white ? 1 : 6;
        const int promo_rank = us == Color::white ? 7 : 0;
        const auto emit_pawn = [&](int to) {
          if ((to >> 3) == promo_rank) {
            for (const PieceKind k : {PieceKind::knight, PieceKind::bishop,
                                      PieceKind::rook, PieceKind::queen}) {
              if (emit({Square(from), Square(to), k})) return;
            }
          } else {
            emit({Square(from), Square(to), std::nullopt});
          }
        };
        const int fwd = from + dir * 8;
        if (board[fwd] == kEmpty) {
          emit_pawn(fwd);
          if (!found && r == start_rank && board[fwd + dir * 8] == kEmpty)
            emit({Square(from), Square(fwd + dir * 8), std::nullopt});
        }
        for (const int df : {-1, 1}) {
          if (found) break;
          const int nf = f + df;
          if (nf < 0 || nf > 7) continue;
          const int to = (r + dir) * 8 + nf;
          if (to < 0 || to > 63) continue;
          const std::uint8_t tc = board[to];
          if (tc != kEmpty && color_of(tc) == them) {
            emit_pawn(to);
          } else if (tc == kEmpty && p.en_passant() &&
                     to == p.en_passant()->index()) {
            emit({Square(from), Square(to), std::nullopt});
          }
        }
        break;
      }
      case PieceKind::knight: {
        const auto& t = knight_targets()[from];
        for (int i = 0; i < t.n && !found; ++i) {
          const std::uint8_t tc = board[t.sq[i]];
          if (tc == kEmpty || color_of(tc) == them)
            emit({Square(from), Square(t.sq[i]), std::nullopt});
        }
        break;
      }
      case PieceKind::king: {
        const auto& t = king_targets()[from];
        for (int i = 0; i < t.n && !found; ++i) {
          const std::uint8_t tc = board[t.sq[i]];
          if (tc == kEmpty || color_of(tc) == them)
            emit({Square(from), Square(t.sq[i]), std::nullopt});
        }
        // castling: squares between king and rook empty, king path unattacked
        const int home = us == Color::white ? 4 : 60;
        if (from == home && !found) {
          if (p.castling().can(us, true) && board[home + 1] == kEmpty &&
              board[home + 2] == kEmpty && !is_attacked(p, Square(home), them) &&
              !is_attacked(p, Square(home + 1), them) &&
              !is_attacked(p, Square(home + 2), them)) {
            emit({Square(home), Square(home + 2), std::nullopt});
          }
          if (!found && p.castling().can(us, false) && board[home - 1] == kEmpty &&
              board[home - 2] == kEmpty && board[home - 3] == kEmpty &&
              !is_attacked(p, Square(home), them) &&
              !is_attacked(p, Square(home - 1), them) &&
              !is_attacked(p, Square(home - 2), them)) {
            emit({Square(home), Square(home - 2), std::nullopt});
          }
        }
        break;
      }
      default: {  // sliders
        const PieceKind k = kind_of(c);
        const auto slide = [&](const int(*deltas)[2]) {
          for (int d = 0; d < 4 && !found; ++d) {
            int nr = r + deltas[d][0], nf = f + deltas[d][1];
            while (nr >= 0 && nr <= 7 && nf >= 0 && nf <= 7) {
              const int to = nr * 8 + nf;
              const std::uint8_t tc = board[to];
              if (tc == kEmpty) {
                if (emit({Square(from), Square(to), std::nullopt})) return;
              } else {
                if (color_of(tc) == them)
                  emit({Square(from), Square(to), std::nullopt});
                break;
              }
              nr += deltas[d][0];
              nf += deltas[d][1];
            }
          }
        };
        if (k == PieceKind::rook || k == PieceKind::queen) slide(kOrthoDelta);
        if (!found && (k == PieceKind::bishop || k == PieceKind::queen))
          slide(kDiagDelta);
        break;
      }
    }
  }
  return found;
}

}  // namespace

std::vector<Move> legal_moves(const Position& p) {
  std::vector<Move> pseudo;
  pseudo.reserve(48);
  generate(p, &pseudo, false);
  std::vector<Move> legal;
  legal.reserve(pseudo.size());
  const Color us = p.side_to_move();
  for (const Move m : pseudo) {
    const Position q = detail::apply_unchecked(p, m);
    if (!detail::in_check(q, us)) legal.push_back(m);
  }
  std::sort(legal.begin(), legal.end());
  return legal;
}

bool has_legal_move(const Position& p) { return generate(p, nullptr, true); }

Position apply(const Position& p, Move m) {
  const auto moves = legal_moves(p);
  if (std::find(moves.begin(), moves.end(), m) == moves.end()) {
    throw IllegalMove("illegal move " + m.from.name() + m.to.name() +
                      " in position with " + std::to_string(moves.size()) +
                      " legal moves");
  }
  return detail::apply_unchecked(p, m);
}

namespace {

bool insufficient_material(const Position& p) {
  int knights = 0;
  bool bishop_on_light = false, bishop_on_dark = false;
  for (int sq = 0; sq < 64; ++sq) {
    const auto pc = p.piece_at(Square(sq));
    if (!pc) continue;
    switch (pc->kind) {
      case PieceKind::pawn:
      case PieceKind::rook:
      case PieceKind::queen:
        return false;
      case PieceKind::knight:
        ++knights;
        break;
      case PieceKind::bishop:
        if (((sq >> 3) + (sq & 7)) % 2 == 0) bishop_on_dark = true;
        else bishop_on_light = true;
        break;
      case PieceKind::king:
        break;
    }
  }
  const bool any_bishop = bishop_on_light || bishop_on_dark;
  if (knights > 1) return false;
  if (knights == 1) return !any_bishop;
  return !(bishop_on_light && bishop_on_dark);
}

}  // namespace

Outcome outcome(const Position& p, std::span<const Position> history) {
  if (!has_legal_move(p)) {
    if (is_check(p)) return {GameStatus::checkmate, opponent(p.side_to_move())};
    return {GameStatus::stalemate, std::nullopt};
  }
  if (p.halfmove_clock() >= 100) return {GameStatus::draw_fifty_move, std::nullopt};
  if (insufficient_material(p))
    return {GameStatus::draw_insufficient_material, std::nullopt};
  int repeats = 0;
  for (const Position& h : history) {
    if (same_for_repetition(h, p) && ++repeats >= 2)
      return {GameStatus::draw_repetition, std::nullopt};
  }
  return {GameStatus::ongoing, std::nullopt};
}

bool same_for_repetition(const Position& a, const Position& b) {
  return PositionBuilder::board(a) == PositionBuilder::board(b) &&
         a.side_to_move() == b.side_to_move() && a.castling() == b.castling() &&
         a.en_passant() == b.en_passant();
}

std::uint64_t perft(const Position& p, int depth) {
  if (depth <= 0) return 1;
  std::vector<Move> pseudo;
  pseudo.reserve(48);
  generate(p, &pseudo, false);
  std::uint64_t total = 0;
  const Color us = p.side_to_move();
  for (const Move m : pseudo) {
    const Position q = detail::apply_unchecked(p, m);
    if (detail::in_check(q, us)) continue;
    total += depth == 1 ? 1 : perft(q, depth - 1);
  }
  return total;
}

Position Position::from_parts(std::span<const std::optional<Piece>> placement,
                              Color side_to_move, CastlingRights castling,
                              std::optional<Square> en_passant, int halfmove_clock,
                              int fullmove_number) {
  if (placement.size() != 64) throw PositionError("placement must have 64 entries");
  Position p;
  auto& board = PositionBuilder::board(p);
  board.fill(kEmpty);
  int kings[2] = {0, 0};
  int pawns[2] = {0, 0};
  int total[2] = {0, 0};
  for (int sq = 0; sq < 64; ++sq) {
    if (!placement[sq]) continue;
    const Piece pc = *placement[sq];
    const int side = static_cast<int>(pc.color);
    board[sq] = code_of(pc);
    ++total[side];
    if (pc.kind == PieceKind::king) {
      ++kings[side];
      PositionBuilder::set_king(p, pc.color, sq);
    }
    if (pc.kind == PieceKind::pawn) {
      ++pawns[side];
      const int r = sq >> 3;
      if (r == 0 || r == 7) throw PositionError("pawn on back rank");
    }
  }
  for (int side = 0; side < 2; ++side) {
    if (kings[side] != 1) throw PositionError("each side needs exactly one king");
    if (pawns[side] > 8) throw PositionError("more than 8 pawns for one side");
    if (total[side] > 16) throw PositionError("more than 16 pieces for one side");
  }
  if (halfmove_clock < 0 || halfmove_clock > 150)
    throw PositionError("halfmove clock out of range [0, 150]");
  if (fullmove_number < 1) throw PositionError("fullmove number must be >= 1");

  const auto piece_is = [&](int file, int rank, Color c, PieceKind k) {
    const std::uint8_t code = board[rank * 8 + file];
    return code != kEmpty && color_of(code) == c && kind_of(code) == k;
  };

  if (en_passant) {
    const int f = en_passant->file(), r = en_passant->rank();
    const bool white_pushed = side_to_move == Color::black;
    if (r != (white_pushed ? 2 : 5))
      throw PositionError("en-passant square on impossible rank");
    if (board[en_passant->index()] != kEmpty)
      throw PositionError("en-passant square is occupied");
    const Color pusher = white_pushed ? Color::white : Color::black;
    if (!piece_is(f, white_pushed ? 3 : 4, pusher, PieceKind::pawn))
      throw PositionError("no pawn behind the en-passant square");
    if (board[(white_pushed ? 1 : 6) * 8 + f] != kEmpty)
      throw PositionError("en-passant origin square is occupied");
  }

  const auto require_castle = [&](Color c, bool kingside, bool flag) {
    if (!flag) return;
    const int rank = c == Color::white ? 0 : 7;
    if (!piece_is(4, rank, c, PieceKind::king) ||
        !piece_is(kingside ? 7 : 0, rank, c, PieceKind::rook))
      throw PositionError("castling rights inconsistent with piece placement");
  };
  require_castle(Color::white, true, castling.white_kingside);
  require_castle(Color::white, false, castling.white_queenside);
  require_castle(Color::black, true, castling.black_kingside);
  require_castle(Color::black, false, castling.black_queenside);

  PositionBuilder::set_stm(p, side_to_move);
  PositionBuilder::set_castling(p, castling);
  PositionBuilder::set_ep(p, en_passant ? en_passant->index() : -1);
  PositionBuilder::set_halfmove(p, halfmove_clock);
  PositionBuilder::set_fullmove(p, fullmove_number);

  if (detail::in_check(p, opponent(side_to_move)))
    throw PositionError("side not to move is in check");
  return p;
}

Position mirror(const Position& p) {
  Position q = p;
  auto& board = PositionBuilder::board(q);
  const auto& src = PositionBuilder::board(p);
  for (int sq = 0; sq < 64; ++sq) {
    const std::uint8_t c = src[sq ^ 56];
    board[sq] = c == kEmpty ? kEmpty : static_cast<std::uint8_t>(c ^ 8);
  }
  const CastlingRights cr = p.castling();
  PositionBuilder::set_castling(q, {cr.black_kingside, cr.black_queenside,
                                    cr.white_kingside, cr.white_queenside});
  PositionBuilder::set_stm(q, opponent(p.side_to_move()));
  PositionBuilder::set_ep(q, p.en_passant() ? (p.en_passant()->index() ^ 56) : -1);
  PositionBuilder::set_king(q, Color::white, p.king_square(Color::black).index() ^ 56);
  PositionBuilder::set_king(q, Color::black, p.king_square(Color::white).index() ^ 56);
  return q;
}

}  // namespace chessbench
