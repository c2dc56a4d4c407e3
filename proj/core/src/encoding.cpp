#include "chessbench/encoding.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <istream>
#include <ostream>

namespace chessbench {

namespace {

Square mirror_square(Square sq) { return Square(sq.index() ^ 56); }

struct ActionTables {
  std::vector<Move> entries;
  // Plain (non-underpromotion) moves: from * 64 + to -> index.
  std::array<std::int16_t, 64 * 64> plain;
  // Underpromotions: (from * 64 + to) x {knight, bishop, rook} -> index.
  std::array<std::array<std::int16_t, 3>, 64 * 64> under;

  ActionTables() {
    plain.fill(-1);
    for (auto& row : under) row.fill(-1);
    entries.reserve(kActionCount);

    constexpr int kQueenDirs[8][2] = {{0, 1},  {1, 1},   {1, 0},  {1, -1},
                                      {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
    constexpr int kKnightJumps[8][2] = {{1, 2},   {2, 1},   {2, -1}, {1, -2},
                                        {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
    auto add = [&](Square from, Square to, std::optional<PieceKind> promo) {
      int slot = from.index() * 64 + to.index();
      std::int16_t idx = static_cast<std::int16_t>(entries.size());
      if (promo)
        under[slot][static_cast<int>(*promo) - 1] = idx;
      else
        plain[slot] = idx;
      entries.push_back(Move{from, to, promo});
    };

    for (int from = 0; from < 64; ++from) {
      Square f{from};
      for (const auto& d : kQueenDirs)
        for (int dist = 1; dist <= 7; ++dist) {
          int file = f.file() + d[0] * dist;
          int rank = f.rank() + d[1] * dist;
          if (file < 0 || file > 7 || rank < 0 || rank > 7) break;
          add(f, Square::of(file, rank), std::nullopt);
        }
      for (const auto& j : kKnightJumps) {
        int file = f.file() + j[0];
        int rank = f.rank() + j[1];
        if (file < 0 || file > 7 || rank < 0 || rank > 7) continue;
        add(f, Square::of(file, rank), std::nullopt);
      }
    }
    for (int file = 0; file < 8; ++file)
      for (int df = -1; df <= 1; ++df) {
        int to_file = file + df;
        if (to_file < 0 || to_file > 7) continue;
        for (PieceKind promo :
             {PieceKind::knight, PieceKind::bishop, PieceKind::rook})
          add(Square::of(file, 6), Square::of(to_file, 7), promo);
      }
  }
};

const ActionTables& tables() {
  static const ActionTables t;
  return t;
}

bool is_legal(const Position& p, Move m) {
  std::vector<Move> legal = legal_moves(p);
  return std::find(legal.begin(), legal.end(), m) != legal.end();
}

void put_f32_le(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                   static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
  out.write(bytes, 4);
}

float get_f32_le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw Error("truncated tensor data");
  std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                       static_cast<std::uint32_t>(bytes[1]) << 8 |
                       static_cast<std::uint32_t>(bytes[2]) << 16 |
                       static_cast<std::uint32_t>(bytes[3]) << 24;
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

}  // namespace

std::span<const Move> action_table() { return tables().entries; }

ActionIndex encode_move(const Position& p, Move m) {
  if (!is_legal(p, m)) throw IllegalMove("encode_move: move is not legal");
  if (p.side_to_move() == Color::black)
    m = Move{mirror_square(m.from), mirror_square(m.to), m.promotion};
  const ActionTables& t = tables();
  int slot = m.from.index() * 64 + m.to.index();
  std::int16_t idx = -1;
  if (m.promotion && *m.promotion != PieceKind::queen)
    idx = t.under[slot][static_cast<int>(*m.promotion) - 1];
  else
    idx = t.plain[slot];
  if (idx < 0) throw IllegalMove("encode_move: move has no table entry");
  return ActionIndex{idx};
}

Move decode_move(const Position& p, ActionIndex index) {
  if (index.index < 0 || index.index >= kActionCount)
    throw IllegalMove("decode_move: index out of range");
  Move m = tables().entries[static_cast<std::size_t>(index.index)];
  if (p.side_to_move() == Color::black)
    m = Move{mirror_square(m.from), mirror_square(m.to), m.promotion};
  if (!m.promotion) {
    auto pc = p.piece_at(m.from);
    int last_rank = p.side_to_move() == Color::white ? 7 : 0;
    if (pc && pc->kind == PieceKind::pawn && m.to.rank() == last_rank)
      m.promotion = PieceKind::queen;
  }
  if (!is_legal(p, m)) throw IllegalMove("decode_move: move is not legal");
  return m;
}

std::size_t BoardTensor::index_of(int plane, int rank, int file) {
  if (plane < 0 || plane >= kTensorPlanes || rank < 0 || rank > 7 || file < 0 ||
      file > 7)
    throw Error("tensor coordinates out of range");
  return (static_cast<std::size_t>(plane) * 8 + static_cast<std::size_t>(rank)) * 8 +
         static_cast<std::size_t>(file);
}

BoardTensor encode_history(std::span<const Position> states,
                           const EncoderConfig& cfg) {
  if (states.empty()) throw InvalidHistory("history is empty");
  if (cfg.history_k < 1) throw InvalidHistory("history_k must be >= 1");
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    bool reachable = false;
    for (const Move& m : legal_moves(states[i]))
      if (detail::apply_unchecked(states[i], m) == states[i + 1]) {
        reachable = true;
        break;
      }
    if (!reachable)
      throw InvalidHistory("state " + std::to_string(i + 1) +
                           " is not one legal move after its predecessor");
  }

  const Position& current = states.back();
  bool flip = current.side_to_move() == Color::black;
  BoardTensor t;

  int slots = std::min<int>({8, cfg.history_k, static_cast<int>(states.size())});
  for (int slot = 0; slot < slots; ++slot) {
    std::size_t at = states.size() - 1 - static_cast<std::size_t>(slot);
    Position view = flip ? mirror(states[at]) : states[at];
    int base = slot * 13;
    for (int sq = 0; sq < 64; ++sq) {
      auto pc = view.piece_at(Square(sq));
      if (!pc) continue;
      int plane = base + (pc->color == Color::white ? 0 : 6) +
                  static_cast<int>(pc->kind);
      t.set(plane, Square(sq).rank(), Square(sq).file(), 1.0f);
    }
    bool repeated = false;
    for (std::size_t j = 0; j < at && !repeated; ++j)
      repeated = same_for_repetition(states[j], states[at]);
    if (repeated)
      for (int rank = 0; rank < 8; ++rank)
        for (int file = 0; file < 8; ++file) t.set(base + 12, rank, file, 1.0f);
  }

  Position view = flip ? mirror(current) : current;
  CastlingRights c = view.castling();
  const bool flags[4] = {c.white_kingside, c.white_queenside, c.black_kingside,
                         c.black_queenside};
  for (int i = 0; i < 4; ++i)
    if (flags[i])
      for (int rank = 0; rank < 8; ++rank)
        for (int file = 0; file < 8; ++file) t.set(104 + i, rank, file, 1.0f);

  // Plane 108 records the oriented side to move; orientation always puts the
  // mover on the white side, so it stays zero (as in canonicalized lc0
  // inputs) and the mirror symmetry of the encoding is exact.
  for (int rank = 0; rank < 8; ++rank)
    for (int file = 0; file < 8; ++file) {
      t.set(109, rank, file,
            static_cast<float>(current.halfmove_clock()) / 100.0f);
      t.set(111, rank, file, 1.0f);
    }
  return t;
}

void write_tensor(std::ostream& out, const BoardTensor& tensor) {
  out << "8 8 112\n";
  for (float v : tensor.data()) put_f32_le(out, v);
  if (!out) throw Error("failed to write tensor");
}

BoardTensor read_tensor(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("missing tensor header");
  if (header == "8 8 112\r") header.pop_back();
  if (header != "8 8 112")
    throw Error("unexpected tensor header: '" + header + "'");
  BoardTensor t;
  for (int plane = 0; plane < kTensorPlanes; ++plane)
    for (int rank = 0; rank < 8; ++rank)
      for (int file = 0; file < 8; ++file)
        t.set(plane, rank, file, get_f32_le(in));
  return t;
}

std::vector<AnnotationPair> extract_pairs(const GameRecord& g,
                                          const EncoderConfig& cfg) {
  std::vector<AnnotationPair> pairs;
  std::vector<Position> trace = g.positions();
  int window = cfg.history_k + 1;
  for (std::size_t t = 0; t < g.moves.size(); ++t) {
    std::string text;
    for (const std::string& comment : g.moves[t].comments) {
      std::string cleaned = clean_comment(comment);
      if (cleaned.empty()) continue;
      if (!text.empty()) text += ' ';
      text += cleaned;
    }
    if (text.empty()) continue;
    AnnotationPair pair;
    std::size_t first =
        t + 1 >= static_cast<std::size_t>(window) ? t + 1 - window : 0;
    pair.states.assign(trace.begin() + static_cast<std::ptrdiff_t>(first),
                       trace.begin() + static_cast<std::ptrdiff_t>(t + 1));
    pair.action = g.moves[t].move;
    pair.text = std::move(text);
    pair.ply = static_cast<int>(t);
    pair.pgn_prefix = format_movetext(g, static_cast<int>(t) + 1);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<ScoredSequence> search_moves(const Position& p,
                                         const SequenceScorer& scorer, int width,
                                         int depth) {
  if (width < 1) throw Error("search width must be >= 1");
  if (depth < 1) throw Error("search depth must be >= 1");

  struct Candidate {
    std::vector<Move> moves;
    std::vector<Position> trace;
    double score = 0.0;
    bool terminal = false;
  };

  std::vector<Candidate> beam;
  beam.push_back(Candidate{{}, {p}, 0.0, false});
  bool root = true;

  for (int level = 0; level < depth; ++level) {
    std::vector<Candidate> pool;
    bool expanded = false;
    for (Candidate& c : beam) {
      if (c.terminal) {
        pool.push_back(std::move(c));
        continue;
      }
      std::vector<Move> legal = legal_moves(c.trace.back());
      if (legal.empty()) {
        if (!root) pool.push_back(std::move(c));  // keep truncated sequences
        continue;
      }
      expanded = true;
      for (const Move& m : legal) {
        Candidate next;
        next.moves = c.moves;
        next.moves.push_back(m);
        next.trace = c.trace;
        next.trace.push_back(detail::apply_unchecked(c.trace.back(), m));
        next.terminal = !has_legal_move(next.trace.back());
        next.score = scorer(next.trace, next.moves);
        pool.push_back(std::move(next));
      }
    }
    root = false;
    if (!expanded && level > 0) {
      beam = std::move(pool);
      break;
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.score > b.score;
                     });
    if (static_cast<int>(pool.size()) > width)
      pool.resize(static_cast<std::size_t>(width));
    beam = std::move(pool);
    if (beam.empty()) break;  // no legal moves at the root
  }

  std::vector<ScoredSequence> out;
  out.reserve(beam.size());
  for (Candidate& c : beam)
    out.push_back(ScoredSequence{std::move(c.moves), c.score});
  return out;
}

}  // namespace chessbench
