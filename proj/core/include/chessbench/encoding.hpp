#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "chessbench/chess.hpp"
#include "chessbench/errors.hpp"
#include "chessbench/notation.hpp"

namespace chessbench {

inline constexpr int kActionCount = 1858;
inline constexpr int kTensorPlanes = 112;

struct EncoderConfig {
  // Number of history slots populated in the board tensor (the tensor always
  // has 8 slots; values above 8 behave like 8). Also sets the state-window
  // length (history_k + 1) used by extract_pairs.
  int history_k = 8;
};

// The fixed 1858-entry move table, from the white perspective. Order:
// for each from-square a1..h8, queen-geometry rays in direction order
// N, NE, E, SE, S, SW, W, NW with distances 1..7 (board-clipped), then
// knight jumps clockwise from NNE; after all from-squares, underpromotions
// ordered by from-file a..h, direction (capture towards a-file, push,
// capture towards h-file), promotion piece (knight, bishop, rook).
// Queen promotions share the plain from/to entry.
std::span<const Move> action_table();

struct ActionIndex {
  int index = 0;  // in [0, kActionCount)
  friend constexpr auto operator<=>(ActionIndex, ActionIndex) = default;
};

// Index of a legal move in the action table. The board is oriented from the
// side to move's perspective: with black to move, squares are mirrored
// before lookup. Queen promotions map to the plain from/to entry.
// Throws IllegalMove when m is not legal in p.
ActionIndex encode_move(const Position& p, Move m);

// Inverse of encode_move for the given position (resolves queen promotions
// and undoes the black-to-move mirror). Throws IllegalMove when the decoded
// move is not legal in p.
Move decode_move(const Position& p, ActionIndex index);

// 8x8x112 plane stack. Layout: 8 history slots (newest first), each
// [our P,N,B,R,Q,K, their P,N,B,R,Q,K, repetition] = 13 planes, then
// [our kingside castling, our queenside, their kingside, their queenside,
// side to move, halfmove_clock / 100, zeros, ones].
// "Our" is the side to move of the newest state; with black to move all
// slots are mirrored so our pieces advance up the board. Because of that
// orientation the side-to-move plane is always zero (the mover is always
// "white" after mirroring), which makes the encoding exactly symmetric
// under color flips.
class BoardTensor {
 public:
  BoardTensor() : data_(static_cast<std::size_t>(kTensorPlanes) * 64, 0.0f) {}

  float at(int plane, int rank, int file) const {
    return data_[index_of(plane, rank, file)];
  }
  void set(int plane, int rank, int file, float value) {
    data_[index_of(plane, rank, file)] = value;
  }
  // Flat plane-major view: index = (plane * 8 + rank) * 8 + file.
  std::span<const float> data() const { return data_; }

  friend bool operator==(const BoardTensor&, const BoardTensor&) = default;

 private:
  static std::size_t index_of(int plane, int rank, int file);
  std::vector<float> data_;
};

// Encodes a consecutive position history (oldest first, current position
// last). Slots beyond the history are zero-filled; states older than the
// populated slots still feed repetition detection. Throws InvalidHistory
// when states is empty or any adjacent pair is not one legal move apart.
BoardTensor encode_history(std::span<const Position> states,
                           const EncoderConfig& cfg = {});

// Binary tensor format: one header line "8 8 112\n" followed by
// 112*8*8 little-endian 32-bit floats in (plane, rank, file) order.
void write_tensor(std::ostream& out, const BoardTensor& tensor);
BoardTensor read_tensor(std::istream& in);

// One (state window, action, annotation) sample from an annotated game.
struct AnnotationPair {
  std::vector<Position> states;  // <= history_k + 1, ending just before action
  Move action;                   // legal in states.back()
  std::string text;              // cleaned, non-empty
  int ply = 0;                   // 0-based index of the annotated move
  // Numbered SAN movetext through the annotated move, comments stripped;
  // used verbatim as the input of annotation tasks.
  std::string pgn_prefix;
};

// One pair per move carrying at least one comment that is non-empty after
// clean_comment; multiple comments on a move are joined with single spaces.
std::vector<AnnotationPair> extract_pairs(const GameRecord& g,
                                          const EncoderConfig& cfg = {});

struct ScoredSequence {
  std::vector<Move> moves;
  double score = 0.0;
};

// Scores a candidate move sequence against its position trace. The trace has
// moves.size() + 1 entries: trace[0] is the search root and trace[i] follows
// moves[i-1]. Scorers must be safe to call from multiple threads; the search
// may parallelize beam expansion.
using SequenceScorer =
    std::function<double(std::span<const Position>, std::span<const Move>)>;

// Beam search over legal move sequences: keeps the `width` best-scoring
// sequences per level, expands to length <= depth (terminal positions
// truncate sequences), and returns up to `width` results sorted by score
// descending, ties broken by deterministic move order. width = 1 is greedy
// search.
std::vector<ScoredSequence> search_moves(const Position& p,
                                         const SequenceScorer& scorer, int width,
                                         int depth);

}  // namespace chessbench
