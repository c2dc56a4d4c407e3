#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chessbench/chess.hpp"
#include "chessbench/errors.hpp"

namespace chessbench {

// --- FEN -----------------------------------------------------------------

// Parses all six FEN fields; throws FenError (with field name and byte
// offset) on malformed placement, impossible piece counts, invalid
// castling/en-passant combinations, or counters out of range.
Position parse_fen(std::string_view fen);

// Canonical six-field FEN. Castling is emitted in KQkq order; the
// en-passant square is always emitted after a double push (python-chess
// convention), independent of whether a capture is possible.
std::string format_fen(const Position& p);

// --- single moves ----------------------------------------------------------

// Parses SAN relative to a position. Accepts the usual liberties seen in
// real corpora: "0-0" for "O-O", omitted "=" before a promotion piece, and
// trailing check/mate/annotation glyphs. Throws SanError when the text is
// unparseable, matches no legal move, or is ambiguous.
Move parse_san(const Position& p, std::string_view san);

// Canonical SAN with minimal disambiguation and a validated "+"/"#" suffix.
// Throws IllegalMove if m is not legal in p.
std::string format_san(const Position& p, Move m);

// "e2e4", "a7a8q". Throws UciError (token_index 0).
Move parse_uci_move(std::string_view text);
std::string format_uci(Move m);

// Applies a whitespace-separated UCI move line from the initial position
// and returns the position trace (n moves -> n+1 positions, startpos
// first). Throws UciError with the index of the offending token.
std::vector<Position> parse_uci_line(std::string_view moves);

// --- PGN -------------------------------------------------------------------

enum class GameResult { white_win, black_win, draw, unknown };

std::string_view to_string(GameResult r);

struct TimedMove {
  Move move;
  std::string san;                    // canonical SAN (recomputed at parse)
  std::string suffix;                 // "!", "??", "!?", ... as written
  std::vector<int> nags;              // numeric annotation glyphs ($3 -> 3)
  std::vector<std::string> comments;  // brace comments following the move
};

struct GameRecord {
  std::vector<std::pair<std::string, std::string>> headers;
  std::vector<std::string> start_comments;  // comments before the first move
  std::vector<TimedMove> moves;
  GameResult result = GameResult::unknown;
  int variation_count = 0;  // parenthesized variations seen (content skipped)

  std::optional<std::string> header(std::string_view name) const;
  // Position the movetext starts from: the FEN header if present, else the
  // standard initial position.
  Position initial_position() const;
  // Replay trace: moves.size() + 1 positions, initial position first.
  std::vector<Position> positions() const;
};

struct PgnOptions {
  // When set, malformed games are skipped with a warning instead of
  // throwing PgnError.
  bool lenient = false;
};

// Streaming PGN reader; games are parsed one at a time so corpora never
// need to fit in memory.
class PgnReader {
 public:
  explicit PgnReader(std::istream& in, PgnOptions options = {});

  // Next game, or nullopt at end of input. Strict mode throws PgnError
  // (with line/column); lenient mode records a warning and resynchronizes
  // at the next game.
  std::optional<GameRecord> next();

  std::span<const std::string> warnings() const { return warnings_; }

 private:
  struct Token;
  Token next_token();
  void skip_variation();
  std::optional<GameRecord> parse_game();
  int get();
  int peek();

  std::istream& in_;
  PgnOptions options_;
  std::vector<std::string> warnings_;
  int line_ = 1;
  int column_ = 0;
  bool peeked_ = false;
  int peek_char_ = -1;
  // A header token seen while reading movetext belongs to the next game.
  bool carried_header_ = false;
  std::string carried_name_;
  std::string carried_value_;
};

struct PgnParseOutcome {
  std::vector<GameRecord> games;
  std::vector<std::string> warnings;
};

// Parses a whole PGN document (possibly many games).
PgnParseOutcome parse_pgn(std::string_view text, const PgnOptions& options = {});

// Headers, movetext with move numbers, comments, NAGs, suffixes, and the
// result token; lines wrapped at 80 columns. parse∘format∘parse is a fixed
// point.
std::string format_pgn(const GameRecord& g);

// Single-line numbered SAN movetext of the first `plies` moves, without
// headers, comments, annotations, or result (e.g. "1. e4 c5 2. Nf3").
// Negative or past-the-end `plies` renders every move.
std::string format_movetext(const GameRecord& g, int plies = -1);

// --- comment cleaning --------------------------------------------------------

// Removes clock/arrow/evp annotation directives ([%clk ...], [%arrow ...],
// [%cal ...], [%csl ...], [%evp ...]) while keeping [%eval ...], strips
// emoji, and collapses whitespace. Idempotent; may return an empty string.
std::string clean_comment(std::string_view comment);

// clean_comment over every comment of the game; empty results are dropped.
GameRecord clean_comments(const GameRecord& g);

// --- boards -----------------------------------------------------------------

// 8 lines, rank 8 first; pieces as FEN letters, empty squares as '.',
// single spaces between files, trailing newline per rank.
std::string ascii_board(const Position& p);

}  // namespace chessbench
