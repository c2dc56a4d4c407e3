#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chessbench/chess.hpp"
#include "chessbench/encoding.hpp"
#include "chessbench/errors.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/rng.hpp"

namespace chessbench {

enum class TaskKind {
  state_tracking,
  uci_to_fen,
  pgn_to_fen,
  state_value,
  annotation_mc,
  opening2pgn,
  pgn2opening,
  checkmate_in_one,
  general_policy,
  modeling_synthetic,
};

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> task_kind_from_string(std::string_view name);

using MetaValue = std::variant<std::string, std::int64_t, double, bool>;

// Order-preserving key/value map for instance metadata (serialized as a JSON
// object in field order).
class Metadata {
 public:
  void set(std::string key, MetaValue value);  // upsert
  const MetaValue* find(std::string_view key) const;
  std::optional<std::string> get_string(std::string_view key) const;
  std::optional<std::int64_t> get_int(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  std::optional<double> get_double(std::string_view key) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<std::pair<std::string, MetaValue>> entries_;
};

// One evaluation or modeling item. Exactly one of targets / target_scores is
// populated: targets lists every accepted answer text, target_scores maps
// each choice (in presentation order) to its score in [0,1] with max 1.0.
struct TaskInstance {
  TaskKind task_kind = TaskKind::modeling_synthetic;
  std::string prompt_prefix;
  std::string input;
  std::vector<std::string> targets;
  std::vector<std::pair<std::string, double>> target_scores;
  Metadata metadata;

  // Convenience accessor for metadata["id"] ("" when unset).
  std::string id() const;
  bool is_multiple_choice() const { return !target_scores.empty(); }
};

// One-line JSON with field names exactly task_kind, prompt_prefix, input,
// targets, target_scores, metadata (no trailing newline). task_from_jsonl
// throws Error on malformed lines or constraint violations.
std::string task_to_jsonl(const TaskInstance& instance);
TaskInstance task_from_jsonl(std::string_view line);

// --- Elo stratification -----------------------------------------------------

struct EloBand {
  int lo = 0;
  int hi = 0;  // exclusive upper bound; invariant lo < hi
};

// The nine modeling-corpus bands: 0-1000, 1000-1200, ..., 2200-2400,
// 2400-3000.
std::vector<EloBand> default_elo_bands();
// The four prompt bands used by the policy evaluation: 700-1000, 1200-1500,
// 1700-2000, 2700-3000.
std::vector<EloBand> eval_elo_bands();

struct StratifyStats {
  int missing_elo = 0;  // games skipped for absent/unparseable Elo headers
};

// Seeded sampling without replacement of up to per_band games per band, keyed
// on the mean of WhiteElo and BlackElo. Output order: bands in input order,
// selected games in draw order. Deterministic for a fixed seed.
std::vector<GameRecord> stratify_by_elo(std::span<const GameRecord> games,
                                        std::span<const EloBand> bands,
                                        int per_band, std::uint64_t seed,
                                        StratifyStats* stats = nullptr);

// --- synthetic modeling dataset ---------------------------------------------

enum class ModelingTask {
  pgn_to_fen,
  uci_to_fen,
  fen_uci_to_san,
  fen_san_to_uci,
  fen_to_ascii,
  fen_uci_to_next_fen,
  fen_san_to_next_fen,
  fen_to_legal_san,
  fen_to_legal_uci,
  pgn_to_legal_san,
  pgn_to_legal_uci,
};
inline constexpr int kModelingTaskCount = 11;

std::string_view to_string(ModelingTask task);
std::optional<ModelingTask> modeling_task_from_string(std::string_view name);

// Natural-language phrasing pool: >= 3 instruction texts per modeling task.
struct ModelingTemplates {
  std::array<std::vector<std::string>, kModelingTaskCount> phrasings;
};

const ModelingTemplates& default_modeling_templates();
// Tab-separated "task_name<TAB>text" lines; '#' comment lines and blank
// lines ignored. Throws Error on unknown task names or missing coverage.
ModelingTemplates load_modeling_templates(std::istream& in);

// Emits one instance per (game, modeling task): the instruction is a seeded
// choice from the template pool, the cut ply is seeded uniform over
// [4, game length] (games shorter than 4 plies are skipped). Move-argument
// tasks use the last prefix move and the position before it; all other tasks
// use the position after the cut. Deterministic: every instance's randomness
// is keyed on (seed, base_index + local game index, task index) only, so
// generating a corpus in slices with matching base offsets is byte-identical
// to one call over the whole span.
std::vector<TaskInstance> gen_modeling(
    std::span<const GameRecord> games, std::uint64_t seed,
    const ModelingTemplates& templates = default_modeling_templates(),
    std::size_t base_index = 0);

// --- evaluation task construction -------------------------------------------

// Prefix-length split names: short <= 20 plies, medium 21-60, long > 60.
std::string_view length_split(int plies);

// Input = space-joined UCI prefix of cut_ply moves plus the from-square of
// the move at cut_ply; targets = every legal destination of the piece on
// that square. metadata carries split (prefix length) and source
// (real/synthetic, from the game's "Source" header).
TaskInstance make_state_tracking(const GameRecord& game, int cut_ply,
                                 std::uint64_t seed);

// kind selects uci_to_fen or pgn_to_fen; input = the move prefix in that
// notation; targets = [FEN after cut_ply].
TaskInstance make_fen_conversion(const GameRecord& game, int cut_ply,
                                 TaskKind kind);

// Three-choice advantage task from an engine-labeled white winrate:
// round(100*w) in 0-33 -> black advantage, 34-66 -> equal, 67-100 -> white
// advantage. brace_suffix only sets the prompt-suffix metadata flag.
TaskInstance make_state_value(const GameRecord& game, int cut_ply,
                              double white_winrate, bool brace_suffix = false);

// Four-choice annotation task for pairs[i]; the three distractor texts are a
// seeded sample of other pairs. Requires pairs.size() >= 4.
TaskInstance make_annotation_mc(std::span<const AnnotationPair> pairs,
                                std::size_t i, std::uint64_t seed);

struct OpeningRow {
  std::string eco;
  std::string name;
  std::string pgn;
};

// Tab-separated (eco, name, pgn) rows; a leading header row and blank lines
// are ignored. Throws Error on rows with the wrong column count.
std::vector<OpeningRow> load_openings_tsv(std::istream& in);

// Five-choice opening task for openings[i]; direction is opening2pgn
// (name -> PGN choices) or pgn2opening (PGN -> name choices, with the
// trailing " The opening name of this PGN is." sentence). Distractors are a
// seeded sample of other rows. Requires openings.size() >= 5.
TaskInstance make_opening_mc(std::span<const OpeningRow> openings, std::size_t i,
                             TaskKind direction, std::uint64_t seed);

// Both variants of the mate-in-one task at the position after cut_ply: a
// multiple-choice instance over all legal moves (every mating move scores
// 1.0) and an exact-string-match instance (targets = the mating moves).
// Mate SANs are rendered with "+" to match the published choice style. When
// hint is set, the input ends with " {Now white/black has checkmate in one
// move.}". Throws NoMateAvailable when no mating move exists.
std::vector<TaskInstance> make_checkmate_in_one(const GameRecord& game,
                                                int cut_ply, bool hint = false);

// Same two instances built directly from a puzzle position (no movetext);
// the input is the position's FEN.
std::vector<TaskInstance> make_checkmate_from_puzzle(const Position& p,
                                                     std::string_view puzzle_id,
                                                     bool hint = false);

// Rank-normalized policy task at the position after cut_ply. move_winrates
// must cover legal_moves exactly (mover's perspective); choices are SAN,
// ordered and scored by ascending winrate rank r/(N-1) (ties keep the
// deterministic move order; N=1 scores 1.0). color must equal the side to
// move and selects the "you play white/black" prompt; the input prepends the
// fixed header template with both Elos drawn inside elo_band.
TaskInstance make_general_policy(const GameRecord& game, int cut_ply,
                                 std::span<const std::pair<Move, double>> move_winrates,
                                 EloBand elo_band, Color color,
                                 std::uint64_t seed);

// Uniform random legal moves from the initial position until max_plies or a
// terminal state; carries a [Source "synthetic"] header so downstream tasks
// land in the "Syn" split.
GameRecord gen_random_game(std::uint64_t seed, int max_plies);

}  // namespace chessbench
