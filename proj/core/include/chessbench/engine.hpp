#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chessbench/chess.hpp"

namespace chessbench {

// The paper's labeling depth and a faster default for local runs.
inline constexpr int kPaperDepth = 18;
inline constexpr int kDeskDepth = 12;

// An engine score, normalized to white's perspective (the UCI wire reports
// scores for the side to move; evaluate() flips them). mate_in is the signed
// mate distance: positive means white mates. A side already mated reports
// distance 1 ("mate 0" has no nonzero encoding).
struct EngineEval {
  enum class Kind { centipawns, mate_in };
  Kind kind = Kind::centipawns;
  int value = 0;
  int depth = 1;

  friend bool operator==(const EngineEval&, const EngineEval&) = default;
};

struct EngineConfig {
  // Path or command name of a UCI engine, or "builtin:material" for the
  // in-process evaluator.
  std::string executable = "builtin:material";
  std::optional<int> depth = kPaperDepth;  // plies for "go depth"
  std::optional<int> move_time_ms;         // alternative: "go movetime"
  int hash_mb = 16;
  int threads = 1;
  int timeout_ms = 30000;  // per-reply deadline (handshake and evaluate)

  // Throws Error unless exactly one of depth/move_time_ms is set and every
  // numeric field is positive.
  void validate() const;
};

// Centipawns (white's perspective) -> white winrate via the logistic map
// 1 / (1 + exp(-0.00368208 * cp)).
double winrate_from_cp(double cp);

// White winrate of an evaluation; mate_in maps to exactly 1.0 / 0.0.
double winrate(const EngineEval& eval);

class Evaluator {
 public:
  virtual ~Evaluator() = default;

  // White-perspective evaluation of the position.
  virtual EngineEval evaluate(const Position& p) = 0;
};

// Deterministic in-process fallback: 100 cp per point of material
// difference (1/3/3/5/9), mate-aware one ply ahead. Stateless and
// thread-safe.
class MaterialEvaluator : public Evaluator {
 public:
  EngineEval evaluate(const Position& p) override;
};

// One UCI engine child process. Single-owner: a session may be moved across
// threads but never shared. The destructor sends "quit" and reaps the child.
class EngineSession : public Evaluator {
 public:
  explicit EngineSession(EngineConfig cfg);
  ~EngineSession() override;
  EngineSession(EngineSession&&) noexcept;
  EngineSession& operator=(EngineSession&&) noexcept;
  EngineSession(const EngineSession&) = delete;
  EngineSession& operator=(const EngineSession&) = delete;

  // Spawns the process and completes the uci/isready handshake; evaluate()
  // calls this lazily. Throws SpawnError, HandshakeTimeout,
  // ProtocolViolation.
  void open();
  bool is_open() const;

  // "position fen <fen>" + "go", then the last "info ... score" before
  // "bestmove", flipped to white's perspective. Throws EngineTimeout,
  // EngineParseError, ProtocolViolation.
  EngineEval evaluate(const Position& p) override;

  const EngineConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// MaterialEvaluator for "builtin:material", otherwise an EngineSession.
// The config is validated; unknown "builtin:" names throw Error.
std::unique_ptr<Evaluator> make_evaluator(const EngineConfig& cfg);

// Winrate of every legal move from the mover's perspective (1 - white
// winrate when black moves), in deterministic legal-move order. Engine
// errors are rethrown as EngineError with the offending move attached.
std::vector<std::pair<Move, double>> rank_moves(Evaluator& eval,
                                                const Position& p);

// Wire-level parsers, exposed for protocol tests. Values are exactly as on
// the wire: the side to move's perspective, no flipping.
namespace uci {

struct InfoScore {
  enum class Kind { cp, mate };
  Kind kind = Kind::cp;
  int value = 0;
  int depth = 0;  // 0 when the line carries no depth token

  friend bool operator==(const InfoScore&, const InfoScore&) = default;
};

// The score of an "info ..." line; nullopt for other lines or info lines
// without a score.
std::optional<InfoScore> parse_info_line(std::string_view line);

// The move token of a "bestmove ..." line (may be "(none)"); nullopt for
// other lines.
std::optional<std::string> parse_bestmove(std::string_view line);

}  // namespace uci

}  // namespace chessbench
