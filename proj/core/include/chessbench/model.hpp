#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chessbench/scoring.hpp"
#include "chessbench/taskgen.hpp"

namespace chessbench {

struct GenerationParams {
  double temperature = 0.7;
  int max_new_tokens = 128;
  double top_p = 0.7;
  int top_k = 50;
};

struct RetryPolicy {
  int max_attempts = 3;  // >= 1
  int backoff_ms = 200;  // doubled after each failed attempt
};

// Profile for a text-completion HTTP endpoint. Field names of the JSON
// payloads are configurable so one client covers differently shaped servers.
struct ModelEndpoint {
  enum class Mode { generate, choice_rank };

  std::string base_url;  // scheme://host[:port]
  std::string completion_path = "/v1/completions";
  std::string score_path = "/v1/score";
  std::string prompt_field = "prompt";
  std::string completion_field = "completion";
  std::string continuation_field = "continuation";
  std::string score_field = "score";
  // Wrapper applied around the assembled prompt; "{}" marks the insertion
  // point (e.g. "<human>: {}<bot>:").
  std::string prompt_wrapper = "{}";
  // Name of the environment variable holding a bearer token. The token value
  // is sent as an Authorization header and never written to any log.
  std::string auth_env;
  Mode mode = Mode::generate;
  GenerationParams params;
  RetryPolicy retry;
  double requests_per_sec = 0.0;  // 0 = no client-side rate limit
  int timeout_ms = 30000;
  int max_in_flight = 4;

  // Throws Error on violated invariants (empty base_url, max_attempts < 1,
  // nonpositive timeout, wrapper without "{}").
  void validate() const;
};

// Parses an endpoint profile from a JSON object. Unknown keys are rejected;
// absent keys keep their defaults. Throws Error on malformed input.
ModelEndpoint endpoint_from_json(std::string_view text);

// prompt_prefix + "\n" + input replaces "{}" in `wrapper`; when the
// instance's metadata has brace=true a "{" is appended to the wrapped result
// so the model continues inside the brace comment. An empty prompt_prefix
// contributes no newline.
std::string assemble_prompt(const TaskInstance& inst,
                            const std::string& wrapper = "{}");

// Receives one line per request/response pair. Lines contain the instance id
// and the exact prompt bytes sent; they never contain the auth token.
using LogSink = std::function<void(std::string_view line)>;

class CompletionClient {
 public:
  explicit CompletionClient(ModelEndpoint endpoint);
  ~CompletionClient();
  CompletionClient(CompletionClient&&) noexcept;
  CompletionClient& operator=(CompletionClient&&) noexcept;

  void set_log_sink(LogSink sink);

  // One completion for `prompt`. Retries transient failures (5xx, 429,
  // connection errors, timeouts) with exponential backoff; after
  // max_attempts throws HttpError(status), EndpointTimeout, or RateLimited.
  std::string complete(const std::string& prompt,
                       const std::string& instance_id = {});

  // Score of `continuation` following `prompt` via the scoring route.
  double score_choice(const std::string& prompt, const std::string& continuation,
                      const std::string& instance_id = {});

  // Scores for every choice of a multiple-choice instance, in instance
  // order. choice_rank mode issues one scoring call per choice; generate
  // mode issues one completion and marks the choice with the highest
  // normalized-Levenshtein similarity 1.0 (ties: first choice), others 0.
  std::vector<std::pair<std::string, double>> rank_choices(
      const TaskInstance& inst);

  // Full per-instance round trip: completion text for free-form tasks,
  // choice scores for multiple-choice ones.
  ResponseRecord respond(const TaskInstance& inst);

  const ModelEndpoint& endpoint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Offline response source; implementations are immutable after construction
// and safe to share across threads.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual ResponseRecord respond(const TaskInstance& inst) const = 0;
};

// kind is one of:
//   oracle         ground truth (first target / copy of target_scores)
//   random_legal   seeded uniform legal move (SAN) in the instance position
//   uniform_choice one-hot on a seeded uniform choice
//   engine_best    material evaluator's top-winrate move
// Per-instance draws depend only on (seed, instance id). Throws Error on an
// unknown kind.
std::shared_ptr<const Responder> builtin_responder(std::string_view kind,
                                                   std::uint64_t seed = 0);

}  // namespace chessbench
