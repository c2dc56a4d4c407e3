#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chessbench/taskgen.hpp"

namespace chessbench {

// 1 iff the response, normalized, equals any target verbatim. Normalization:
// trim surrounding whitespace, strip one trailing ".", and strip trailing
// "+"/"#" only when no target ends with one. When the full response does not
// match, its first whitespace-delimited token is normalized and compared the
// same way.
int exact_string_match(std::string_view response,
                       std::span<const std::string> targets);

// Target score of the choice the model ranked highest. Ties between model
// scores resolve to the earliest choice in instance order. Throws
// MissingChoice when a choice of the instance is absent from the map.
double multiple_choice_grade(const TaskInstance& instance,
                             const std::map<std::string, double>& model_scores);

// Byte-based edit distance (insert/delete/substitute, unit costs).
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - levenshtein(a,b) / max(|a|,|b|); 1.0 when both are empty.
double normalized_levenshtein(std::string_view a, std::string_view b);

enum class Metric { esm, mc, lev };

std::string_view to_string(Metric metric);
std::optional<Metric> metric_from_string(std::string_view name);

// Which metrics apply: multi-choice instances get mc; exact-match instances
// get esm, plus lev for the long-string kinds (FEN conversion and the
// synthetic modeling set).
std::vector<Metric> metrics_for(const TaskInstance& instance);

struct Aggregate {
  std::size_t n = 0;
  double mean = 0.0;
  double stderr_value = 0.0;  // sample standard deviation / sqrt(n); 0 for n<2
};

Aggregate aggregate(std::span<const double> scores);

// Percent style with one decimal: "29.5 ± 1.4".
std::string format_aggregate(const Aggregate& a);

// One model answer, matched to a TaskInstance by id. Generation-mode models
// fill `response`; choice-ranking models fill `choice_scores` (higher is
// better). Either satisfies any metric: a text response is mapped onto
// choices by closest normalized Levenshtein, and a choice ranking falls back
// to its best-ranked choice text.
struct ResponseRecord {
  std::string id;
  std::optional<std::string> response;
  std::map<std::string, double> choice_scores;
};

// One-line JSON with fields id, response, choice_scores (absent when unset).
std::string response_to_jsonl(const ResponseRecord& record);
ResponseRecord response_from_jsonl(std::string_view line);

struct ScoringConfig {
  // Per-kind ECMAScript regex applied to text responses before normalization:
  // the first capture group (or the whole match) replaces the response.
  // No-match leaves the response unchanged.
  std::vector<std::pair<TaskKind, std::string>> response_regex;
};

// Scores one response against one instance, one entry per applicable metric.
std::vector<std::pair<Metric, double>> score_item(
    const TaskInstance& instance, const ResponseRecord& record,
    const ScoringConfig& config = {});

// One aggregate row of the report: a (task kind, split, metric) cell.
struct EvalResult {
  TaskKind task_kind = TaskKind::modeling_synthetic;
  std::string split;  // "all", the source, or "<source> <length split>"
  Metric metric = Metric::esm;
  std::size_t n = 0;
  double mean = 0.0;
  double stderr_value = 0.0;
  std::vector<std::pair<std::string, double>> per_item;  // (instance id, score)
};

// Joins instances and responses by id (throws Error on unknown or missing
// ids), scores every pair, and aggregates per task kind, metric, and split.
// Split rows: "all" always; the metadata source; and "<source> <split>" when
// both metadata keys are present.
std::vector<EvalResult> score_responses(std::span<const TaskInstance> instances,
                                        std::span<const ResponseRecord> responses,
                                        const ScoringConfig& config = {});

// Fixed-width text table of the aggregate rows (no per-item detail).
std::string render_report(std::span<const EvalResult> results);

// JSON array of rows with fields task_kind, split, metric, n, mean, stderr,
// per_item.
std::string report_to_json(std::span<const EvalResult> results);

}  // namespace chessbench
