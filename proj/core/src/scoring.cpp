#include "chessbench/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>
#include <utility>

#include "json.hpp"

namespace chessbench {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string normalize_answer(std::string_view response, bool strip_checks) {
  std::string_view s = trim(response);
  if (!s.empty() && s.back() == '.') s.remove_suffix(1);
  if (strip_checks)
    while (!s.empty() && (s.back() == '+' || s.back() == '#')) s.remove_suffix(1);
  return std::string(s);
}

bool targets_end_checked(std::span<const std::string> targets) {
  return std::any_of(targets.begin(), targets.end(), [](const std::string& t) {
    return !t.empty() && (t.back() == '+' || t.back() == '#');
  });
}

bool matches_any(const std::string& normalized,
                 std::span<const std::string> targets) {
  return std::find(targets.begin(), targets.end(), normalized) != targets.end();
}

// Regexes of a ScoringConfig, compiled once per scoring run.
struct CompiledConfig {
  std::vector<std::pair<TaskKind, std::regex>> patterns;

  explicit CompiledConfig(const ScoringConfig& cfg) {
    for (const auto& [kind, text] : cfg.response_regex) {
      try {
        patterns.emplace_back(kind, std::regex(text));
      } catch (const std::regex_error& e) {
        throw Error("bad response regex for " + std::string(to_string(kind)) +
                    ": " + e.what());
      }
    }
  }

  std::string apply(TaskKind kind, const std::string& response) const {
    for (const auto& [k, re] : patterns) {
      if (k != kind) continue;
      std::smatch m;
      if (std::regex_search(response, m, re))
        return m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
      return response;
    }
    return response;
  }
};

// A text answer for esm/lev: the response verbatim, else the best-ranked
// choice of a choice_scores record (ties to lexicographically-first via map
// order).
std::optional<std::string> text_answer(const TaskInstance& instance,
                                       const ResponseRecord& record) {
  if (record.response) return *record.response;
  if (record.choice_scores.empty()) return std::nullopt;
  const std::string* best = nullptr;
  double best_score = 0.0;
  for (const auto& [choice, score] : record.choice_scores)
    if (!best || score > best_score) {
      best = &choice;
      best_score = score;
    }
  (void)instance;
  return *best;
}

// Choice scores for mc: the record's own map, else a one-hot vector on the
// instance choice closest to the text response (normalized Levenshtein,
// ties to the earliest choice).
std::map<std::string, double> choice_answer(const TaskInstance& instance,
                                            const ResponseRecord& record,
                                            const std::string& text) {
  if (!record.choice_scores.empty()) return record.choice_scores;
  std::map<std::string, double> scores;
  const std::pair<std::string, double>* best = nullptr;
  double best_sim = -1.0;
  for (const auto& entry : instance.target_scores) {
    scores[entry.first] = 0.0;
    const double sim = normalized_levenshtein(text, entry.first);
    if (sim > best_sim) {
      best_sim = sim;
      best = &entry;
    }
  }
  if (best) scores[best->first] = 1.0;
  return scores;
}

std::vector<std::pair<Metric, double>> score_item_compiled(
    const TaskInstance& instance, const ResponseRecord& record,
    const CompiledConfig& cfg) {
  std::vector<std::pair<Metric, double>> out;
  for (Metric metric : metrics_for(instance)) {
    switch (metric) {
      case Metric::esm:
      case Metric::lev: {
        auto text = text_answer(instance, record);
        if (!text)
          throw Error("response " + record.id + " carries no usable answer");
        const std::string extracted = cfg.apply(instance.task_kind, *text);
        if (metric == Metric::esm) {
          out.emplace_back(metric, exact_string_match(extracted, instance.targets));
        } else {
          double best = 0.0;
          const std::string trimmed{trim(extracted)};
          for (const auto& target : instance.targets)
            best = std::max(best, normalized_levenshtein(trimmed, target));
          out.emplace_back(metric, best);
        }
        break;
      }
      case Metric::mc: {
        std::string text;
        if (record.choice_scores.empty()) {
          auto t = text_answer(instance, record);
          if (!t)
            throw Error("response " + record.id + " carries no usable answer");
          text = cfg.apply(instance.task_kind, *t);
        }
        out.emplace_back(metric, multiple_choice_grade(
                                     instance, choice_answer(instance, record, text)));
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> split_labels(const TaskInstance& instance) {
  std::vector<std::string> labels{"all"};
  const auto source = instance.metadata.get_string("source");
  const auto split = instance.metadata.get_string("split");
  if (source) labels.push_back(*source);
  if (source && split) labels.push_back(*source + " " + *split);
  if (!source && split) labels.push_back(*split);
  return labels;
}

}  // namespace

int exact_string_match(std::string_view response,
                       std::span<const std::string> targets) {
  const bool strip_checks = !targets_end_checked(targets);
  if (matches_any(normalize_answer(response, strip_checks), targets)) return 1;

  // First-token fallback.
  std::string_view s = trim(response);
  const auto space = s.find_first_of(" \t\r\n");
  if (space == std::string_view::npos) return 0;  // already tried whole string
  return matches_any(normalize_answer(s.substr(0, space), strip_checks), targets)
             ? 1
             : 0;
}

double multiple_choice_grade(const TaskInstance& instance,
                             const std::map<std::string, double>& model_scores) {
  if (instance.target_scores.empty())
    throw Error("multiple_choice_grade needs a multi-choice instance");
  const std::pair<std::string, double>* best = nullptr;
  double best_model = 0.0;
  for (const auto& entry : instance.target_scores) {
    auto it = model_scores.find(entry.first);
    if (it == model_scores.end())
      throw MissingChoice("model scores miss choice '" + entry.first + "'");
    if (!best || it->second > best_model) {
      best = &entry;
      best_model = it->second;
    }
  }
  return best->second;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, subst});
    }
  }
  return row[b.size()];
}

double normalized_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::esm: return "esm";
    case Metric::mc: return "mc";
    case Metric::lev: return "lev";
  }
  return "?";
}

std::optional<Metric> metric_from_string(std::string_view name) {
  for (Metric m : {Metric::esm, Metric::mc, Metric::lev})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

std::vector<Metric> metrics_for(const TaskInstance& instance) {
  if (instance.is_multiple_choice()) return {Metric::mc};
  switch (instance.task_kind) {
    case TaskKind::uci_to_fen:
    case TaskKind::pgn_to_fen:
    case TaskKind::modeling_synthetic:
      return {Metric::esm, Metric::lev};
    default:
      return {Metric::esm};
  }
}

Aggregate aggregate(std::span<const double> scores) {
  Aggregate a;
  a.n = scores.size();
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double s : scores) sum += s;
  a.mean = sum / static_cast<double>(a.n);
  if (a.n < 2) return a;
  double ss = 0.0;
  for (double s : scores) ss += (s - a.mean) * (s - a.mean);
  const double sd = std::sqrt(ss / static_cast<double>(a.n - 1));
  a.stderr_value = sd / std::sqrt(static_cast<double>(a.n));
  return a;
}

std::string format_aggregate(const Aggregate& a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f \xC2\xB1 %.1f", 100.0 * a.mean,
                100.0 * a.stderr_value);
  return buf;
}

std::string response_to_jsonl(const ResponseRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  if (record.response) j["response"] = *record.response;
  if (!record.choice_scores.empty()) {
    ordered_json scores = ordered_json::object();
    for (const auto& [choice, score] : record.choice_scores) scores[choice] = score;
    j["choice_scores"] = std::move(scores);
  }
  return j.dump();
}

ResponseRecord response_from_jsonl(std::string_view line) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error("response line is not a JSON object");
  ResponseRecord r;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string())
    throw Error("response id missing or not a string");
  r.id = id->get<std::string>();
  if (auto it = j.find("response"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("response must be a string");
    r.response = it->get<std::string>();
  }
  if (auto it = j.find("choice_scores"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error("choice_scores must be an object");
    for (const auto& [choice, v] : it->items()) {
      if (!v.is_number()) throw Error("choice_scores values must be numbers");
      r.choice_scores[choice] = v.get<double>();
    }
  }
  if (!r.response && r.choice_scores.empty())
    throw Error("response " + r.id + " has neither response nor choice_scores");
  return r;
}

std::vector<std::pair<Metric, double>> score_item(const TaskInstance& instance,
                                                  const ResponseRecord& record,
                                                  const ScoringConfig& config) {
  return score_item_compiled(instance, record, CompiledConfig(config));
}

std::vector<EvalResult> score_responses(std::span<const TaskInstance> instances,
                                        std::span<const ResponseRecord> responses,
                                        const ScoringConfig& config) {
  const CompiledConfig cfg(config);

  struct Entry {
    const ResponseRecord* record;
    bool used = false;
  };
  std::map<std::string, Entry> by_id;
  for (const auto& r : responses) {
    if (!by_id.emplace(r.id, Entry{&r}).second)
      throw Error("duplicate response id '" + r.id + "'");
  }

  // (kind, metric, split) -> per-item scores, first-seen order preserved.
  struct Cell {
    std::vector<std::pair<std::string, double>> items;
  };
  std::map<std::tuple<int, int, std::string>, Cell> cells;
  std::vector<std::string> unanswered;
  for (const auto& instance : instances) {
    const std::string id = instance.id();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      unanswered.push_back(id);
      continue;
    }
    it->second.used = true;
    if (!unanswered.empty()) continue;  // already failing; just collect ids
    const auto scores = score_item_compiled(instance, *it->second.record, cfg);
    for (const auto& [metric, score] : scores)
      for (const auto& label : split_labels(instance))
        cells[{static_cast<int>(instance.task_kind), static_cast<int>(metric), label}]
            .items.emplace_back(id, score);
  }
  std::vector<std::string> orphans;
  for (const auto& [id, entry] : by_id)
    if (!entry.used) orphans.push_back(id);
  if (!unanswered.empty() || !orphans.empty()) {
    const auto list_ids = [](const std::vector<std::string>& ids) {
      std::string s;
      const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
      for (std::size_t i = 0; i < shown; ++i) {
        if (i) s += ", ";
        s += ids[i];
      }
      if (ids.size() > shown)
        s += ", ... (" + std::to_string(ids.size() - shown) + " more)";
      return s;
    };
    std::string what = "instance and response ids do not match:";
    if (!unanswered.empty())
      what += " " + std::to_string(unanswered.size()) +
              " instance(s) without a response [" + list_ids(unanswered) + "]";
    if (!orphans.empty()) {
      if (!unanswered.empty()) what += ";";
      what += " " + std::to_string(orphans.size()) +
              " response(s) without an instance [" + list_ids(orphans) + "]";
    }
    throw Error(what);
  }

  std::vector<EvalResult> out;
  for (auto& [key, cell] : cells) {
    EvalResult r;
    r.task_kind = static_cast<TaskKind>(std::get<0>(key));
    r.metric = static_cast<Metric>(std::get<1>(key));
    r.split = std::get<2>(key);
    std::vector<double> values;
    values.reserve(cell.items.size());
    for (const auto& [id, s] : cell.items) values.push_back(s);
    const Aggregate a = aggregate(values);
    r.n = a.n;
    r.mean = a.mean;
    r.stderr_value = a.stderr_value;
    r.per_item = std::move(cell.items);
    out.push_back(std::move(r));
  }
  // "all" rows ahead of named splits within each (kind, metric).
  std::stable_sort(out.begin(), out.end(),
                   [](const EvalResult& a, const EvalResult& b) {
                     if (a.task_kind != b.task_kind) return a.task_kind < b.task_kind;
                     if (a.metric != b.metric) return a.metric < b.metric;
                     if ((a.split == "all") != (b.split == "all")) return a.split == "all";
                     return a.split < b.split;
                   });
  return out;
}

std::string render_report(std::span<const EvalResult> results) {
  std::size_t kind_w = 4, split_w = 5;
  for (const auto& r : results) {
    kind_w = std::max(kind_w, to_string(r.task_kind).size());
    split_w = std::max(split_w, r.split.size());
  }
  std::string out;
  auto pad = [&out](std::string_view s, std::size_t w) {
    out += s;
    out.append(w > s.size() ? w - s.size() : 0, ' ');
    out += "  ";
  };
  pad("task", kind_w);
  pad("split", split_w);
  pad("metric", 6);
  pad("n", 6);
  out += "score\n";
  for (const auto& r : results) {
    pad(to_string(r.task_kind), kind_w);
    pad(r.split, split_w);
    pad(to_string(r.metric), 6);
    pad(std::to_string(r.n), 6);
    out += format_aggregate({r.n, r.mean, r.stderr_value});
    out += '\n';
  }
  return out;
}

std::string report_to_json(std::span<const EvalResult> results) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : results) {
    ordered_json row;
    row["task_kind"] = std::string(to_string(r.task_kind));
    row["split"] = r.split;
    row["metric"] = std::string(to_string(r.metric));
    row["n"] = r.n;
    row["mean"] = r.mean;
    row["stderr"] = r.stderr_value;
    ordered_json items = ordered_json::array();
    for (const auto& [id, score] : r.per_item) {
      ordered_json item;
      item["id"] = id;
      item["score"] = score;
      items.push_back(std::move(item));
    }
    row["per_item"] = std::move(items);
    arr.push_back(std::move(row));
  }
  return arr.dump(2);
}

}  // namespace chessbench
