#include "chessbench/model.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "chessbench/chess.hpp"
#include "chessbench/engine.hpp"
#include "chessbench/errors.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/rng.hpp"

namespace chessbench {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ModelEndpoint::Mode mode_from_string(const std::string& s) {
  if (s == "generate") return ModelEndpoint::Mode::generate;
  if (s == "choice_rank") return ModelEndpoint::Mode::choice_rank;
  throw Error("unknown endpoint mode '" + s + "'");
}

}  // namespace

void ModelEndpoint::validate() const {
  if (base_url.empty()) throw Error("endpoint base_url is empty");
  if (retry.max_attempts < 1) throw Error("retry.max_attempts must be >= 1");
  if (retry.backoff_ms < 0) throw Error("retry.backoff_ms must be >= 0");
  if (timeout_ms <= 0) throw Error("timeout_ms must be positive");
  if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
  if (requests_per_sec < 0) throw Error("requests_per_sec must be >= 0");
  if (params.max_new_tokens <= 0) throw Error("max_new_tokens must be positive");
  if (prompt_wrapper.find("{}") == std::string::npos)
    throw Error("prompt_wrapper has no \"{}\" placeholder");
}

ModelEndpoint endpoint_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(std::string("endpoint profile is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("endpoint profile must be a JSON object");

  ModelEndpoint ep;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "base_url") ep.base_url = value.get<std::string>();
      else if (key == "completion_path") ep.completion_path = value.get<std::string>();
      else if (key == "score_path") ep.score_path = value.get<std::string>();
      else if (key == "prompt_field") ep.prompt_field = value.get<std::string>();
      else if (key == "completion_field") ep.completion_field = value.get<std::string>();
      else if (key == "continuation_field") ep.continuation_field = value.get<std::string>();
      else if (key == "score_field") ep.score_field = value.get<std::string>();
      else if (key == "prompt_wrapper") ep.prompt_wrapper = value.get<std::string>();
      else if (key == "auth_env") ep.auth_env = value.get<std::string>();
      else if (key == "mode") ep.mode = mode_from_string(value.get<std::string>());
      else if (key == "requests_per_sec") ep.requests_per_sec = value.get<double>();
      else if (key == "timeout_ms") ep.timeout_ms = value.get<int>();
      else if (key == "max_in_flight") ep.max_in_flight = value.get<int>();
      else if (key == "params") {
        for (const auto& [pk, pv] : value.items()) {
          if (pk == "temperature") ep.params.temperature = pv.get<double>();
          else if (pk == "max_new_tokens") ep.params.max_new_tokens = pv.get<int>();
          else if (pk == "top_p") ep.params.top_p = pv.get<double>();
          else if (pk == "top_k") ep.params.top_k = pv.get<int>();
          else throw Error("unknown key 'params." + pk + "' in endpoint profile");
        }
      } else if (key == "retry") {
        for (const auto& [rk, rv] : value.items()) {
          if (rk == "max_attempts") ep.retry.max_attempts = rv.get<int>();
          else if (rk == "backoff_ms") ep.retry.backoff_ms = rv.get<int>();
          else throw Error("unknown key 'retry." + rk + "' in endpoint profile");
        }
      } else {
        throw Error("unknown key '" + key + "' in endpoint profile");
      }
    }
  } catch (const ordered_json::type_error& e) {
    throw Error(std::string("endpoint profile: ") + e.what());
  }
  ep.validate();
  return ep;
}

std::string assemble_prompt(const TaskInstance& inst, const std::string& wrapper) {
  const std::size_t at = wrapper.find("{}");
  if (at == std::string::npos)
    throw Error("prompt wrapper has no \"{}\" placeholder");
  std::string core = inst.prompt_prefix;
  if (!core.empty()) core += '\n';
  core += inst.input;
  std::string prompt =
      wrapper.substr(0, at) + core + wrapper.substr(at + 2);
  if (inst.metadata.get_bool("brace").value_or(false)) prompt += '{';
  return prompt;
}

// --- CompletionClient ------------------------------------------------------

struct CompletionClient::Impl {
  ModelEndpoint ep;
  std::string token;  // resolved from auth_env once; never written to logs
  LogSink sink;
  std::mutex log_mu;

  std::mutex gate_mu;
  std::condition_variable gate_cv;
  int in_flight = 0;

  std::mutex rate_mu;
  std::chrono::steady_clock::time_point next_slot =
      std::chrono::steady_clock::now();

  explicit Impl(ModelEndpoint e) : ep(std::move(e)) {
    ep.validate();
    if (!ep.auth_env.empty()) {
      if (const char* v = std::getenv(ep.auth_env.c_str())) token = v;
    }
  }

  void log(const std::string& line) {
    std::lock_guard lk(log_mu);
    if (sink) sink(line);
  }

  void wait_rate_slot() {
    if (ep.requests_per_sec <= 0) return;
    const auto interval =
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / ep.requests_per_sec));
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lk(rate_mu);
      slot = std::max(next_slot, std::chrono::steady_clock::now());
      next_slot = slot + interval;
    }
    std::this_thread::sleep_until(slot);
  }

  // Bounds concurrent HTTP requests to ep.max_in_flight.
  struct Gate {
    Impl& self;
    explicit Gate(Impl& s) : self(s) {
      std::unique_lock lk(self.gate_mu);
      self.gate_cv.wait(lk, [&] { return self.in_flight < self.ep.max_in_flight; });
      ++self.in_flight;
    }
    ~Gate() {
      {
        std::lock_guard lk(self.gate_mu);
        --self.in_flight;
      }
      self.gate_cv.notify_one();
    }
  };

  ordered_json post(const std::string& path, const ordered_json& payload,
                    const std::string& instance_id) {
    const std::string body = payload.dump();
    log("request id=" + instance_id + " path=" + path + " body=" + body);

    enum class Fail { none, timeout, rate_limited, http, connection };
    Fail last = Fail::none;
    int last_status = 0;
    std::string last_detail;

    for (int attempt = 1; attempt <= ep.retry.max_attempts; ++attempt) {
      if (attempt > 1) {
        const int shift = std::min(attempt - 2, 20);
        std::this_thread::sleep_for(std::chrono::milliseconds(
            static_cast<long long>(ep.retry.backoff_ms) << shift));
      }
      wait_rate_slot();
      Gate gate(*this);

      httplib::Client cli(ep.base_url);
      const auto timeout = std::chrono::milliseconds(ep.timeout_ms);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

      auto res = cli.Post(path, headers, body, "application/json");
      if (!res) {
        const auto err = res.error();
        last_detail = httplib::to_string(err);
        last = (err == httplib::Error::ConnectionTimeout ||
                err == httplib::Error::Read)
                   ? Fail::timeout
                   : Fail::connection;
        log("response id=" + instance_id + " error=" + last_detail);
        continue;
      }
      log("response id=" + instance_id + " status=" +
          std::to_string(res->status) + " body=" + res->body);
      if (res->status == 429) {
        last = Fail::rate_limited;
        last_status = 429;
        continue;
      }
      if (res->status >= 500) {
        last = Fail::http;
        last_status = res->status;
        continue;
      }
      if (res->status < 200 || res->status >= 300)
        throw HttpError("endpoint " + ep.base_url + path + " returned status " +
                            std::to_string(res->status),
                        res->status);
      try {
        return ordered_json::parse(res->body);
      } catch (const ordered_json::parse_error& e) {
        throw HttpError("endpoint returned a malformed body: " +
                            std::string(e.what()),
                        res->status);
      }
    }

    const std::string where = ep.base_url + path;
    const std::string tries =
        " after " + std::to_string(ep.retry.max_attempts) + " attempts";
    switch (last) {
      case Fail::timeout:
        throw EndpointTimeout("no response from " + where + tries + " (" +
                              last_detail + ")");
      case Fail::rate_limited:
        throw RateLimited("rate limited by " + where + tries);
      case Fail::http:
        throw HttpError("endpoint " + where + " returned status " +
                            std::to_string(last_status) + tries,
                        last_status);
      default:
        throw HttpError("cannot reach " + where + tries + " (" + last_detail + ")",
                        0);
    }
  }
};

CompletionClient::CompletionClient(ModelEndpoint endpoint)
    : impl_(std::make_unique<Impl>(std::move(endpoint))) {}
CompletionClient::~CompletionClient() = default;
CompletionClient::CompletionClient(CompletionClient&&) noexcept = default;
CompletionClient& CompletionClient::operator=(CompletionClient&&) noexcept =
    default;

void CompletionClient::set_log_sink(LogSink sink) {
  std::lock_guard lk(impl_->log_mu);
  impl_->sink = std::move(sink);
}

const ModelEndpoint& CompletionClient::endpoint() const { return impl_->ep; }

std::string CompletionClient::complete(const std::string& prompt,
                                       const std::string& instance_id) {
  const auto& ep = impl_->ep;
  ordered_json payload{{ep.prompt_field, prompt},
                       {"temperature", ep.params.temperature},
                       {"max_new_tokens", ep.params.max_new_tokens},
                       {"top_p", ep.params.top_p},
                       {"top_k", ep.params.top_k}};
  const ordered_json reply = impl_->post(ep.completion_path, payload, instance_id);
  const auto it = reply.find(ep.completion_field);
  if (it == reply.end() || !it->is_string())
    throw HttpError("completion response has no text field '" +
                        ep.completion_field + "'",
                    200);
  return it->get<std::string>();
}

double CompletionClient::score_choice(const std::string& prompt,
                                      const std::string& continuation,
                                      const std::string& instance_id) {
  const auto& ep = impl_->ep;
  ordered_json payload{{ep.prompt_field, prompt},
                       {ep.continuation_field, continuation}};
  const ordered_json reply = impl_->post(ep.score_path, payload, instance_id);
  const auto it = reply.find(ep.score_field);
  if (it == reply.end() || !it->is_number())
    throw HttpError("score response has no numeric field '" + ep.score_field + "'",
                    200);
  return it->get<double>();
}

std::vector<std::pair<std::string, double>> CompletionClient::rank_choices(
    const TaskInstance& inst) {
  if (!inst.is_multiple_choice())
    throw Error("rank_choices requires a multiple-choice instance");
  const std::string prompt = assemble_prompt(inst, impl_->ep.prompt_wrapper);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(inst.target_scores.size());
  if (impl_->ep.mode == ModelEndpoint::Mode::choice_rank) {
    for (const auto& [choice, unused] : inst.target_scores)
      out.emplace_back(choice, score_choice(prompt, choice, inst.id()));
    return out;
  }
  const std::string text = complete(prompt, inst.id());
  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < inst.target_scores.size(); ++i) {
    const double sim = normalized_levenshtein(text, inst.target_scores[i].first);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  for (std::size_t i = 0; i < inst.target_scores.size(); ++i)
    out.emplace_back(inst.target_scores[i].first, i == best ? 1.0 : 0.0);
  return out;
}

ResponseRecord CompletionClient::respond(const TaskInstance& inst) {
  ResponseRecord record;
  record.id = inst.id();
  if (inst.is_multiple_choice()) {
    for (auto& [choice, score] : rank_choices(inst))
      record.choice_scores.emplace(std::move(choice), score);
  } else {
    record.response = complete(assemble_prompt(inst, impl_->ep.prompt_wrapper),
                               inst.id());
  }
  return record;
}

// --- builtin responders ------------------------------------------------------

namespace {

Rng instance_rng(std::uint64_t seed, const TaskInstance& inst) {
  return Rng(seed ^ fnv1a(inst.id()));
}

std::string require_fen(const TaskInstance& inst) {
  if (auto fen = inst.metadata.get_string("fen")) return *fen;
  throw Error("instance '" + inst.id() + "' has no fen metadata");
}

class OracleResponder : public Responder {
 public:
  ResponseRecord respond(const TaskInstance& inst) const override {
    ResponseRecord record;
    record.id = inst.id();
    if (inst.is_multiple_choice()) {
      record.choice_scores.insert(inst.target_scores.begin(),
                                  inst.target_scores.end());
    } else {
      if (inst.targets.empty())
        throw Error("instance '" + inst.id() + "' has no targets");
      record.response = inst.targets.front();
    }
    return record;
  }
};

class RandomLegalResponder : public Responder {
 public:
  explicit RandomLegalResponder(std::uint64_t seed) : seed_(seed) {}

  ResponseRecord respond(const TaskInstance& inst) const override {
    const Position p = parse_fen(require_fen(inst));
    const auto moves = legal_moves(p);
    if (moves.empty())
      throw Error("instance '" + inst.id() + "' has no legal moves");
    Rng rng = instance_rng(seed_, inst);
    const Move pick = moves[rng.below(moves.size())];
    ResponseRecord record;
    record.id = inst.id();
    record.response = format_san(p, pick);
    return record;
  }

 private:
  std::uint64_t seed_;
};

class UniformChoiceResponder : public Responder {
 public:
  explicit UniformChoiceResponder(std::uint64_t seed) : seed_(seed) {}

  ResponseRecord respond(const TaskInstance& inst) const override {
    if (!inst.is_multiple_choice())
      throw Error("uniform_choice requires a multiple-choice instance");
    Rng rng = instance_rng(seed_, inst);
    const std::size_t pick = rng.below(inst.target_scores.size());
    ResponseRecord record;
    record.id = inst.id();
    for (std::size_t i = 0; i < inst.target_scores.size(); ++i)
      record.choice_scores.emplace(inst.target_scores[i].first,
                                   i == pick ? 1.0 : 0.0);
    return record;
  }

 private:
  std::uint64_t seed_;
};

class EngineBestResponder : public Responder {
 public:
  ResponseRecord respond(const TaskInstance& inst) const override {
    const Position p = parse_fen(require_fen(inst));
    auto ranked = rank_moves(evaluator_, p);
    if (ranked.empty())
      throw Error("instance '" + inst.id() + "' has no legal moves");

    ResponseRecord record;
    record.id = inst.id();
    if (inst.task_kind == TaskKind::state_tracking) {
      // The question fixes the from-square (last token of the input); answer
      // with the best destination from that square.
      const auto cut = inst.input.find_last_of(' ');
      const auto from = Square::parse(
          cut == std::string::npos ? inst.input : inst.input.substr(cut + 1));
      if (!from)
        throw Error("instance '" + inst.id() + "' input has no from-square");
      const Move* best = nullptr;
      double best_w = -1.0;
      for (const auto& [m, w] : ranked) {
        if (m.from == *from && w > best_w) {
          best_w = w;
          best = &m;
        }
      }
      if (!best)
        throw Error("instance '" + inst.id() + "' from-square has no moves");
      record.response = best->to.name();
      return record;
    }
    const Move* best = nullptr;
    double best_w = -1.0;
    for (const auto& [m, w] : ranked) {
      if (w > best_w) {
        best_w = w;
        best = &m;
      }
    }
    record.response = format_san(p, *best);
    return record;
  }

 private:
  // Stateless and thread-safe, so calling it from the const respond is fine.
  mutable MaterialEvaluator evaluator_;
};

}  // namespace

std::shared_ptr<const Responder> builtin_responder(std::string_view kind,
                                                   std::uint64_t seed) {
  if (kind == "oracle") return std::make_shared<OracleResponder>();
  if (kind == "random_legal")
    return std::make_shared<RandomLegalResponder>(seed);
  if (kind == "uniform_choice")
    return std::make_shared<UniformChoiceResponder>(seed);
  if (kind == "engine_best") return std::make_shared<EngineBestResponder>();
  throw Error("unknown responder '" + std::string(kind) +
              "' (expected oracle, random_legal, uniform_choice, engine_best)");
}

}  // namespace chessbench
