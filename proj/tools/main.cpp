// chessbench: command-line surface over the library. Subcommands cover move
// generation checks (perft), dataset generation (gen-modeling, gen-eval,
// encode), engine labeling (label), and evaluation (run-eval, score).
//
// Every invocation is deterministic given (inputs, seed, config) and emits a
// run manifest recording the effective configuration next to its outputs.
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chessbench/chess.hpp"
#include "chessbench/encoding.hpp"
#include "chessbench/engine.hpp"
#include "chessbench/errors.hpp"
#include "chessbench/model.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/rng.hpp"
#include "chessbench/scoring.hpp"
#include "chessbench/taskgen.hpp"

#ifndef CHESSBENCH_VERSION
#define CHESSBENCH_VERSION "0.0.0"
#endif

namespace {

using chessbench::Error;
using ordered_json = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kFatal = 2;

constexpr std::size_t kBatchGames = 256;
constexpr std::size_t kBatchLines = 1024;

// --- shared option state -----------------------------------------------------

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string config_path;
  int workers = 0;  // resolved to hardware_concurrency when 0
  bool lenient = false;
  bool quiet = false;

  std::string invocation;  // argv joined for the manifest

  int resolved_workers() const {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }
};

// Config-file layering: defaults < --config file < explicit flags. Each
// adoptable option registers itself; after parsing, file values are applied
// wherever the flag was not given on the command line.
struct ConfigBinding {
  std::string key;
  CLI::Option* option;
  std::function<void(const ordered_json&)> apply;
};

std::vector<ConfigBinding>& config_bindings() {
  static std::vector<ConfigBinding> bindings;
  return bindings;
}

template <class T>
void bind_config(const std::string& key, CLI::Option* option, T& target) {
  config_bindings().push_back(
      {key, option, [&target](const ordered_json& v) { target = v.get<T>(); }});
}

void apply_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw Error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw Error("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& b : config_bindings()) {
      if (b.key != key) continue;
      known = true;
      if (b.option->count() == 0) {
        try {
          b.apply(value);
        } catch (const ordered_json::type_error& e) {
          throw Error("config key '" + key + "': " + e.what());
        }
      }
    }
    if (!known) throw Error("unknown config key '" + key + "'");
  }
}

// --- small helpers -------------------------------------------------------------

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file '" + path + "'");
  return out;
}

struct Warnings {
  std::vector<std::string> lines;

  void add(std::string line) { lines.push_back(std::move(line)); }
  void merge(std::span<const std::string> more) {
    lines.insert(lines.end(), more.begin(), more.end());
  }
  // Prints up to `cap` warnings to stderr; returns the partial/ok exit code.
  int report(bool quiet, std::size_t cap = 20) const {
    if (lines.empty()) return kOk;
    if (!quiet) {
      for (std::size_t i = 0; i < lines.size() && i < cap; ++i)
        std::cerr << "warning: " << lines[i] << "\n";
      if (lines.size() > cap)
        std::cerr << "warning: ... and " << lines.size() - cap << " more\n";
      std::cerr << lines.size() << " item(s) skipped\n";
    }
    return kPartial;
  }
};

// --- run manifest ---------------------------------------------------------------

struct Manifest {
  std::string command;
  ordered_json config;  // effective values, defaults included
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::system_clock::time_point started =
      std::chrono::system_clock::now();
  std::size_t warnings = 0;

  ordered_json to_json(const GlobalOpts& g) const {
    char hash[32];
    std::snprintf(hash, sizeof hash, "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    ordered_json doc;
    doc["tool"] = "chessbench";
    doc["version"] = CHESSBENCH_VERSION;
    doc["command"] = command;
    doc["invocation"] = g.invocation;
    doc["seed"] = g.seed;
    doc["config"] = config;
    doc["config_hash"] = hash;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["started"] = iso_utc(started);
    doc["finished"] = iso_utc(std::chrono::system_clock::now());
    doc["warnings"] = warnings;
    return doc;
  }

  void write(const std::string& path, const GlobalOpts& g) const {
    auto out = open_output(path);
    out << to_json(g).dump(2) << "\n";
  }
};

// --- worker pool ------------------------------------------------------------------

// Runs job(index, worker) for every index in [0, n) across `workers` threads
// and returns the results in index order, so output bytes do not depend on
// the worker count. The first exception wins and is rethrown after joining.
template <class R, class F>
std::vector<R> parallel_index(std::size_t n, int workers, F job) {
  std::vector<R> out(n);
  if (n == 0) return out;
  workers = std::clamp<int>(workers, 1, static_cast<int>(n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = job(i, 0);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&](int worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = job(i, worker);
      } catch (...) {
        std::lock_guard lk(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(run, w);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

// Streams a PGN document batch by batch (the corpus never lives in memory);
// handle(batch, base_index) is called in order. Returns parser warnings.
template <class H>
std::vector<std::string> for_each_game_batch(std::istream& in, bool lenient,
                                             H handle) {
  chessbench::PgnReader reader(in, {.lenient = lenient});
  std::vector<chessbench::GameRecord> batch;
  std::size_t base = 0;
  while (auto game = reader.next()) {
    batch.push_back(std::move(*game));
    if (batch.size() >= kBatchGames) {
      handle(batch, base);
      base += batch.size();
      batch.clear();
    }
  }
  if (!batch.empty()) handle(batch, base);
  return {reader.warnings().begin(), reader.warnings().end()};
}

// Moves metadata["id"] (or sets it) to the front so serialized instances
// lead with their identifier.
void set_instance_id(chessbench::TaskInstance& t, const std::string& id) {
  chessbench::Metadata fresh;
  fresh.set("id", id);
  for (const auto& [key, value] : t.metadata)
    if (key != "id") fresh.set(key, value);
  t.metadata = std::move(fresh);
}

// --- perft ----------------------------------------------------------------------

struct PerftOpts {
  std::string fen;
  int depth = 1;
  std::vector<std::uint64_t> expect;
};

int run_perft(const GlobalOpts& g, const PerftOpts& o) {
  const chessbench::Position p =
      o.fen.empty() ? chessbench::Position::initial() : chessbench::parse_fen(o.fen);
  bool ok = true;
  for (int d = 1; d <= o.depth; ++d) {
    const std::uint64_t n = chessbench::perft(p, d);
    std::cout << n << "\n" << std::flush;
    if (static_cast<std::size_t>(d - 1) < o.expect.size() &&
        o.expect[static_cast<std::size_t>(d - 1)] != n) {
      std::cerr << "perft mismatch at depth " << d << ": expected "
                << o.expect[static_cast<std::size_t>(d - 1)] << ", got " << n
                << "\n";
      ok = false;
    }
  }
  Manifest m;
  m.command = "perft";
  m.config = {{"seed", g.seed},
              {"workers", g.resolved_workers()},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"fen", o.fen.empty() ? chessbench::format_fen(p) : o.fen},
              {"depth", o.depth},
              {"expect", o.expect}};
  if (!g.quiet) std::cerr << m.to_json(g).dump() << "\n";
  return ok ? kOk : kPartial;
}

// --- gen-modeling -----------------------------------------------------------------

struct GenModelingOpts {
  std::string pgn_in;
  std::string out;
  int per_band = 0;  // 0 = use every game, no Elo stratification
  std::string templates_path;
};

int run_gen_modeling(const GlobalOpts& g, const GenModelingOpts& o) {
  chessbench::ModelingTemplates templates =
      chessbench::default_modeling_templates();
  if (!o.templates_path.empty()) {
    auto tin = open_input(o.templates_path);
    templates = chessbench::load_modeling_templates(tin);
  }

  auto in = open_input(o.pgn_in);
  auto out = open_output(o.out);
  Warnings warnings;

  const auto emit = [&](std::span<const chessbench::GameRecord> games,
                        std::size_t base) {
    const auto lines = parallel_index<std::string>(
        games.size(), g.resolved_workers(), [&](std::size_t i, int) {
          const auto instances = chessbench::gen_modeling(
              games.subspan(i, 1), g.seed, templates, base + i);
          std::string buffer;
          for (const auto& t : instances) {
            buffer += chessbench::task_to_jsonl(t);
            buffer += '\n';
          }
          return buffer;
        });
    for (const auto& s : lines) out << s;
  };

  if (o.per_band > 0) {
    // Sampling without replacement needs the candidate set, so this mode
    // collects the corpus before drawing.
    std::vector<chessbench::GameRecord> games;
    chessbench::PgnReader reader(in, {.lenient = g.lenient});
    while (auto game = reader.next()) games.push_back(std::move(*game));
    warnings.merge(reader.warnings());

    chessbench::StratifyStats stats;
    const auto picked =
        chessbench::stratify_by_elo(games, chessbench::default_elo_bands(),
                                    o.per_band, g.seed, &stats);
    if (stats.missing_elo > 0 && !g.quiet)
      std::cerr << stats.missing_elo << " game(s) without Elo headers ignored\n";
    for (std::size_t base = 0; base < picked.size(); base += kBatchGames) {
      const std::size_t count = std::min(kBatchGames, picked.size() - base);
      emit(std::span(picked).subspan(base, count), base);
    }
  } else {
    warnings.merge(for_each_game_batch(in, g.lenient, emit));
  }
  out.flush();
  if (!out) throw Error("write to '" + o.out + "' failed");

  Manifest m;
  m.command = "gen-modeling";
  m.config = {{"seed", g.seed},        {"workers", g.resolved_workers()},
              {"lenient", g.lenient},  {"quiet", g.quiet},
              {"per_band", o.per_band}, {"templates", o.templates_path}};
  m.inputs = {o.pgn_in};
  if (!o.templates_path.empty()) m.inputs.push_back(o.templates_path);
  m.outputs = {o.out};
  m.warnings = warnings.lines.size();
  m.write(o.out + ".manifest.json", g);
  return warnings.report(g.quiet);
}

// --- gen-eval ---------------------------------------------------------------------

struct GenEvalOpts {
  std::string pgn_in;
  std::string openings_tsv;
  std::string out_dir;
  std::vector<std::string> tasks;  // empty = all evaluation kinds
  std::string engine = "builtin:material";
  int engine_depth = chessbench::kDeskDepth;
  int engine_movetime_ms = 0;  // > 0 selects movetime instead of depth
  int engine_timeout_ms = 30000;
  std::string puzzles_path;
  int synthetic = 0;
  bool hint = false;
  bool brace = false;
};

chessbench::EngineConfig engine_config(const GenEvalOpts& o) {
  chessbench::EngineConfig cfg;
  cfg.executable = o.engine;
  if (o.engine_movetime_ms > 0) {
    cfg.depth.reset();
    cfg.move_time_ms = o.engine_movetime_ms;
  } else {
    cfg.depth = o.engine_depth;
  }
  cfg.timeout_ms = o.engine_timeout_ms;
  cfg.validate();
  return cfg;
}

const std::vector<chessbench::TaskKind>& eval_task_kinds() {
  using chessbench::TaskKind;
  static const std::vector<TaskKind> kinds = {
      TaskKind::state_tracking, TaskKind::uci_to_fen,
      TaskKind::pgn_to_fen,     TaskKind::state_value,
      TaskKind::annotation_mc,  TaskKind::opening2pgn,
      TaskKind::pgn2opening,    TaskKind::checkmate_in_one,
      TaskKind::general_policy};
  return kinds;
}

int run_gen_eval(const GlobalOpts& g, const GenEvalOpts& o) {
  using chessbench::TaskKind;

  std::set<TaskKind> enabled;
  if (o.tasks.empty()) {
    enabled.insert(eval_task_kinds().begin(), eval_task_kinds().end());
  } else {
    for (const auto& name : o.tasks) {
      const auto kind = chessbench::task_kind_from_string(name);
      if (!kind || *kind == TaskKind::modeling_synthetic)
        throw Error("unknown evaluation task '" + name + "'");
      enabled.insert(*kind);
    }
  }
  const auto on = [&](TaskKind k) { return enabled.count(k) != 0; };

  const bool needs_engine =
      on(TaskKind::state_value) || on(TaskKind::general_policy);
  const chessbench::EngineConfig engine_cfg = engine_config(o);
  const auto eval_bands = chessbench::eval_elo_bands();

  // One output stream per enabled kind; files exist even when no game
  // qualifies so the output set is predictable.
  std::map<TaskKind, std::ofstream> files;
  std::vector<std::string> output_paths;
  for (const TaskKind k : eval_task_kinds()) {
    if (!on(k)) continue;
    const std::string path =
        o.out_dir + "/" + std::string(chessbench::to_string(k)) + ".jsonl";
    files.emplace(k, open_output(path));
    output_paths.push_back(path);
  }

  Warnings warnings;
  const int workers = g.resolved_workers();
  std::vector<std::unique_ptr<chessbench::Evaluator>> evaluators(
      static_cast<std::size_t>(workers));

  // Per-game construction; all randomness is keyed on (seed, global game
  // index, task kind) so output bytes do not depend on batching or workers.
  const auto lines_for_game = [&](const chessbench::GameRecord& game,
                                  std::size_t gi, int worker) {
    std::map<TaskKind, std::string> lines;
    const int len = static_cast<int>(game.moves.size());
    if (len < 3) return lines;
    const auto positions = game.positions();

    const auto kind_seed = [&](TaskKind k) {
      return chessbench::mix_seed(chessbench::mix_seed(g.seed, gi),
                                  static_cast<std::uint64_t>(k));
    };
    const auto add = [&](TaskKind k, chessbench::TaskInstance t,
                         const std::string& id) {
      set_instance_id(t, id);
      lines[k] += chessbench::task_to_jsonl(t);
      lines[k] += '\n';
    };
    const auto game_id = [&](TaskKind k) {
      return std::string(chessbench::to_string(k)) + "-g" + std::to_string(gi);
    };
    auto& evaluator = evaluators[static_cast<std::size_t>(worker)];
    if (needs_engine && !evaluator)
      evaluator = chessbench::make_evaluator(engine_cfg);

    if (on(TaskKind::state_tracking)) {
      chessbench::Rng rng(kind_seed(TaskKind::state_tracking));
      const int cut = 2 + static_cast<int>(rng.below(
                              static_cast<std::uint64_t>(len - 2)));
      add(TaskKind::state_tracking,
          chessbench::make_state_tracking(game, cut, rng.next()),
          game_id(TaskKind::state_tracking));
    }
    for (const TaskKind k : {TaskKind::uci_to_fen, TaskKind::pgn_to_fen}) {
      if (!on(k)) continue;
      chessbench::Rng rng(kind_seed(k));
      const int cut =
          2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(len - 1)));
      add(k, chessbench::make_fen_conversion(game, cut, k), game_id(k));
    }
    // Engine-labeled tasks sample their cut from [10, min(60, len - 1)];
    // shorter games are skipped.
    const auto value_cut = [&](chessbench::Rng& rng) {
      const int hi = std::min(60, len - 1);
      return 10 + static_cast<int>(
                      rng.below(static_cast<std::uint64_t>(hi - 10 + 1)));
    };
    if (on(TaskKind::state_value) && len >= 11) {
      chessbench::Rng rng(kind_seed(TaskKind::state_value));
      const int cut = value_cut(rng);
      const double w = chessbench::winrate(evaluator->evaluate(
          positions[static_cast<std::size_t>(cut)]));
      add(TaskKind::state_value,
          chessbench::make_state_value(game, cut, w, o.brace),
          game_id(TaskKind::state_value));
    }
    if (on(TaskKind::annotation_mc)) {
      const auto pairs = chessbench::extract_pairs(game);
      if (pairs.size() >= 4) {
        chessbench::Rng rng(kind_seed(TaskKind::annotation_mc));
        const std::size_t i = rng.below(pairs.size());
        add(TaskKind::annotation_mc,
            chessbench::make_annotation_mc(pairs, i, rng.next()),
            game_id(TaskKind::annotation_mc));
      }
    }
    if (on(TaskKind::checkmate_in_one) &&
        chessbench::outcome(positions.back()).status ==
            chessbench::GameStatus::checkmate) {
      auto instances =
          chessbench::make_checkmate_in_one(game, len - 1, o.hint);
      for (auto& t : instances) {
        const std::string variant =
            t.metadata.get_string("variant").value_or("");
        add(TaskKind::checkmate_in_one, std::move(t),
            game_id(TaskKind::checkmate_in_one) + "-" + variant);
      }
    }
    if (on(TaskKind::general_policy) && len >= 11) {
      chessbench::Rng rng(kind_seed(TaskKind::general_policy));
      const int cut = value_cut(rng);
      const auto& p = positions[static_cast<std::size_t>(cut)];
      if (chessbench::has_legal_move(p)) {
        const auto ranked = chessbench::rank_moves(*evaluator, p);
        const chessbench::EloBand band = eval_bands[rng.below(eval_bands.size())];
        add(TaskKind::general_policy,
            chessbench::make_general_policy(game, cut, ranked, band,
                                            p.side_to_move(), rng.next()),
            game_id(TaskKind::general_policy));
      }
    }
    return lines;
  };

  const auto emit = [&](std::span<const chessbench::GameRecord> games,
                        std::size_t base) {
    auto results = parallel_index<std::map<TaskKind, std::string>>(
        games.size(), workers, [&](std::size_t i, int worker) {
          return lines_for_game(games[i], base + i, worker);
        });
    for (auto& per_game : results)
      for (auto& [kind, text] : per_game) files.at(kind) << text;
  };

  auto in = open_input(o.pgn_in);
  std::size_t game_count = 0;
  warnings.merge(for_each_game_batch(
      in, g.lenient, [&](std::span<const chessbench::GameRecord> games,
                         std::size_t base) {
        emit(games, base);
        game_count = base + games.size();
      }));

  // Synthetic games extend the corpus after the real ones; their contents
  // depend only on the seed and their position in the synthetic block.
  if (o.synthetic > 0) {
    std::vector<chessbench::GameRecord> games;
    games.reserve(static_cast<std::size_t>(o.synthetic));
    for (int j = 0; j < o.synthetic; ++j) {
      const std::uint64_t gseed =
          chessbench::mix_seed(chessbench::mix_seed(g.seed, 0x53594eu),
                               static_cast<std::uint64_t>(j));
      const int max_plies =
          12 + static_cast<int>(chessbench::Rng(gseed).below(149));
      games.push_back(chessbench::gen_random_game(gseed, max_plies));
    }
    for (std::size_t base = 0; base < games.size(); base += kBatchGames) {
      const std::size_t count = std::min(kBatchGames, games.size() - base);
      emit(std::span(games).subspan(base, count), game_count + base);
    }
  }

  // Opening tasks come from the table, not from games.
  if (on(TaskKind::opening2pgn) || on(TaskKind::pgn2opening)) {
    auto tsv = open_input(o.openings_tsv);
    const auto openings = chessbench::load_openings_tsv(tsv);
    for (std::size_t i = 0; i < openings.size(); ++i) {
      for (const TaskKind k : {TaskKind::opening2pgn, TaskKind::pgn2opening}) {
        if (!on(k)) continue;
        auto t = chessbench::make_opening_mc(
            openings, i, k,
            chessbench::mix_seed(chessbench::mix_seed(g.seed, i),
                                 static_cast<std::uint64_t>(k)));
        set_instance_id(t, std::string(chessbench::to_string(k)) + "-r" +
                               std::to_string(i));
        files.at(k) << chessbench::task_to_jsonl(t) << "\n";
      }
    }
  }

  // Extra checkmate positions from a puzzle collection.
  if (on(TaskKind::checkmate_in_one) && !o.puzzles_path.empty()) {
    auto pin = open_input(o.puzzles_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pin, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::string puzzle_id;
      std::string fen;
      try {
        const auto doc = ordered_json::parse(line);
        puzzle_id = doc.at("id").is_string()
                        ? doc.at("id").get<std::string>()
                        : doc.at("id").dump();
        fen = doc.at("fen").get<std::string>();
        auto instances = chessbench::make_checkmate_from_puzzle(
            chessbench::parse_fen(fen), puzzle_id, o.hint);
        for (auto& t : instances) {
          const std::string variant =
              t.metadata.get_string("variant").value_or("");
          set_instance_id(t, "checkmate_in_one-p" + puzzle_id + "-" + variant);
          files.at(TaskKind::checkmate_in_one) << chessbench::task_to_jsonl(t)
                                               << "\n";
        }
      } catch (const std::exception& e) {
        if (!g.lenient)
          throw Error(o.puzzles_path + ":" + std::to_string(line_no) + ": " +
                      e.what());
        warnings.add(o.puzzles_path + ":" + std::to_string(line_no) + ": " +
                     e.what());
      }
    }
  }

  for (auto& [kind, file] : files) {
    file.flush();
    if (!file) throw Error("write to the output directory failed");
  }

  Manifest m;
  m.command = "gen-eval";
  std::vector<std::string> task_names;
  for (const TaskKind k : eval_task_kinds())
    if (on(k)) task_names.emplace_back(chessbench::to_string(k));
  m.config = {{"seed", g.seed},
              {"workers", workers},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"tasks", task_names},
              {"engine", o.engine},
              {"engine_depth", o.engine_depth},
              {"engine_movetime_ms", o.engine_movetime_ms},
              {"engine_timeout_ms", o.engine_timeout_ms},
              {"puzzles", o.puzzles_path},
              {"synthetic", o.synthetic},
              {"hint", o.hint},
              {"brace", o.brace}};
  m.inputs = {o.pgn_in, o.openings_tsv};
  if (!o.puzzles_path.empty()) m.inputs.push_back(o.puzzles_path);
  m.outputs = output_paths;
  m.warnings = warnings.lines.size();
  m.write(o.out_dir + "/manifest.json", g);
  return warnings.report(g.quiet);
}

// --- label ------------------------------------------------------------------------

struct LabelOpts {
  std::string positions;
  std::string out;
  std::string engine = "builtin:material";
  int engine_depth = chessbench::kDeskDepth;
  int engine_movetime_ms = 0;
  int engine_timeout_ms = 30000;
};

int run_label(const GlobalOpts& g, const LabelOpts& o) {
  GenEvalOpts ecfg;
  ecfg.engine = o.engine;
  ecfg.engine_depth = o.engine_depth;
  ecfg.engine_movetime_ms = o.engine_movetime_ms;
  ecfg.engine_timeout_ms = o.engine_timeout_ms;
  const chessbench::EngineConfig engine_cfg = engine_config(ecfg);

  auto in = open_input(o.positions);
  auto out = open_output(o.out);
  Warnings warnings;
  const int workers = g.resolved_workers();
  std::vector<std::unique_ptr<chessbench::Evaluator>> evaluators(
      static_cast<std::size_t>(workers));

  std::vector<std::string> batch;
  std::size_t line_no = 0;
  std::size_t batch_start = 1;
  const auto flush_batch = [&] {
    if (batch.empty()) return;
    const auto lines = parallel_index<std::string>(
        batch.size(), workers, [&](std::size_t i, int worker) -> std::string {
          const std::string& line = batch[i];
          if (line.empty()) return {};
          std::string id;
          std::string fen;
          try {
            const auto doc = ordered_json::parse(line);
            id = doc.at("id").is_string() ? doc.at("id").get<std::string>()
                                          : doc.at("id").dump();
            fen = doc.at("fen").get<std::string>();
          } catch (const std::exception& e) {
            throw Error(o.positions + ":" + std::to_string(batch_start + i) +
                        ": " + e.what());
          }
          auto& evaluator = evaluators[static_cast<std::size_t>(worker)];
          if (!evaluator) evaluator = chessbench::make_evaluator(engine_cfg);
          const auto eval = evaluator->evaluate(chessbench::parse_fen(fen));
          ordered_json doc;
          doc["id"] = id;
          doc["fen"] = fen;
          doc["winrate"] = chessbench::winrate(eval);
          doc["eval"] = {{"kind", eval.kind == chessbench::EngineEval::Kind::mate_in
                                      ? "mate"
                                      : "cp"},
                         {"value", eval.value},
                         {"depth", eval.depth}};
          return doc.dump() + "\n";
        });
    for (const auto& s : lines) out << s;
    batch_start = line_no + 1;
    batch.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    batch.push_back(line);
    if (batch.size() >= kBatchLines) flush_batch();
  }
  flush_batch();
  out.flush();
  if (!out) throw Error("write to '" + o.out + "' failed");

  Manifest m;
  m.command = "label";
  m.config = {{"seed", g.seed},
              {"workers", workers},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"engine", o.engine},
              {"engine_depth", o.engine_depth},
              {"engine_movetime_ms", o.engine_movetime_ms},
              {"engine_timeout_ms", o.engine_timeout_ms}};
  m.inputs = {o.positions};
  m.outputs = {o.out};
  m.warnings = warnings.lines.size();
  m.write(o.out + ".manifest.json", g);
  return warnings.report(g.quiet);
}

// --- run-eval ---------------------------------------------------------------------

struct RunEvalOpts {
  std::string tasks;
  std::string out;
  std::string endpoint_path;
  std::string responder;
};

int run_run_eval(const GlobalOpts& g, const RunEvalOpts& o) {
  if (o.endpoint_path.empty() == o.responder.empty())
    throw Error("exactly one of --endpoint and --responder is required");

  std::shared_ptr<const chessbench::Responder> responder;
  std::unique_ptr<chessbench::CompletionClient> client;
  std::ofstream request_log;
  std::string log_path;
  if (!o.responder.empty()) {
    responder = chessbench::builtin_responder(o.responder, g.seed);
  } else {
    std::ostringstream profile;
    profile << open_input(o.endpoint_path).rdbuf();
    client = std::make_unique<chessbench::CompletionClient>(
        chessbench::endpoint_from_json(profile.str()));
    log_path = o.out + ".log";
    request_log = open_output(log_path);
    client->set_log_sink([&request_log](std::string_view line) {
      request_log << line << "\n";
    });
  }

  auto in = open_input(o.tasks);
  auto out = open_output(o.out);
  Warnings warnings;
  const int workers = g.resolved_workers();

  std::vector<std::string> batch;
  std::size_t line_no = 0;
  std::size_t batch_start = 1;
  const auto flush_batch = [&] {
    if (batch.empty()) return;
    const auto lines = parallel_index<std::string>(
        batch.size(), workers, [&](std::size_t i, int) -> std::string {
          const std::string& line = batch[i];
          if (line.empty()) return {};
          const auto instance = chessbench::task_from_jsonl(line);
          const auto record = responder ? responder->respond(instance)
                                        : client->respond(instance);
          return chessbench::response_to_jsonl(record) + "\n";
        });
    for (std::size_t i = 0; i < lines.size(); ++i) out << lines[i];
    batch_start = line_no + 1;
    batch.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    batch.push_back(line);
    if (batch.size() >= kBatchLines) flush_batch();
  }
  flush_batch();
  out.flush();
  if (!out) throw Error("write to '" + o.out + "' failed");

  Manifest m;
  m.command = "run-eval";
  m.config = {{"seed", g.seed},
              {"workers", workers},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"endpoint", o.endpoint_path},
              {"responder", o.responder}};
  m.inputs = {o.tasks};
  if (!o.endpoint_path.empty()) m.inputs.push_back(o.endpoint_path);
  m.outputs = {o.out};
  if (!log_path.empty()) m.outputs.push_back(log_path);
  m.warnings = warnings.lines.size();
  m.write(o.out + ".manifest.json", g);
  return warnings.report(g.quiet);
}

// --- score ------------------------------------------------------------------------

struct ScoreOpts {
  std::string tasks;
  std::string responses;
  std::string report;
  std::string json_path;
  std::vector<std::string> regex;  // "task_kind=pattern"
};

int run_score(const GlobalOpts& g, const ScoreOpts& o) {
  chessbench::ScoringConfig config;
  for (const auto& spec : o.regex) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw Error("--regex expects task_kind=pattern, got '" + spec + "'");
    const auto kind = chessbench::task_kind_from_string(spec.substr(0, eq));
    if (!kind) throw Error("unknown task kind in --regex '" + spec + "'");
    config.response_regex.emplace_back(*kind, spec.substr(eq + 1));
  }

  std::vector<chessbench::TaskInstance> instances;
  {
    auto in = open_input(o.tasks);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) instances.push_back(chessbench::task_from_jsonl(line));
  }
  std::vector<chessbench::ResponseRecord> responses;
  {
    auto in = open_input(o.responses);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty())
        responses.push_back(chessbench::response_from_jsonl(line));
  }

  const auto results = chessbench::score_responses(instances, responses, config);
  const std::string table = chessbench::render_report(results);
  {
    auto out = open_output(o.report);
    out << table;
    out.flush();
    if (!out) throw Error("write to '" + o.report + "' failed");
  }
  if (!o.json_path.empty()) {
    auto out = open_output(o.json_path);
    out << chessbench::report_to_json(results) << "\n";
  }
  if (!g.quiet) std::cout << table;

  Manifest m;
  m.command = "score";
  m.config = {{"seed", g.seed},
              {"workers", g.resolved_workers()},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"regex", o.regex}};
  m.inputs = {o.tasks, o.responses};
  m.outputs = {o.report};
  if (!o.json_path.empty()) m.outputs.push_back(o.json_path);
  m.write(o.report + ".manifest.json", g);
  return kOk;
}

// --- encode -----------------------------------------------------------------------

struct EncodeOpts {
  std::string pgn_in;
  std::string out_dir;
  int history_k = 8;
};

int run_encode(const GlobalOpts& g, const EncodeOpts& o) {
  const chessbench::EncoderConfig cfg{.history_k = o.history_k};
  auto in = open_input(o.pgn_in);
  auto pairs_out = open_output(o.out_dir + "/pairs.jsonl");
  Warnings warnings;
  const int workers = g.resolved_workers();
  std::size_t game_count = 0;
  std::size_t pair_count = 0;
  std::size_t tensor_count = 0;
  std::mutex count_mu;

  const auto emit = [&](std::span<const chessbench::GameRecord> games,
                        std::size_t base) {
    const auto pair_lines = parallel_index<std::string>(
        games.size(), workers, [&](std::size_t i, int) -> std::string {
          const auto& game = games[i];
          const std::size_t gi = base + i;
          if (game.moves.empty()) return {};
          const auto positions = game.positions();
          const std::string stem = o.out_dir + "/g" + std::to_string(gi);

          auto tensors = open_output(stem + ".tensors");
          auto actions = open_output(stem + ".actions");
          for (std::size_t t = 0; t < game.moves.size(); ++t) {
            const auto window = std::span(positions).first(t + 1);
            chessbench::write_tensor(tensors,
                                     chessbench::encode_history(window, cfg));
            actions << chessbench::encode_move(positions[t], game.moves[t].move)
                           .index
                    << "\n";
          }
          tensors.flush();
          actions.flush();
          if (!tensors || !actions)
            throw Error("write to '" + stem + ".*' failed");
          {
            std::lock_guard lk(count_mu);
            tensor_count += game.moves.size();
          }

          std::string lines;
          for (const auto& pair : chessbench::extract_pairs(game, cfg)) {
            ordered_json doc;
            doc["game"] = gi;
            doc["ply"] = pair.ply;
            doc["uci"] = chessbench::format_uci(pair.action);
            doc["action"] =
                chessbench::encode_move(pair.states.back(), pair.action).index;
            doc["text"] = pair.text;
            doc["pgn_prefix"] = pair.pgn_prefix;
            lines += doc.dump();
            lines += '\n';
          }
          return lines;
        });
    for (const auto& s : pair_lines) {
      pairs_out << s;
      pair_count += static_cast<std::size_t>(
          std::count(s.begin(), s.end(), '\n'));
    }
    game_count = base + games.size();
  };

  warnings.merge(for_each_game_batch(in, g.lenient, emit));
  pairs_out.flush();
  if (!pairs_out) throw Error("write to '" + o.out_dir + "/pairs.jsonl' failed");
  if (!g.quiet)
    std::cerr << game_count << " game(s), " << tensor_count << " tensor(s), "
              << pair_count << " annotation pair(s)\n";

  Manifest m;
  m.command = "encode";
  m.config = {{"seed", g.seed},
              {"workers", workers},
              {"lenient", g.lenient},
              {"quiet", g.quiet},
              {"k", o.history_k}};
  m.inputs = {o.pgn_in};
  m.outputs = {o.out_dir + "/pairs.jsonl"};
  m.warnings = warnings.lines.size();
  m.write(o.out_dir + "/manifest.json", g);
  return warnings.report(g.quiet);
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);

  CLI::App app{"chess reasoning datasets, engine labeling, and evaluation",
               "chessbench"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  for (int i = 0; i < argc; ++i) {
    if (i) g.invocation += ' ';
    const std::string_view arg = argv[i];
    g.invocation += arg.find(' ') == std::string_view::npos
                        ? std::string(arg)
                        : "'" + std::string(arg) + "'";
  }

  auto* seed_opt = app.add_option("--seed", g.seed, "Global RNG seed");
  app.add_option("--config", g.config_path,
                 "JSON config file; explicit flags override its values");
  auto* workers_opt =
      app.add_option("--workers", g.workers, "Worker threads (0 = all cores)");
  auto* lenient_opt = app.add_flag(
      "--lenient", g.lenient, "Skip malformed games/lines with a warning");
  auto* quiet_opt = app.add_flag("--quiet", g.quiet, "Suppress progress output");
  bind_config("seed", seed_opt, g.seed);
  bind_config("workers", workers_opt, g.workers);
  bind_config("lenient", lenient_opt, g.lenient);
  bind_config("quiet", quiet_opt, g.quiet);

  PerftOpts perft;
  auto* perft_cmd =
      app.add_subcommand("perft", "Count legal move tree leaves per depth");
  perft_cmd->add_option("--fen", perft.fen,
                        "Position to search (default: initial position)");
  perft_cmd->add_option("--depth", perft.depth, "Maximum depth")
      ->required()
      ->check(CLI::PositiveNumber);
  perft_cmd->add_option("--expect", perft.expect,
                        "Expected node counts for depths 1..n")
      ->delimiter(',');

  GenModelingOpts gen_modeling;
  auto* gen_modeling_cmd = app.add_subcommand(
      "gen-modeling", "Generate the synthetic modeling dataset from a PGN corpus");
  gen_modeling_cmd->add_option("pgn-in", gen_modeling.pgn_in, "PGN corpus")
      ->required();
  gen_modeling_cmd->add_option("out", gen_modeling.out, "Output JSONL path")
      ->required();
  auto* per_band_opt = gen_modeling_cmd->add_option(
      "--per-band", gen_modeling.per_band,
      "Sample up to N games per Elo band (0 = use every game)");
  gen_modeling_cmd->add_option("--templates", gen_modeling.templates_path,
                               "Instruction template TSV override");
  bind_config("per_band", per_band_opt, gen_modeling.per_band);

  GenEvalOpts gen_eval;
  auto* gen_eval_cmd = app.add_subcommand(
      "gen-eval", "Generate evaluation task files from games and an opening table");
  gen_eval_cmd->add_option("pgn-in", gen_eval.pgn_in, "PGN corpus")->required();
  gen_eval_cmd->add_option("openings", gen_eval.openings_tsv,
                           "Opening table TSV (eco, name, pgn)")
      ->required();
  gen_eval_cmd->add_option("out-dir", gen_eval.out_dir,
                           "Existing directory for the task files")
      ->required();
  gen_eval_cmd
      ->add_option("--tasks", gen_eval.tasks,
                   "Comma-separated task kinds (default: all)")
      ->delimiter(',');
  auto* engine_opt = gen_eval_cmd->add_option(
      "--engine", gen_eval.engine,
      "Engine command, or builtin:material (default)");
  gen_eval_cmd->add_option("--engine-depth", gen_eval.engine_depth,
                           "Engine search depth");
  gen_eval_cmd->add_option("--engine-movetime", gen_eval.engine_movetime_ms,
                           "Engine time per move in ms (overrides depth)");
  gen_eval_cmd->add_option("--engine-timeout", gen_eval.engine_timeout_ms,
                           "Engine response deadline in ms");
  gen_eval_cmd->add_option("--puzzles", gen_eval.puzzles_path,
                           "Checkmate puzzle JSONL (id, fen)");
  gen_eval_cmd->add_option("--synthetic", gen_eval.synthetic,
                           "Append N random self-play games to the corpus");
  gen_eval_cmd->add_flag("--hint", gen_eval.hint,
                         "Append the mate-in-one hint sentence");
  gen_eval_cmd->add_flag("--brace", gen_eval.brace,
                         "Mark state-value prompts for a '{' suffix");
  bind_config("engine", engine_opt, gen_eval.engine);

  LabelOpts label;
  auto* label_cmd = app.add_subcommand(
      "label", "Label positions (id, fen JSONL) with engine winrates");
  label_cmd->add_option("positions", label.positions, "Position JSONL")
      ->required();
  label_cmd->add_option("out", label.out, "Output JSONL path")->required();
  auto* label_engine_opt = label_cmd->add_option(
      "--engine", label.engine, "Engine command, or builtin:material (default)");
  label_cmd->add_option("--engine-depth", label.engine_depth,
                        "Engine search depth");
  label_cmd->add_option("--engine-movetime", label.engine_movetime_ms,
                        "Engine time per move in ms (overrides depth)");
  label_cmd->add_option("--engine-timeout", label.engine_timeout_ms,
                        "Engine response deadline in ms");
  bind_config("engine", label_engine_opt, label.engine);

  RunEvalOpts run_eval;
  auto* run_eval_cmd = app.add_subcommand(
      "run-eval", "Collect model or responder answers for a task file");
  run_eval_cmd->add_option("tasks", run_eval.tasks, "Task JSONL")->required();
  run_eval_cmd->add_option("out", run_eval.out, "Response JSONL path")
      ->required();
  auto* endpoint_opt = run_eval_cmd->add_option(
      "--endpoint", run_eval.endpoint_path, "Endpoint profile JSON");
  run_eval_cmd
      ->add_option("--responder", run_eval.responder,
                   "Builtin responder: oracle, random_legal, uniform_choice, "
                   "engine_best")
      ->excludes(endpoint_opt);

  ScoreOpts score;
  auto* score_cmd =
      app.add_subcommand("score", "Score responses and render the report");
  score_cmd->add_option("tasks", score.tasks, "Task JSONL")->required();
  score_cmd->add_option("responses", score.responses, "Response JSONL")
      ->required();
  score_cmd->add_option("report", score.report, "Report text output path")
      ->required();
  score_cmd->add_option("--json", score.json_path, "Also write a JSON report");
  score_cmd->add_option("--regex", score.regex,
                        "Response extraction regex as task_kind=pattern");

  EncodeOpts encode;
  auto* encode_cmd = app.add_subcommand(
      "encode", "Write board tensors, action indices, and annotation pairs");
  encode_cmd->add_option("pgn-in", encode.pgn_in, "PGN corpus")->required();
  encode_cmd->add_option("out-dir", encode.out_dir,
                         "Existing directory for tensors and pairs")
      ->required();
  encode_cmd->add_option("--k", encode.history_k, "History window length")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  try {
    if (!g.config_path.empty()) apply_config_file(g.config_path);

    if (*perft_cmd) return run_perft(g, perft);
    if (*gen_modeling_cmd) return run_gen_modeling(g, gen_modeling);
    if (*gen_eval_cmd) return run_gen_eval(g, gen_eval);
    if (*label_cmd) return run_label(g, label);
    if (*run_eval_cmd) return run_run_eval(g, run_eval);
    if (*score_cmd) return run_score(g, score);
    if (*encode_cmd) return run_encode(g, encode);
    throw Error("no subcommand selected");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFatal;
  }
}
