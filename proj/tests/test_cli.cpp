#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chessbench/encoding.hpp"
#include "chessbench/engine.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/taskgen.hpp"
#include "json.hpp"

using namespace chessbench;
namespace fs = std::filesystem;

namespace {

const fs::path& scratch_root() {
  static const fs::path root = [] {
    std::string tmpl = (fs::temp_directory_path() / "chessbench-cli-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    return fs::path(tmpl);
  }();
  return root;
}

fs::path case_dir(const std::string& name) {
  const fs::path dir = scratch_root() / name;
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = case_dir("capture");
  const fs::path out = dir / ("out-" + std::to_string(counter));
  const fs::path err = dir / ("err-" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(CHESSBENCH_CLI_PATH) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  if (status >= 0 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<GameRecord> load_corpus() {
  std::ifstream in(FIXTURES_DIR "/corpus.pgn");
  REQUIRE(in.good());
  PgnReader reader(in, {});
  std::vector<GameRecord> games;
  while (auto game = reader.next()) games.push_back(std::move(*game));
  return games;
}

const std::string kCorpus = FIXTURES_DIR "/corpus.pgn";
const std::string kOpenings = FIXTURES_DIR "/openings.tsv";

}  // namespace

TEST_CASE("perft subcommand") {
  RunResult r = run_cli("perft --depth 3 --expect 20,400,8902");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "20\n400\n8902\n");
  const auto manifest = nlohmann::json::parse(r.err);
  CHECK(manifest.at("tool") == "chessbench");
  CHECK(manifest.at("command") == "perft");
  CHECK(manifest.at("config").at("depth") == 3);
  CHECK(manifest.at("seed") == 0);

  r = run_cli("perft --depth 2 --quiet");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "20\n400\n");
  CHECK(r.err.empty());

  r = run_cli(
      "perft --depth 2 --quiet "
      "--fen 'r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1'");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "48\n2039\n");

  r = run_cli("perft --depth 1 --expect 19 --quiet");
  CHECK(r.exit_code == 1);
  CHECK(r.out == "20\n");
  CHECK(r.err.find("perft mismatch at depth 1: expected 19, got 20") !=
        std::string::npos);

  r = run_cli("perft --depth 1 --fen 'not a fen'");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error:") != std::string::npos);

  CHECK(run_cli("perft").exit_code == 2);            // --depth is required
  CHECK(run_cli("perft --depth 0").exit_code == 2);  // must be positive
  CHECK(run_cli("bogus-subcommand").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);  // a subcommand is required
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("gen-modeling matches the library and is reproducible") {
  const fs::path dir = case_dir("gen-modeling");
  const std::string a = (dir / "a.jsonl").string();
  const std::string b = (dir / "b.jsonl").string();
  const std::string c = (dir / "c.jsonl").string();
  const std::string d = (dir / "d.jsonl").string();

  CHECK(run_cli("--seed 5 --workers 1 --quiet gen-modeling " + kCorpus + " " + a)
            .exit_code == 0);
  CHECK(run_cli("--seed 5 --workers 1 --quiet gen-modeling " + kCorpus + " " + b)
            .exit_code == 0);
  CHECK(run_cli("--seed 5 --workers 8 --quiet gen-modeling " + kCorpus + " " + c)
            .exit_code == 0);
  CHECK(run_cli("--seed 6 --workers 1 --quiet gen-modeling " + kCorpus + " " + d)
            .exit_code == 0);

  const std::string bytes = slurp(a);
  REQUIRE(!bytes.empty());
  CHECK(bytes == slurp(b));  // same seed, same bytes
  CHECK(bytes == slurp(c));  // worker count cannot change output
  CHECK(bytes != slurp(d));  // the seed matters

  // The file equals one whole-corpus library call, line for line.
  const auto games = load_corpus();
  std::string expected;
  for (const auto& t :
       gen_modeling(games, 5, default_modeling_templates(), 0)) {
    expected += task_to_jsonl(t);
    expected += '\n';
  }
  CHECK(bytes == expected);

  const auto manifest = nlohmann::json::parse(slurp(a + ".manifest.json"));
  CHECK(manifest.at("command") == "gen-modeling");
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("outputs") == nlohmann::json::array({a}));

  // Every line is a loadable instance of the synthetic modeling kind.
  std::istringstream lines(bytes);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const TaskInstance t = task_from_jsonl(line);
    CHECK(t.task_kind == TaskKind::modeling_synthetic);
    ++n;
  }
  CHECK(n == count_lines(bytes));

  CHECK(run_cli("--quiet gen-modeling /nonexistent.pgn " + d).exit_code == 2);
}

TEST_CASE("gen-eval outputs are deterministic and task-selectable") {
  const fs::path a = case_dir("gen-eval-a");
  const fs::path b = case_dir("gen-eval-b");
  const fs::path c = case_dir("gen-eval-c");

  const std::string common =
      " gen-eval " + kCorpus + " " + kOpenings + " ";
  CHECK(run_cli("--seed 3 --workers 1 --quiet" + common + a.string() +
                " --synthetic 4")
            .exit_code == 0);
  CHECK(run_cli("--seed 3 --workers 8 --quiet" + common + b.string() +
                " --synthetic 4")
            .exit_code == 0);

  const std::vector<std::string> kinds = {
      "state_tracking", "uci_to_fen",  "pgn_to_fen",
      "state_value",    "annotation_mc", "opening2pgn",
      "pgn2opening",    "checkmate_in_one", "general_policy"};
  for (const auto& kind : kinds) {
    const std::string file = kind + ".jsonl";
    REQUIRE(fs::exists(a / file));
    REQUIRE(fs::exists(b / file));
    CHECK(slurp(a / file) == slurp(b / file));
  }
  CHECK(!slurp(a / "state_tracking.jsonl").empty());
  CHECK(!slurp(a / "opening2pgn.jsonl").empty());

  // Instances load back and ids are unique within a file.
  {
    std::istringstream lines(slurp(a / "state_tracking.jsonl"));
    std::string line;
    std::set<std::string> ids;
    while (std::getline(lines, line)) {
      const TaskInstance t = task_from_jsonl(line);
      CHECK(t.task_kind == TaskKind::state_tracking);
      CHECK(ids.insert(t.id()).second);
    }
    CHECK(ids.size() >= 40);  // 48 real games plus synthetics, minus short ones
  }

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest.at("command") == "gen-eval");
  CHECK(manifest.at("outputs").size() == kinds.size());
  CHECK(manifest.at("config").at("synthetic") == 4);

  // --tasks narrows the output set without disturbing per-kind streams.
  CHECK(run_cli("--seed 3 --quiet" + common + c.string() +
                " --synthetic 4 --tasks checkmate_in_one,state_tracking")
            .exit_code == 0);
  CHECK(fs::exists(c / "state_tracking.jsonl"));
  CHECK(fs::exists(c / "checkmate_in_one.jsonl"));
  CHECK(!fs::exists(c / "pgn_to_fen.jsonl"));
  CHECK(slurp(c / "state_tracking.jsonl") == slurp(a / "state_tracking.jsonl"));

  const RunResult bad = run_cli("--quiet" + common + c.string() + " --tasks nonsense");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("unknown evaluation task 'nonsense'") != std::string::npos);
}

TEST_CASE("run-eval with the oracle responder scores a clean 100") {
  const fs::path dir = case_dir("oracle-loop");
  const std::string tasks = (dir / "state_tracking.jsonl").string();
  const std::string resp = (dir / "responses.jsonl").string();
  const std::string report = (dir / "report.txt").string();
  const std::string report_json = (dir / "report.json").string();

  CHECK(run_cli("--seed 1 --quiet gen-eval " + kCorpus + " " + kOpenings + " " +
                dir.string() + " --tasks state_tracking")
            .exit_code == 0);
  CHECK(run_cli("--quiet run-eval " + tasks + " " + resp + " --responder oracle")
            .exit_code == 0);
  CHECK(count_lines(slurp(resp)) == count_lines(slurp(tasks)));

  CHECK(run_cli("--quiet score " + tasks + " " + resp + " " + report +
                " --json " + report_json)
            .exit_code == 0);
  const std::string table = slurp(report);
  CHECK(table.find("state_tracking") != std::string::npos);
  CHECK(table.find("100.0 \xC2\xB1 0.0") != std::string::npos);
  const auto rows = nlohmann::json::parse(slurp(report_json));
  REQUIRE(rows.is_array());
  REQUIRE(!rows.empty());
  for (const auto& row : rows) {
    CHECK(row.at("task_kind") == "state_tracking");
    CHECK(row.at("mean") == 1.0);
  }
  CHECK(fs::exists(report + ".manifest.json"));

  // Exactly one answer source must be selected.
  CHECK(run_cli("--quiet run-eval " + tasks + " " + resp).exit_code == 2);
  CHECK(run_cli("--quiet run-eval " + tasks + " " + resp +
                " --responder oracle --endpoint profile.json")
            .exit_code == 2);
  CHECK(run_cli("--quiet run-eval " + tasks + " " + resp +
                " --responder bogus")
            .exit_code == 2);
}

TEST_CASE("score rejects mismatched response files") {
  const fs::path dir = case_dir("score-errors");
  const std::string tasks = (dir / "state_tracking.jsonl").string();
  const std::string resp = (dir / "responses.jsonl").string();
  const std::string report = (dir / "report.txt").string();

  CHECK(run_cli("--seed 2 --quiet gen-eval " + kCorpus + " " + kOpenings + " " +
                dir.string() + " --tasks state_tracking")
            .exit_code == 0);
  CHECK(run_cli("--quiet run-eval " + tasks + " " + resp + " --responder oracle")
            .exit_code == 0);

  // An orphan response id fails the strict join.
  const std::string with_orphan = (dir / "orphan.jsonl").string();
  spit(with_orphan, slurp(resp) + R"({"id":"zzz","response":"x"})" + "\n");
  RunResult r = run_cli("--quiet score " + tasks + " " + with_orphan + " " + report);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("without an instance [zzz]") != std::string::npos);

  // A missing response likewise.
  std::string trimmed = slurp(resp);
  trimmed.erase(trimmed.rfind('\n', trimmed.size() - 2) + 1);
  const std::string short_file = (dir / "short.jsonl").string();
  spit(short_file, trimmed);
  r = run_cli("--quiet score " + tasks + " " + short_file + " " + report);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("without a response") != std::string::npos);
}

TEST_CASE("encode writes tensors, action indices, and annotation pairs") {
  const fs::path dir = case_dir("encode");
  const fs::path out = dir / "out";
  fs::create_directories(out);
  const std::string pgn = (dir / "tiny.pgn").string();
  spit(pgn,
       "[Event \"T\"]\n\n"
       "1. e4 {King's pawn} e5 {[%clk 0:05:00]} 2. Nf3 Nc6 1-0\n\n"
       "[Event \"T2\"]\n\n"
       "1. d4 d5 {solid} *\n");

  RunResult r = run_cli("encode " + pgn + " " + out.string() + " --k 4");
  CHECK(r.exit_code == 0);
  CHECK(r.err == "2 game(s), 6 tensor(s), 2 annotation pair(s)\n");

  constexpr std::size_t kRecord = 8 + 112 * 8 * 8 * 4;
  const std::string t0 = slurp(out / "g0.tensors");
  CHECK(t0.size() == 4 * kRecord);
  CHECK(t0.substr(0, 8) == "8 8 112\n");
  CHECK(slurp(out / "g1.tensors").size() == 2 * kRecord);

  // Action indices replay the games through the library encoder.
  std::ifstream pgn_in(pgn);
  PgnReader reader(pgn_in, {});
  std::vector<GameRecord> games;
  while (auto game = reader.next()) games.push_back(std::move(*game));
  REQUIRE(games.size() == 2);
  for (std::size_t gi = 0; gi < games.size(); ++gi) {
    const auto positions = games[gi].positions();
    std::istringstream actions(slurp(out / ("g" + std::to_string(gi) + ".actions")));
    std::string line;
    std::size_t ply = 0;
    while (std::getline(actions, line)) {
      const int index = std::stoi(line);
      CHECK(index >= 0);
      CHECK(index < 1858);
      CHECK(index ==
            encode_move(positions[ply], games[gi].moves[ply].move).index);
      ++ply;
    }
    CHECK(ply == games[gi].moves.size());
  }

  // pairs.jsonl mirrors extract_pairs byte for byte on every field.
  const EncoderConfig cfg{.history_k = 4};
  std::istringstream pairs_in(slurp(out / "pairs.jsonl"));
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(pairs_in, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 2);
  std::size_t row = 0;
  for (std::size_t gi = 0; gi < games.size(); ++gi) {
    for (const auto& pair : extract_pairs(games[gi], cfg)) {
      REQUIRE(row < rows.size());
      CHECK(rows[row].at("game") == gi);
      CHECK(rows[row].at("ply") == pair.ply);
      CHECK(rows[row].at("uci") == format_uci(pair.action));
      CHECK(rows[row].at("action") ==
            encode_move(pair.states.back(), pair.action).index);
      CHECK(rows[row].at("text") == pair.text);
      CHECK(rows[row].at("pgn_prefix") == pair.pgn_prefix);
      ++row;
    }
  }
  CHECK(row == rows.size());
  CHECK(rows[0].at("text") == "King's pawn");
  CHECK(rows[1].at("text") == "solid");

  CHECK(fs::exists(out / "manifest.json"));

  // A second run produces identical bytes.
  const fs::path out2 = dir / "out2";
  fs::create_directories(out2);
  CHECK(run_cli("--quiet encode " + pgn + " " + out2.string() + " --k 4")
            .exit_code == 0);
  CHECK(slurp(out2 / "pairs.jsonl") == slurp(out / "pairs.jsonl"));
  CHECK(slurp(out2 / "g0.tensors") == t0);

  CHECK(run_cli("encode " + pgn + " " + out.string() + " --k 0").exit_code == 2);
  CHECK(run_cli("encode /nonexistent.pgn " + out.string()).exit_code == 2);
  CHECK(run_cli("encode " + pgn + " " + (dir / "missing-dir").string())
            .exit_code == 2);
}

TEST_CASE("label writes white-perspective winrates") {
  const fs::path dir = case_dir("label");
  const std::string positions = (dir / "positions.jsonl").string();
  const std::string out = (dir / "labels.jsonl").string();
  spit(positions,
       R"({"id":"start","fen":"rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"})"
       "\n"
       R"({"id":"mate","fen":"6k1/5ppp/8/8/8/8/8/R3K3 w - - 0 1"})"
       "\n"
       R"({"id":"rook","fen":"4k3/8/8/8/8/8/8/R3K3 b - - 0 1"})"
       "\n");

  CHECK(run_cli("--quiet label " + positions + " " + out).exit_code == 0);
  std::istringstream lines(slurp(out));
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(lines, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].at("id") == "start");
  CHECK(rows[0].at("winrate") == 0.5);
  CHECK(rows[0].at("eval").at("kind") == "cp");
  CHECK(rows[1].at("id") == "mate");
  CHECK(rows[1].at("winrate") == 1.0);
  CHECK(rows[1].at("eval").at("kind") == "mate");
  CHECK(rows[1].at("eval").at("value") == 1);
  // Black to move does not flip the stored (white) perspective.
  CHECK(rows[2].at("winrate").get<double>() ==
        doctest::Approx(winrate_from_cp(500)));
  CHECK(fs::exists(out + ".manifest.json"));

  spit(positions, R"({"id":"a","fen":"bad fen"})" "\n");
  CHECK(run_cli("--quiet label " + positions + " " + out).exit_code == 2);
  spit(positions, "not json\n");
  const RunResult r = run_cli("--quiet label " + positions + " " + out);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find(":1:") != std::string::npos);
}

TEST_CASE("config files layer under explicit flags") {
  const fs::path dir = case_dir("config");
  const std::string cfg = (dir / "cfg.json").string();
  spit(cfg, R"({"seed": 7, "workers": 2})");

  RunResult r = run_cli("--config " + cfg + " perft --depth 1");
  CHECK(r.exit_code == 0);
  auto manifest = nlohmann::json::parse(r.err);
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("config").at("workers") == 2);

  r = run_cli("--config " + cfg + " --seed 9 perft --depth 1");
  CHECK(r.exit_code == 0);
  manifest = nlohmann::json::parse(r.err);
  CHECK(manifest.at("seed") == 9);  // the explicit flag wins
  CHECK(manifest.at("config").at("workers") == 2);

  const std::string bad_key = (dir / "bad-key.json").string();
  spit(bad_key, R"({"bogus": 1})");
  r = run_cli("--config " + bad_key + " perft --depth 1");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("unknown config key 'bogus'") != std::string::npos);

  const std::string bad_json = (dir / "bad.json").string();
  spit(bad_json, "not json");
  r = run_cli("--config " + bad_json + " perft --depth 1");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("not valid JSON") != std::string::npos);

  const std::string bad_type = (dir / "bad-type.json").string();
  spit(bad_type, R"({"seed": "high"})");
  CHECK(run_cli("--config " + bad_type + " perft --depth 1").exit_code == 2);

  const std::string not_object = (dir / "array.json").string();
  spit(not_object, "[1, 2]");
  CHECK(run_cli("--config " + not_object + " perft --depth 1").exit_code == 2);

  CHECK(run_cli("--config /nonexistent.json perft --depth 1").exit_code == 2);
}
