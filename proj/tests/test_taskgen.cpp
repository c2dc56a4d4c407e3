#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chessbench/notation.hpp"
#include "chessbench/taskgen.hpp"

using namespace chessbench;

namespace {

GameRecord parse_one(const std::string& pgn) {
  auto out = parse_pgn(pgn);
  REQUIRE(out.games.size() == 1);
  return out.games[0];
}

std::string jsonl(const TaskInstance& t) { return task_to_jsonl(t); }

}  // namespace

TEST_CASE("task kind names round trip") {
  const TaskKind kinds[] = {
      TaskKind::state_tracking, TaskKind::uci_to_fen,   TaskKind::pgn_to_fen,
      TaskKind::state_value,    TaskKind::annotation_mc, TaskKind::opening2pgn,
      TaskKind::pgn2opening,    TaskKind::checkmate_in_one,
      TaskKind::general_policy, TaskKind::modeling_synthetic};
  for (TaskKind k : kinds) CHECK(task_kind_from_string(to_string(k)) == k);
  CHECK_FALSE(task_kind_from_string("bogus"));
}

TEST_CASE("task instances serialize with stable field order and round trip") {
  TaskInstance t;
  t.task_kind = TaskKind::state_tracking;
  t.prompt_prefix = "prefix";
  t.input = "e2e4 d8";
  t.targets = {"h4", "g5"};
  t.metadata.set("id", std::string("x-1"));
  t.metadata.set("cut", std::int64_t{4});
  t.metadata.set("winrate", 0.25);
  t.metadata.set("hint", false);

  const std::string line = jsonl(t);
  CHECK(line.find("{\"task_kind\":\"state_tracking\",\"prompt_prefix\":") == 0);
  CHECK(line.find('\n') == std::string::npos);
  // Metadata preserves insertion order.
  CHECK(line.find("\"id\":\"x-1\",\"cut\":4,\"winrate\":0.25,\"hint\":false") !=
        std::string::npos);

  const TaskInstance back = task_from_jsonl(line);
  CHECK(jsonl(back) == line);
  CHECK(back.id() == "x-1");
  CHECK(back.metadata.get_int("cut") == 4);
  CHECK(back.metadata.get_double("winrate") == 0.25);
  CHECK(back.metadata.get_bool("hint") == false);
  CHECK_FALSE(back.is_multiple_choice());

  TaskInstance mc;
  mc.task_kind = TaskKind::state_value;
  mc.target_scores = {{"a", 1.0}, {"b", 0.0}};
  const TaskInstance mc_back = task_from_jsonl(jsonl(mc));
  CHECK(mc_back.is_multiple_choice());
  CHECK(mc_back.target_scores == mc.target_scores);

  CHECK_THROWS_AS(task_from_jsonl("not json"), Error);
  CHECK_THROWS_AS(task_from_jsonl("{}"), Error);
  CHECK_THROWS_AS(task_from_jsonl(R"({"task_kind":"nope","prompt_prefix":"",
      "input":"","targets":["x"],"target_scores":{},"metadata":{}})"),
                  Error);
}

TEST_CASE("state tracking: published example is byte-exact") {
  const GameRecord g = parse_one(
      "1. e4 e6 2. d4 d5 3. e5 c5 4. c3 Nc6 5. Nf3 Nge7 6. a3 a5 7. Bd3 Bd7 "
      "8. Be3 Qb6 *\n");
  const TaskInstance t = make_state_tracking(g, 15, 7);
  CHECK(t.task_kind == TaskKind::state_tracking);
  CHECK(t.prompt_prefix ==
        "For each of the following (in-progress) chess games, please complete "
        "the notation for the last shown move by filling in the destination "
        "square.");
  CHECK(t.input ==
        "e2e4 e7e6 d2d4 d7d5 e4e5 c7c5 c2c3 b8c6 g1f3 g8e7 a2a3 a7a5 f1d3 "
        "c8d7 c1e3 d8");
  CHECK(t.targets == std::vector<std::string>{"b6", "c7", "b8", "c8"});
  CHECK(t.metadata.get_string("split") == "short");
  CHECK(t.metadata.get_string("source") == "real");
  CHECK(jsonl(task_from_jsonl(jsonl(t))) == jsonl(t));

  // The two-ply walkthrough example: complete the knight move from g1.
  const GameRecord tiny = parse_one("1. f4 d5 2. Nf3 *\n");
  const TaskInstance t2 = make_state_tracking(tiny, 2, 0);
  CHECK(t2.input == "f2f4 d7d5 g1");
  CHECK(t2.targets == std::vector<std::string>{"f3", "h3"});
}

TEST_CASE("state tracking rejects cuts outside the game") {
  const GameRecord g = parse_one("1. e4 e5 *\n");
  CHECK_THROWS_AS(make_state_tracking(g, -1, 0), Error);
  CHECK_THROWS_AS(make_state_tracking(g, 2, 0), Error);  // needs a next move
  CHECK_NOTHROW(make_state_tracking(g, 1, 0));
}

TEST_CASE("fen conversion instances") {
  const GameRecord g = parse_one("1. e4 c5 2. Nf3 *\n");
  const TaskInstance uci = make_fen_conversion(g, 3, TaskKind::uci_to_fen);
  CHECK(uci.input == "e2e4 c7c5 g1f3");
  CHECK(uci.prompt_prefix ==
        "Could you produce the Forsyth\xE2\x80\x93"
        "Edwards Notation (FEN) that corresponds to the provided UCI-based "
        "move list of the chess games?");
  CHECK(uci.targets ==
        std::vector<std::string>{
            "rnbqkbnr/pp1ppppp/8/2p5/4P3/5N2/PPPP1PPP/RNBQKB1R b KQkq - 1 2"});

  const TaskInstance pgn = make_fen_conversion(g, 2, TaskKind::pgn_to_fen);
  CHECK(pgn.input == "1. e4 c5");
  CHECK(pgn.prompt_prefix.find("PGN-based") != std::string::npos);
  CHECK(pgn.targets ==
        std::vector<std::string>{
            "rnbqkbnr/pp1ppppp/8/2p5/4P3/8/PPPP1PPP/RNBQKBNR w KQkq c6 0 2"});
  CHECK(pgn.metadata.get_string("split") == "short");

  CHECK_THROWS_AS(make_fen_conversion(g, 2, TaskKind::state_value), Error);
  // Cut at 0 is the initial position; cut at game length is allowed.
  CHECK(make_fen_conversion(g, 0, TaskKind::uci_to_fen).targets[0] ==
        format_fen(Position()));
  CHECK_NOTHROW(make_fen_conversion(g, 3, TaskKind::pgn_to_fen));
  CHECK_THROWS_AS(make_fen_conversion(g, 4, TaskKind::pgn_to_fen), Error);
}

TEST_CASE("checkmate in one: published example, hint and variants") {
  const GameRecord g = parse_one(
      "1. e4 e6 2. Ke2 d5 3. e5 c5 4. f4 Nc6 5. Nf3 Qb6 6. g4 Bd7 7. h4 "
      "Nge7 8. c3 Ng6 9. d4 cxd4 10. cxd4 Be7 11. Kf2 O-O 12. h5 Nh8 13. "
      "Be3 Qxb2+ 14. Kg3 Qxa1 15. Bd3 Qxa2 16. Rh2 Qa1 17. Qc2 Nb4 *\n");
  const auto insts = make_checkmate_in_one(g, 34, /*hint=*/true);
  REQUIRE(insts.size() == 2);

  const TaskInstance& mc = insts[0];
  CHECK(mc.task_kind == TaskKind::checkmate_in_one);
  CHECK(mc.prompt_prefix.empty());
  CHECK(mc.input.ends_with("17. Qc2 Nb4 {Now white has checkmate in one move.}"));
  CHECK(mc.target_scores.size() == 50);
  int ones = 0;
  for (const auto& [choice, score] : mc.target_scores) {
    CHECK((score == 0.0 || score == 1.0));
    if (score == 1.0) {
      ++ones;
      CHECK(choice == "Bxh7+");  // mate rendered with '+', published style
    }
  }
  CHECK(ones == 1);
  CHECK(mc.metadata.get_string("variant") == "mc");
  CHECK(mc.metadata.get_bool("hint") == true);

  const TaskInstance& esm = insts[1];
  CHECK(esm.targets == std::vector<std::string>{"Bxh7+"});
  CHECK(esm.metadata.get_string("variant") == "esm");
  CHECK(esm.input == mc.input);

  // Without the hint the input is the bare movetext.
  const auto plain = make_checkmate_in_one(g, 34, /*hint=*/false);
  CHECK(plain[0].input.ends_with("17. Qc2 Nb4"));
  CHECK(plain[0].metadata.get_bool("hint") == false);

  // No mate available at earlier cuts.
  CHECK_THROWS_AS(make_checkmate_in_one(g, 10), NoMateAvailable);

  // Puzzle form: input is the FEN itself.
  const Position p = parse_fen("6k1/5ppp/8/8/8/8/8/R3K3 w - - 0 1");
  const auto puzzle = make_checkmate_from_puzzle(p, "p-77", true);
  REQUIRE(puzzle.size() == 2);
  CHECK(puzzle[0].input ==
        "6k1/5ppp/8/8/8/8/8/R3K3 w - - 0 1 {Now white has checkmate in one "
        "move.}");
  CHECK(puzzle[0].metadata.get_string("puzzle") == "p-77");
  CHECK(puzzle[1].targets == std::vector<std::string>{"Ra8+"});
  CHECK_THROWS_AS(make_checkmate_from_puzzle(Position(), "p-0"), NoMateAvailable);
}

TEST_CASE("state value bins follow the rounded winrate") {
  const GameRecord g = parse_one("1. e4 e5 2. Nf3 Nc6 *\n");
  auto winner = [&](double w) {
    const TaskInstance t = make_state_value(g, 4, w);
    REQUIRE(t.target_scores.size() == 3);
    for (const auto& [choice, score] : t.target_scores)
      if (score == 1.0) return choice;
    return std::string("none");
  };
  CHECK(winner(0.0) == "Black has advantage.");
  CHECK(winner(0.20) == "Black has advantage.");
  CHECK(winner(0.334) == "Black has advantage.");  // rounds to 33
  CHECK(winner(0.335) == "The game is equal.");    // rounds to 34
  CHECK(winner(0.50) == "The game is equal.");
  CHECK(winner(0.664) == "The game is equal.");
  CHECK(winner(0.67) == "White has advantage.");
  CHECK(winner(1.0) == "White has advantage.");

  const TaskInstance t = make_state_value(g, 4, 0.5);
  CHECK(t.prompt_prefix ==
        "Evaluate the following PGN to see whether black or white takes "
        "advantage.");
  CHECK(t.input == "1. e4 e5 2. Nf3 Nc6");
  CHECK(t.target_scores[0].first == "Black has advantage.");
  CHECK(t.target_scores[1].first == "The game is equal.");
  CHECK(t.target_scores[2].first == "White has advantage.");
  CHECK_FALSE(t.metadata.get_bool("brace"));
  CHECK(make_state_value(g, 4, 0.5, true).metadata.get_bool("brace") == true);
  CHECK_THROWS_AS(make_state_value(g, 4, 1.5), Error);
}

TEST_CASE("annotation multiple choice") {
  const auto out = parse_pgn(
      "1. e4 {one} e5 {two} 2. Nf3 {three} Nc6 {four} 3. Bb5 {five} *\n");
  REQUIRE(out.games.size() == 1);
  const auto pairs = extract_pairs(out.games[0]);
  REQUIRE(pairs.size() == 5);

  const TaskInstance t = make_annotation_mc(pairs, 2, 9);
  CHECK(t.task_kind == TaskKind::annotation_mc);
  CHECK(t.prompt_prefix == "Annotate the last step of the following PGN.");
  CHECK(t.input == "1. e4 e5 2. Nf3");
  REQUIRE(t.target_scores.size() == 4);
  double truth_score = 0.0;
  std::set<std::string> choices;
  for (const auto& [choice, score] : t.target_scores) {
    choices.insert(choice);
    if (choice == "three") truth_score = score;
    else CHECK(score == 0.0);
  }
  CHECK(truth_score == 1.0);
  CHECK(choices.size() == 4);
  CHECK(choices.count("three") == 1);

  // Deterministic for fixed (seed, index); different seeds may differ.
  const TaskInstance again = make_annotation_mc(pairs, 2, 9);
  CHECK(jsonl(again) == jsonl(t));

  CHECK_THROWS_AS(make_annotation_mc(std::span(pairs.data(), 3), 0, 1), Error);
  CHECK_THROWS_AS(make_annotation_mc(pairs, 99, 1), Error);
}

TEST_CASE("openings: TSV load and both task directions") {
  std::istringstream tsv(
      "eco\tname\tpgn\n"
      "A00\tAmar Gambit\t1. Nh3 d5 2. g3 e5 3. f4 Bxh3 4. Bxh3 exf4\n"
      "D32\tTarrasch Defense: Tarrasch Gambit\t1. d4 d5 2. c4 e6 3. Nc3 c5\n"
      "A45\tIndian Defense: Gibbins-Weidenhagen Gambit\t1. d4 Nf6 2. g4\n"
      "A00\tVan Geet Opening: Dusseldorf Gambit\t1. Nc3 c5 2. b4\n"
      "E80\tKing's Indian Defense: Samisch Variation\t1. d4 Nf6 2. c4 g6\n");
  const auto rows = load_openings_tsv(tsv);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].eco == "A00");
  CHECK(rows[0].name == "Amar Gambit");

  const TaskInstance to_pgn = make_opening_mc(rows, 0, TaskKind::opening2pgn, 3);
  CHECK(to_pgn.prompt_prefix == "Show me the PGN of the following opening.");
  // Bare names get the published " Opening" styling...
  CHECK(to_pgn.input == "Amar Gambit Opening");
  REQUIRE(to_pgn.target_scores.size() == 5);
  double truth = 0.0;
  for (const auto& [choice, score] : to_pgn.target_scores)
    if (choice == "1. Nh3 d5 2. g3 e5 3. f4 Bxh3 4. Bxh3 exf4") truth = score;
  CHECK(truth == 1.0);
  // ...but names already containing "Opening" are left alone.
  CHECK(make_opening_mc(rows, 3, TaskKind::opening2pgn, 3).input ==
        "Van Geet Opening: Dusseldorf Gambit");

  const TaskInstance to_name = make_opening_mc(rows, 0, TaskKind::pgn2opening, 3);
  CHECK(to_name.input ==
        "1. Nh3 d5 2. g3 e5 3. f4 Bxh3 4. Bxh3 exf4. The opening name of this "
        "PGN is.");
  truth = 0.0;
  for (const auto& [choice, score] : to_name.target_scores)
    if (choice == "Amar Gambit") truth = score;
  CHECK(truth == 1.0);

  // Determinism and error paths.
  CHECK(jsonl(make_opening_mc(rows, 0, TaskKind::pgn2opening, 3)) ==
        jsonl(to_name));
  CHECK_THROWS_AS(make_opening_mc(std::span(rows.data(), 4), 0,
                                  TaskKind::opening2pgn, 1),
                  Error);
  CHECK_THROWS_AS(make_opening_mc(rows, 0, TaskKind::state_value, 1), Error);

  std::istringstream bad("A00\tonly two columns\n");
  CHECK_THROWS_AS(load_openings_tsv(bad), Error);

  // The shipped openings table loads and covers every row with 3 columns.
  std::ifstream file(std::string(FIXTURES_DIR) + "/openings.tsv");
  REQUIRE(file.good());
  const auto shipped = load_openings_tsv(file);
  CHECK(shipped.size() >= 40);
  for (const auto& row : shipped) {
    CHECK_FALSE(row.eco.empty());
    CHECK_FALSE(row.name.empty());
    CHECK(row.pgn.starts_with("1."));
  }
}

TEST_CASE("general policy: rank-normalized scores") {
  const GameRecord g = parse_one("1. e4 e5 *\n");
  const auto positions = g.positions();
  const Position& p = positions[2];
  const auto legal = legal_moves(p);

  // All-tied winrates: ranks follow the deterministic move order.
  std::vector<std::pair<Move, double>> tied;
  for (const Move m : legal) tied.emplace_back(m, 0.5);
  const TaskInstance t = make_general_policy(g, 2, tied, {700, 1000}, Color::white, 11);
  CHECK(t.prompt_prefix == "In the following chess game, you play white.");
  REQUIRE(t.target_scores.size() == legal.size());
  CHECK(t.target_scores.front().second == 0.0);
  CHECK(t.target_scores.back().second == 1.0);
  CHECK(t.target_scores.front().first == format_san(p, legal.front()));
  for (std::size_t r = 0; r < legal.size(); ++r)
    CHECK(t.target_scores[r].second ==
          static_cast<double>(r) / static_cast<double>(legal.size() - 1));

  // Distinct winrates: the best move scores 1.0 regardless of move order.
  std::vector<std::pair<Move, double>> graded = tied;
  graded[3].second = 0.99;
  graded[7].second = 0.01;
  const TaskInstance ranked =
      make_general_policy(g, 2, graded, {700, 1000}, Color::white, 11);
  CHECK(ranked.target_scores.front().first == format_san(p, legal[7]));
  CHECK(ranked.target_scores.back().first == format_san(p, legal[3]));
  CHECK(ranked.target_scores.back().second == 1.0);

  // The prompt header is the fixed published template.
  CHECK(t.input.starts_with(
      "[Date \"2017.04.01\"]\n[White \"???\"]\n[Black \"???\"]\n[Result "
      "\"1-0\"]\n[WhiteElo \""));
  CHECK(t.input.find("[TimeControl \"300+0\"]") != std::string::npos);
  CHECK(t.input.ends_with("[Termination \"Time forfeit\"]\n1. e4 e5"));
  const auto white_elo = t.metadata.get_int("white_elo");
  REQUIRE(white_elo);
  CHECK(*white_elo >= 700);
  CHECK(*white_elo < 1000);
  CHECK(t.metadata.get_string("elo_band") == "700-1000");

  // Black to move flips the prompt color and result header.
  std::vector<std::pair<Move, double>> after_e4;
  const Position& black_pos = positions[1];
  for (const Move m : legal_moves(black_pos)) after_e4.emplace_back(m, 0.5);
  const TaskInstance bt =
      make_general_policy(g, 1, after_e4, {1200, 1500}, Color::black, 4);
  CHECK(bt.prompt_prefix == "In the following chess game, you play black.");
  CHECK(bt.input.find("[Result \"0-1\"]") != std::string::npos);

  // Mismatched color / missing moves / bad band all throw.
  CHECK_THROWS_AS(make_general_policy(g, 2, tied, {700, 1000}, Color::black, 1),
                  Error);
  CHECK_THROWS_AS(make_general_policy(g, 2, std::span(tied.data(), 3),
                                      {700, 1000}, Color::white, 1),
                  Error);
  CHECK_THROWS_AS(make_general_policy(g, 2, tied, {1000, 700}, Color::white, 1),
                  Error);

  // A single legal move scores 1.0.
  GameRecord forced;
  forced.headers = {{"FEN", "k7/8/8/8/P7/8/2q5/K7 w - - 0 1"}};
  const Position fp = forced.initial_position();
  const auto only = legal_moves(fp);
  REQUIRE(only.size() == 1);
  std::vector<std::pair<Move, double>> one{{only[0], 0.5}};
  const TaskInstance single =
      make_general_policy(forced, 0, one, {700, 1000}, Color::white, 2);
  REQUIRE(single.target_scores.size() == 1);
  CHECK(single.target_scores[0].second == 1.0);
}

TEST_CASE("elo bands and length splits") {
  const auto modeling = default_elo_bands();
  REQUIRE(modeling.size() == 9);
  CHECK(modeling.front().lo == 0);
  CHECK(modeling.front().hi == 1000);
  CHECK(modeling[1].lo == 1000);
  CHECK(modeling[1].hi == 1200);
  CHECK(modeling.back().lo == 2400);
  CHECK(modeling.back().hi == 3000);

  const auto eval = eval_elo_bands();
  REQUIRE(eval.size() == 4);
  CHECK(eval[0].lo == 700);
  CHECK(eval[0].hi == 1000);
  CHECK(eval[3].lo == 2700);
  CHECK(eval[3].hi == 3000);

  CHECK(length_split(0) == "short");
  CHECK(length_split(20) == "short");
  CHECK(length_split(21) == "medium");
  CHECK(length_split(60) == "medium");
  CHECK(length_split(61) == "long");
}

TEST_CASE("stratify_by_elo samples per band deterministically") {
  std::vector<GameRecord> games;
  for (int i = 0; i < 50; ++i) {
    GameRecord g = parse_one("1. e4 e5 *\n");
    g.headers = {{"WhiteElo", std::to_string(800 + i * 40)},
                 {"BlackElo", std::to_string(800 + i * 40)}};
    games.push_back(std::move(g));
  }
  games.push_back(parse_one("1. d4 d5 *\n"));  // no Elo headers

  StratifyStats stats;
  const auto picked = stratify_by_elo(games, eval_elo_bands(), 3, 1, &stats);
  CHECK(stats.missing_elo == 1);
  CHECK(picked.size() <= 12);
  CHECK(picked.size() >= 9);  // three full bands at least

  const auto again = stratify_by_elo(games, eval_elo_bands(), 3, 1);
  REQUIRE(again.size() == picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i)
    CHECK(picked[i].header("WhiteElo") == again[i].header("WhiteElo"));

  // Band membership is the Elo mean, lo inclusive, hi exclusive.
  GameRecord edge = parse_one("1. e4 e5 *\n");
  edge.headers = {{"WhiteElo", "1000"}, {"BlackElo", "998"}};  // mean 999
  const EloBand band{700, 1000};
  const auto in = stratify_by_elo(std::vector<GameRecord>{edge},
                                  std::vector<EloBand>{band}, 5, 0);
  CHECK(in.size() == 1);
  edge.headers = {{"WhiteElo", "1000"}, {"BlackElo", "1000"}};
  const auto out = stratify_by_elo(std::vector<GameRecord>{edge},
                                   std::vector<EloBand>{band}, 5, 0);
  CHECK(out.empty());

  // per_band caps each band.
  const auto capped = stratify_by_elo(games, eval_elo_bands(), 1, 9);
  CHECK(capped.size() <= 4);
}

TEST_CASE("synthetic games are deterministic and legal") {
  const GameRecord g = gen_random_game(99, 40);
  CHECK_FALSE(g.moves.empty());
  CHECK(g.moves.size() <= 40);
  CHECK(g.header("Source") == "synthetic");
  CHECK(g.header("Result"));
  CHECK_NOTHROW(g.positions());

  const GameRecord same = gen_random_game(99, 40);
  CHECK(format_movetext(same) == format_movetext(g));
  const GameRecord other = gen_random_game(100, 40);
  CHECK(format_movetext(other) != format_movetext(g));
  CHECK_THROWS_AS(gen_random_game(1, 1), Error);

  // Terminal games stop early with the matching result.
  const GameRecord longer = gen_random_game(7, 400);
  const auto positions = longer.positions();
  std::vector<Position> history(positions.begin(), positions.end() - 1);
  const Outcome oc = outcome(positions.back(), history);
  if (longer.result != GameResult::unknown) CHECK(oc.over());
}

TEST_CASE("modeling templates: builtin pool and TSV loader agree") {
  const ModelingTemplates& d = default_modeling_templates();
  for (int k = 0; k < kModelingTaskCount; ++k) {
    CHECK(d.phrasings[k].size() >= 3);
    const auto task = static_cast<ModelingTask>(k);
    CHECK(modeling_task_from_string(to_string(task)) == task);
  }
  CHECK_FALSE(modeling_task_from_string("nope"));

  std::ifstream file(std::string(DATA_DIR) + "/modeling_templates.tsv");
  REQUIRE(file.good());
  const ModelingTemplates loaded = load_modeling_templates(file);
  for (int k = 0; k < kModelingTaskCount; ++k)
    CHECK(loaded.phrasings[k] == d.phrasings[k]);

  std::istringstream bad_name("bogus_task\tdo the thing\n");
  CHECK_THROWS_AS(load_modeling_templates(bad_name), Error);
  std::istringstream missing("pgn_to_fen\tonly one task covered\n");
  CHECK_THROWS_AS(load_modeling_templates(missing), Error);
}

TEST_CASE("gen_modeling emits one instance per (game, task)") {
  std::vector<GameRecord> games;
  for (std::uint64_t s = 0; s < 4; ++s) games.push_back(gen_random_game(s + 50, 36));

  const auto tasks = gen_modeling(games, 5);
  REQUIRE(tasks.size() == games.size() * kModelingTaskCount);

  std::set<std::string> names;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskInstance& t = tasks[i];
    CHECK(t.task_kind == TaskKind::modeling_synthetic);
    CHECK_FALSE(t.prompt_prefix.empty());
    REQUIRE_FALSE(t.targets.empty());
    CHECK_FALSE(t.targets[0].empty());
    CHECK(t.metadata.get_string("source") == "synthetic");
    const auto name = t.metadata.get_string("task");
    REQUIRE(name);
    names.insert(*name);
    CHECK(jsonl(task_from_jsonl(jsonl(t))) == jsonl(t));
  }
  CHECK(names.size() == kModelingTaskCount);

  // Determinism, and slice generation matches the whole-corpus call.
  const auto again = gen_modeling(games, 5);
  REQUIRE(again.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    CHECK(jsonl(again[i]) == jsonl(tasks[i]));

  const std::span<const GameRecord> all(games);
  auto head = gen_modeling(all.first(1), 5, default_modeling_templates(), 0);
  const auto tail = gen_modeling(all.subspan(1), 5, default_modeling_templates(), 1);
  head.insert(head.end(), tail.begin(), tail.end());
  REQUIRE(head.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    CHECK(jsonl(head[i]) == jsonl(tasks[i]));
}

TEST_CASE("gen_modeling task payloads are faithful to the game") {
  // A fixed short game; every task's target is recomputable by hand.
  const GameRecord g = parse_one("1. e4 c5 2. Nf3 d6 3. d4 cxd4 4. Nxd4 Nf6 *\n");
  std::vector<GameRecord> games{g};
  const auto tasks = gen_modeling(games, 123);
  REQUIRE(tasks.size() == 11);

  const auto positions = g.positions();
  for (const TaskInstance& t : tasks) {
    const auto name = t.metadata.get_string("task");
    REQUIRE(name);
    const auto cut = t.metadata.get_int("cut");
    REQUIRE(cut);
    REQUIRE(*cut >= 4);
    REQUIRE(*cut <= static_cast<std::int64_t>(g.moves.size()));
    const Position& at = positions[static_cast<std::size_t>(*cut)];

    if (*name == "pgn_to_fen") {
      CHECK(t.input == format_movetext(g, static_cast<int>(*cut)));
      CHECK(t.targets[0] == format_fen(at));
    } else if (*name == "uci_to_fen") {
      CHECK(t.targets[0] == format_fen(at));
    } else if (*name == "fen_to_ascii") {
      CHECK(t.input == format_fen(at));
      CHECK(t.targets[0] == ascii_board(at));
    } else if (*name == "fen_uci_to_san" || *name == "fen_san_to_uci") {
      // Input carries the position before the last prefix move plus that move.
      const Position& before = positions[static_cast<std::size_t>(*cut) - 1];
      const Move last = g.moves[static_cast<std::size_t>(*cut) - 1].move;
      CHECK(t.input.find(format_fen(before)) != std::string::npos);
      if (*name == "fen_uci_to_san") {
        CHECK(t.input.find(format_uci(last)) != std::string::npos);
        CHECK(t.targets[0] == format_san(before, last));
      } else {
        CHECK(t.input.find(format_san(before, last)) != std::string::npos);
        CHECK(t.targets[0] == format_uci(last));
      }
    } else if (*name == "fen_to_legal_san") {
      CHECK(t.input == format_fen(at));
      std::string joined;
      for (const Move m : legal_moves(at)) {
        if (!joined.empty()) joined += ' ';
        joined += format_san(at, m);
      }
      CHECK(t.targets[0] == joined);
    }
  }
}
