#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chessbench/chess.hpp"
#include "chessbench/errors.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/rng.hpp"

using namespace chessbench;

namespace {

constexpr const char* kStartFen =
    "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

// Every SAN a position offers, for comparing against frozen fixture lists.
std::set<std::string> all_sans(const Position& p) {
  std::set<std::string> out;
  for (const Move m : legal_moves(p)) out.insert(format_san(p, m));
  return out;
}

std::string fixture_path(const char* name) {
  return std::string(FIXTURES_DIR) + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("FEN: canonical format and round trips") {
  CHECK(format_fen(Position()) == kStartFen);
  CHECK(parse_fen(kStartFen) == Position());

  const char* fens[] = {
      "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
      "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
      "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8",
      "4k3/8/8/8/8/8/8/4K3 b - - 42 99",
      // The en-passant square survives the round trip even though no
      // capture is possible (python-chess convention).
      "rnbqkbnr/ppp1p1pp/8/3pPp2/8/8/PPPP1PPP/RNBQKBNR w KQkq f6 0 3",
  };
  for (const char* fen : fens) CHECK(format_fen(parse_fen(fen)) == fen);

  // Whitespace liberties are tolerated.
  CHECK(format_fen(parse_fen("  8/8/8/8/8/8/8/K6k w - - 0 1 ")) ==
        "8/8/8/8/8/8/8/K6k w - - 0 1");
}

TEST_CASE("FEN: errors carry the offending field and offset") {
  auto field_of = [](const char* fen) {
    try {
      parse_fen(fen);
    } catch (const FenError& e) {
      CHECK(e.offset() <= std::string_view(fen).size());
      return e.field();
    }
    return std::string("no error");
  };
  CHECK(field_of("8/8/8/8/8/8/8 w - - 0 1") == "placement");        // 7 ranks
  CHECK(field_of("9/8/8/8/8/8/8/K6k w - - 0 1") == "placement");    // bad digit
  CHECK(field_of("x7/8/8/8/8/8/8/K6k w - - 0 1") == "placement");   // bad piece
  CHECK(field_of("8/8/8/8/8/8/8/K6k x - - 0 1") == "side");
  CHECK(field_of("8/8/8/8/8/8/8/K6k w KQx - 0 1") == "castling");
  CHECK(field_of("8/8/8/8/8/8/8/K6k w - e9 0 1") == "en_passant");
  CHECK(field_of("8/8/8/8/8/8/8/K6k w - - q 1") == "halfmove");
  CHECK(field_of("8/8/8/8/8/8/8/K6k w - - 0 0") == "fullmove");
  CHECK(field_of("8/8/8/8/8/8/8/K6k w - -") == "fields");            // missing fields
  CHECK_THROWS_AS(parse_fen(""), FenError);
}

TEST_CASE("SAN: canonical formatting with validated suffixes") {
  const Position start;
  CHECK(format_san(start, parse_uci_move("e2e4")) == "e4");
  CHECK(format_san(start, parse_uci_move("g1f3")) == "Nf3");

  // Scholar's-mate-adjacent check and the Fool's mate '#'.
  Position p = parse_fen("rnbqkbnr/pppp1ppp/8/4p3/8/5P2/PPPPP1PP/RNBQKBNR w KQkq - 0 2");
  p = apply(p, parse_uci_move("g2g4"));
  CHECK(format_san(p, parse_uci_move("d8h4")) == "Qh4#");
  const Position spanish =
      parse_fen("rnbqkbnr/pppp1ppp/8/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R b KQkq - 1 2");
  const Position after_nc6 = apply(spanish, parse_uci_move("b8c6"));
  CHECK(format_san(after_nc6, parse_uci_move("f1b5")) == "Bb5");

  // Castling, capture, en passant, promotion.
  const Position castle = parse_fen("4k3/8/8/8/8/8/8/R3K2R w KQ - 0 1");
  CHECK(format_san(castle, parse_uci_move("e1g1")) == "O-O");
  CHECK(format_san(castle, parse_uci_move("e1c1")) == "O-O-O");
  const Position ep =
      parse_fen("rnbqkbnr/ppp1p1pp/8/3pPp2/8/8/PPPP1PPP/RNBQKBNR w KQkq f6 0 3");
  CHECK(format_san(ep, parse_uci_move("e5f6")) == "exf6");
  const Position promo = parse_fen("1n6/P7/8/8/8/8/8/k6K w - - 0 1");
  CHECK(format_san(promo, parse_uci_move("a7a8q")) == "a8=Q+");
  CHECK(format_san(promo, parse_uci_move("a7b8r")) == "axb8=R");

  CHECK_THROWS_AS(format_san(start, parse_uci_move("e2e5")), IllegalMove);
}

TEST_CASE("SAN: minimal disambiguation matches the frozen fixtures") {
  // Two knights, same rank: file letters suffice.
  const Position knights = parse_fen("k7/8/8/8/8/8/8/K1N1N3 w - - 0 1");
  std::set<std::string> d3;
  for (const Move m : legal_moves(knights))
    if (m.to == *Square::parse("d3")) d3.insert(format_san(knights, m));
  CHECK(d3 == std::set<std::string>{"Ncd3", "Ned3"});

  // Two rooks, same file: rank digits.
  const Position rooks = parse_fen("k7/8/8/7R/8/8/8/K6R w - - 0 1");
  std::set<std::string> h4;
  for (const Move m : legal_moves(rooks))
    if (m.to == *Square::parse("h4")) h4.insert(format_san(rooks, m));
  CHECK(h4 == std::set<std::string>{"R1h4", "R5h4"});

  // Three queens: file, rank, and full-square disambiguation in one position.
  const Position queens = parse_fen("8/8/k7/8/3Q3Q/8/8/K6Q w - - 0 1");
  std::set<std::string> e4;
  for (const Move m : legal_moves(queens))
    if (m.to == *Square::parse("e4")) e4.insert(format_san(queens, m));
  CHECK(e4 == std::set<std::string>{"Qde4", "Qh4e4", "Q1e4"});

  // Promotions with a capture choice, frozen from the reference generator.
  const Position promo = parse_fen("1n6/P7/8/8/8/8/8/k6K w - - 0 1");
  CHECK(all_sans(promo) ==
        std::set<std::string>{"a8=N", "a8=B", "a8=R+", "a8=Q+", "axb8=N", "axb8=B",
                              "axb8=R", "axb8=Q", "Kg2", "Kh2", "Kg1"});
}

TEST_CASE("SAN: parser accepts corpus liberties and rejects garbage") {
  const Position start;
  CHECK(parse_san(start, "e4") == parse_uci_move("e2e4"));
  CHECK(parse_san(start, "e4!?") == parse_uci_move("e2e4"));
  CHECK(parse_san(start, "Nf3+?!") == parse_uci_move("g1f3"));  // stray glyphs

  const Position castle = parse_fen("4k3/8/8/8/8/8/8/R3K2R w KQ - 0 1");
  CHECK(parse_san(castle, "0-0") == parse_uci_move("e1g1"));
  CHECK(parse_san(castle, "O-O-O+") == parse_uci_move("e1c1"));

  const Position promo = parse_fen("1n6/P7/8/8/8/8/8/k6K w - - 0 1");
  CHECK(parse_san(promo, "a8Q") == parse_uci_move("a7a8q"));  // omitted '='
  CHECK(parse_san(promo, "axb8=N") == parse_uci_move("a7b8n"));

  CHECK_THROWS_AS(parse_san(start, "Ke2"), SanError);    // no such legal move
  CHECK_THROWS_AS(parse_san(start, "zz9"), SanError);    // unparseable
  CHECK_THROWS_AS(parse_san(start, ""), SanError);
  const Position knights = parse_fen("k7/8/8/8/8/8/8/K1N1N3 w - - 0 1");
  CHECK_THROWS_AS(parse_san(knights, "Nd3"), SanError);  // ambiguous
  CHECK(parse_san(knights, "Ncd3") == parse_uci_move("c1d3"));
}

TEST_CASE("SAN round trips over random playouts") {
  Rng rng(7);
  int checked = 0;
  for (int game = 0; game < 60; ++game) {
    Position p;
    for (int ply = 0; ply < 100; ++ply) {
      const auto moves = legal_moves(p);
      if (moves.empty()) break;
      for (const Move m : moves) {
        const std::string san = format_san(p, m);
        CAPTURE(format_fen(p));
        CAPTURE(san);
        REQUIRE(parse_san(p, san) == m);
        ++checked;
      }
      p = apply(p, moves[rng.below(moves.size())]);
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("UCI: move tokens and line replay") {
  CHECK(format_uci(parse_uci_move("e2e4")) == "e2e4");
  CHECK(format_uci(parse_uci_move("a7a8q")) == "a7a8q");
  CHECK(parse_uci_move("a7a8n").promotion == PieceKind::knight);
  CHECK_THROWS_AS(parse_uci_move("e2"), UciError);
  CHECK_THROWS_AS(parse_uci_move("e2e9"), UciError);
  CHECK_THROWS_AS(parse_uci_move("e2e4x"), UciError);

  const auto trace = parse_uci_line("e2e4 e7e5 g1f3");
  CHECK(trace.size() == 4);
  CHECK(trace[0] == Position());
  CHECK(format_fen(trace[1]) ==
        "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1");

  try {
    parse_uci_line("e2e4 e7e5 e4e5");  // illegal third token
    FAIL("expected UciError");
  } catch (const UciError& e) {
    CHECK(e.token_index() == 2);
  }
  CHECK(parse_uci_line("").size() == 1);
}

TEST_CASE("UCI: long game replay reaches the frozen final FEN") {
  // 81-ply game; final position frozen from an independent replayer.
  const auto trace = parse_uci_line(
      "e2e4 e7e5 g1f3 b8c6 f1b5 a7a6 b5a4 g8f6 e1g1 f8e7 f1e1 b7b5 a4b3 d7d6 "
      "c2c3 e8g8 h2h3 c6b8 d2d4 b8d7 b1d2 c8b7 b3c2 f8e8 d2f1 e7f8 f1g3 g7g6 "
      "a2a4 c7c5 d4d5 c5c4 c1g5 h7h6 g5e3 d7c5 d1d2 h6h5 e3g5 f8g7 f3h2 d8c7 "
      "e1f1 f6h7 g5h6 g7h8 f2f4 e5f4 h6f4 h7f6 a1e1 b5a4 h2f3 f6d7 f4h6 d7e5 "
      "f3e5 h8e5 f1f3 c7b6 g1h1 b6b2 e1f1 e8e7 h6g5 e7d7 g5f6 e5f6 f3f6 a4a3 "
      "g3h5 a3a2 d2h6 g6h5 f6f3 h5h4 f3f4 f7f5 f4f5 d7g7 f5h5");
  CHECK(trace.size() == 82);
  CHECK(format_fen(trace.back()) ==
        "r5k1/1b4r1/p2p3Q/2nP3R/2p1P2p/2P4P/pqB3P1/5R1K b - - 2 41");
}

TEST_CASE("PGN: corpus parses strictly with stable SAN and a format fixed point") {
  std::ifstream in(fixture_path("corpus.pgn"));
  REQUIRE(in.good());
  PgnReader reader(in);
  std::vector<GameRecord> games;
  while (auto g = reader.next()) games.push_back(std::move(*g));
  CHECK(reader.warnings().empty());
  CHECK(games.size() == 48);

  std::size_t total_moves = 0, total_comments = 0, unknown_results = 0;
  std::string formatted;
  for (const GameRecord& g : games) {
    REQUIRE(g.header("Event"));
    unknown_results += g.result == GameResult::unknown;
    const auto positions = g.positions();
    REQUIRE(positions.size() == g.moves.size() + 1);
    for (std::size_t i = 0; i < g.moves.size(); ++i) {
      // Stored SAN is canonical: formatting the move reproduces it.
      REQUIRE(format_san(positions[i], g.moves[i].move) == g.moves[i].san);
      total_comments += g.moves[i].comments.size();
    }
    total_moves += g.moves.size();
    formatted += format_pgn(g) + "\n";
  }
  CHECK(total_moves == 2757);
  CHECK(total_comments > 100);
  CHECK(unknown_results == 2);  // the two unterminated games carry "*"

  // parse ∘ format is a fixed point.
  const auto reparsed = parse_pgn(formatted);
  CHECK(reparsed.warnings.empty());
  REQUIRE(reparsed.games.size() == games.size());
  for (std::size_t i = 0; i < games.size(); ++i)
    CHECK(format_pgn(reparsed.games[i]) == format_pgn(games[i]));
}

TEST_CASE("PGN: lenient mode skips malformed games, strict mode throws") {
  const std::string text = read_file(fixture_path("mixed_bad.pgn"));

  const auto lenient = parse_pgn(text, {.lenient = true});
  CHECK(lenient.games.size() == 2);
  CHECK(lenient.warnings.size() == 2);
  CHECK(lenient.games[0].header("Event") == "Good game");
  CHECK(lenient.games[1].header("Event") == "Second good game");
  for (const std::string& w : lenient.warnings)
    CHECK(w.find("line") != std::string::npos);

  try {
    parse_pgn(text);
    FAIL("expected PgnError");
  } catch (const PgnError& e) {
    CHECK(e.line() > 1);
    CHECK(e.column() >= 0);
  }
}

TEST_CASE("PGN: headers, comments, NAGs, variations and FEN starts") {
  const char* text =
      "[Event \"Unit\"]\n[FEN \"4k3/8/8/8/8/8/8/R3K2R w KQ - 0 1\"]\n\n"
      "{setup} 1. O-O $1 {castled [%clk 0:01:00]} Kd7?! (1... Ke7 2. Rfe1+) "
      "2. Rab1 1-0\n";
  const auto out = parse_pgn(text);
  REQUIRE(out.games.size() == 1);
  const GameRecord& g = out.games[0];
  CHECK(g.header("FEN") == "4k3/8/8/8/8/8/8/R3K2R w KQ - 0 1");
  CHECK_FALSE(g.header("Site"));
  CHECK(g.initial_position() == parse_fen("4k3/8/8/8/8/8/8/R3K2R w KQ - 0 1"));
  CHECK(g.start_comments == std::vector<std::string>{"setup"});
  REQUIRE(g.moves.size() == 3);
  CHECK(g.moves[0].san == "O-O");
  CHECK(g.moves[0].nags == std::vector<int>{1});
  CHECK(g.moves[0].comments == std::vector<std::string>{"castled [%clk 0:01:00]"});
  CHECK(g.moves[1].san == "Kd7");
  CHECK(g.moves[1].suffix == "?!");
  CHECK(g.variation_count == 1);
  CHECK(g.result == GameResult::white_win);
  CHECK(to_string(g.result) == "1-0");

  // The formatted text parses back to the same canonical form.
  const auto again = parse_pgn(format_pgn(g));
  REQUIRE(again.games.size() == 1);
  CHECK(format_pgn(again.games[0]) == format_pgn(g));
}

TEST_CASE("format_movetext renders numbered prefixes") {
  const auto out = parse_pgn("1. e4 c5 2. Nf3 d6 3. d4 *\n");
  REQUIRE(out.games.size() == 1);
  const GameRecord& g = out.games[0];
  CHECK(format_movetext(g) == "1. e4 c5 2. Nf3 d6 3. d4");
  CHECK(format_movetext(g, 0) == "");
  CHECK(format_movetext(g, 1) == "1. e4");
  CHECK(format_movetext(g, 2) == "1. e4 c5");
  CHECK(format_movetext(g, 3) == "1. e4 c5 2. Nf3");
  CHECK(format_movetext(g, 99) == "1. e4 c5 2. Nf3 d6 3. d4");

  // Black-to-move starts number from the FEN's fullmove with an ellipsis.
  const auto black =
      parse_pgn("[FEN \"4k3/8/8/8/8/8/4P3/4K3 b - - 0 12\"]\n\n12... Kd7 13. e4 *\n");
  REQUIRE(black.games.size() == 1);
  CHECK(format_movetext(black.games[0]) == "12... Kd7 13. e4");
}

TEST_CASE("clean_comment strips directives and emoji, keeps [%eval]") {
  CHECK(clean_comment(" [%clk 0:03:00] nice   move ") == "nice move");
  CHECK(clean_comment("[%eval 0.35] equal") == "[%eval 0.35] equal");
  CHECK(clean_comment("[%cal Ge2e4,Rd2d4] plan [%csl Gd4]") == "plan");
  CHECK(clean_comment("[%arrow a2a4]") == "");
  CHECK(clean_comment("[%evp 12,34]") == "");
  CHECK(clean_comment("brilliant \xF0\x9F\x94\xA5 idea") == "brilliant idea");
  CHECK(clean_comment("line\nbreaks\tand   spaces") == "line breaks and spaces");
  CHECK(clean_comment("") == "");

  // Idempotence over corpus comments.
  std::ifstream in(fixture_path("corpus.pgn"));
  PgnReader reader(in);
  while (auto g = reader.next()) {
    const GameRecord cleaned = clean_comments(*g);
    for (const TimedMove& tm : cleaned.moves)
      for (const std::string& c : tm.comments) {
        REQUIRE_FALSE(c.empty());
        REQUIRE(clean_comment(c) == c);
      }
  }
}

TEST_CASE("ascii_board renders rank 8 first") {
  CHECK(ascii_board(Position()) ==
        "r n b q k b n r\n"
        "p p p p p p p p\n"
        ". . . . . . . .\n"
        ". . . . . . . .\n"
        ". . . . . . . .\n"
        ". . . . . . . .\n"
        "P P P P P P P P\n"
        "R N B Q K B N R\n");
  CHECK(ascii_board(parse_fen("8/8/8/8/8/8/8/K6k w - - 0 1")).substr(0, 16) ==
        ". . . . . . . .\n");
}
