#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>
#include <vector>

#include "chessbench/chess.hpp"
#include "chessbench/encoding.hpp"
#include "chessbench/notation.hpp"
#include "chessbench/rng.hpp"
#include "chessbench/scoring.hpp"

namespace {

using namespace chessbench;

// Mid-game position with a rich move set (from the Kiwipete perft suite).
const char* kBusyFen =
    "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1";

void BM_LegalMoves(benchmark::State& state) {
  const Position p = parse_fen(kBusyFen);
  for (auto _ : state) benchmark::DoNotOptimize(legal_moves(p));
}
BENCHMARK(BM_LegalMoves);

void BM_Perft4(benchmark::State& state) {
  const Position p = Position::initial();
  for (auto _ : state) benchmark::DoNotOptimize(perft(p, 4));
}
BENCHMARK(BM_Perft4)->Unit(benchmark::kMillisecond);

void BM_ParseFen(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(parse_fen(kBusyFen));
}
BENCHMARK(BM_ParseFen);

void BM_SanRoundTrip(benchmark::State& state) {
  const Position p = parse_fen(kBusyFen);
  const auto moves = legal_moves(p);
  for (auto _ : state) {
    for (const Move m : moves)
      benchmark::DoNotOptimize(parse_san(p, format_san(p, m)));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(moves.size()));
}
BENCHMARK(BM_SanRoundTrip);

std::vector<Position> random_line(int plies) {
  Rng rng(7);
  std::vector<Position> line{Position::initial()};
  for (int i = 0; i < plies; ++i) {
    const auto moves = legal_moves(line.back());
    if (moves.empty()) break;
    line.push_back(apply(line.back(), moves[rng.below(moves.size())]));
  }
  return line;
}

void BM_EncodeHistory(benchmark::State& state) {
  const auto line = random_line(40);
  for (auto _ : state) benchmark::DoNotOptimize(encode_history(line));
}
BENCHMARK(BM_EncodeHistory);

void BM_EncodeMove(benchmark::State& state) {
  const Position p = parse_fen(kBusyFen);
  const auto moves = legal_moves(p);
  for (auto _ : state) {
    for (const Move m : moves) benchmark::DoNotOptimize(encode_move(p, m));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(moves.size()));
}
BENCHMARK(BM_EncodeMove);

void BM_NormalizedLevenshtein(benchmark::State& state) {
  const std::string a(64, 'x');
  std::string b = a;
  b[10] = 'y';
  b[40] = 'z';
  for (auto _ : state) benchmark::DoNotOptimize(normalized_levenshtein(a, b));
}
BENCHMARK(BM_NormalizedLevenshtein);

}  // namespace

BENCHMARK_MAIN();
