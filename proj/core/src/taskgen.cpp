#include "chessbench/taskgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <utility>

#include "json.hpp"

namespace chessbench {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kStateTrackingPrefix =
    "For each of the following (in-progress) chess games, please complete the "
    "notation for the last shown move by filling in the destination square.";
// U+2013 en dash, as published.
constexpr const char* kPgnToFenPrefix =
    "Could you produce the Forsyth\xE2\x80\x93"
    "Edwards Notation (FEN) that corresponds to the provided PGN-based move "
    "list of the chess games?";
constexpr const char* kUciToFenPrefix =
    "Could you produce the Forsyth\xE2\x80\x93"
    "Edwards Notation (FEN) that corresponds to the provided UCI-based move "
    "list of the chess games?";
constexpr const char* kStateValuePrefix =
    "Evaluate the following PGN to see whether black or white takes advantage.";
constexpr const char* kAnnotationPrefix =
    "Annotate the last step of the following PGN.";
constexpr const char* kOpening2PgnPrefix =
    "Show me the PGN of the following opening.";
constexpr const char* kPgn2OpeningPrefix =
    "Show me the opening name of the following PGN.";

const char* color_name(Color c) {
  return c == Color::white ? "white" : "black";
}

std::string source_of(const GameRecord& g) {
  auto s = g.header("Source");
  return s && *s == "synthetic" ? "synthetic" : "real";
}

std::string uci_join(const GameRecord& g, int plies) {
  std::string out;
  for (int i = 0; i < plies; ++i) {
    if (i) out += ' ';
    out += format_uci(g.moves[static_cast<std::size_t>(i)].move);
  }
  return out;
}

void check_cut(const GameRecord& g, int cut_ply, bool allow_end) {
  const int len = static_cast<int>(g.moves.size());
  if (cut_ply < 0 || cut_ply > len - (allow_end ? 0 : 1))
    throw Error("cut_ply " + std::to_string(cut_ply) + " out of range for a " +
                std::to_string(len) + "-ply game");
}

// Seeded Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k)
    std::swap(v[k - 1], v[rng.below(k)]);
}

bool parse_int(std::string_view s, int& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

// Draws `count` texts via `text_of(index)`, all distinct from each other and
// from `exclude`, never using index `skip`.
std::vector<std::string> draw_distractors(std::size_t pool, std::size_t skip,
                                          const std::string& exclude, int count,
                                          Rng& rng,
                                          const std::function<const std::string&(std::size_t)>& text_of) {
  std::vector<std::string> picked;
  for (std::size_t attempts = 0; attempts < pool * 20 && picked.size() < static_cast<std::size_t>(count); ++attempts) {
    std::size_t j = rng.below(pool);
    if (j == skip) continue;
    const std::string& text = text_of(j);
    if (text == exclude || std::find(picked.begin(), picked.end(), text) != picked.end()) continue;
    picked.push_back(text);
  }
  if (picked.size() < static_cast<std::size_t>(count))
    throw Error("not enough distinct distractor texts in the pool");
  return picked;
}

// Shared body of the two checkmate-in-one entry points.
std::vector<TaskInstance> checkmate_instances(const Position& p,
                                              const std::string& movetext,
                                              bool hint, Metadata base) {
  const auto legal = legal_moves(p);
  std::vector<std::pair<std::string, double>> scores;
  std::vector<std::string> mating;
  for (Move m : legal) {
    std::string san = format_san(p, m);
    const bool mate = !san.empty() && san.back() == '#';
    if (mate) san.back() = '+';  // published choices write mate as check
    scores.emplace_back(san, mate ? 1.0 : 0.0);
    if (mate) mating.push_back(san);
  }
  if (mating.empty()) throw NoMateAvailable("no mating move in the cut position");

  std::string input = movetext;
  if (hint)
    input += std::string(" {Now ") + color_name(p.side_to_move()) +
             " has checkmate in one move.}";
  base.set("fen", format_fen(p));
  base.set("hint", hint);

  TaskInstance mc;
  mc.task_kind = TaskKind::checkmate_in_one;
  mc.input = input;
  mc.target_scores = std::move(scores);
  mc.metadata = base;
  mc.metadata.set("variant", std::string("mc"));

  TaskInstance esm;
  esm.task_kind = TaskKind::checkmate_in_one;
  esm.input = input;
  esm.targets = std::move(mating);
  esm.metadata = std::move(base);
  esm.metadata.set("variant", std::string("esm"));

  return {std::move(mc), std::move(esm)};
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::state_tracking: return "state_tracking";
    case TaskKind::uci_to_fen: return "uci_to_fen";
    case TaskKind::pgn_to_fen: return "pgn_to_fen";
    case TaskKind::state_value: return "state_value";
    case TaskKind::annotation_mc: return "annotation_mc";
    case TaskKind::opening2pgn: return "opening2pgn";
    case TaskKind::pgn2opening: return "pgn2opening";
    case TaskKind::checkmate_in_one: return "checkmate_in_one";
    case TaskKind::general_policy: return "general_policy";
    case TaskKind::modeling_synthetic: return "modeling_synthetic";
  }
  return "?";
}

std::optional<TaskKind> task_kind_from_string(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(TaskKind::modeling_synthetic); ++k)
    if (to_string(static_cast<TaskKind>(k)) == name)
      return static_cast<TaskKind>(k);
  return std::nullopt;
}

void Metadata::set(std::string key, MetaValue value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(std::move(key), std::move(value));
}

const MetaValue* Metadata::find(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

std::optional<std::string> Metadata::get_string(std::string_view key) const {
  const MetaValue* v = find(key);
  if (v && std::holds_alternative<std::string>(*v)) return std::get<std::string>(*v);
  return std::nullopt;
}

std::optional<std::int64_t> Metadata::get_int(std::string_view key) const {
  const MetaValue* v = find(key);
  if (v && std::holds_alternative<std::int64_t>(*v)) return std::get<std::int64_t>(*v);
  return std::nullopt;
}

std::optional<bool> Metadata::get_bool(std::string_view key) const {
  const MetaValue* v = find(key);
  if (v && std::holds_alternative<bool>(*v)) return std::get<bool>(*v);
  return std::nullopt;
}

std::optional<double> Metadata::get_double(std::string_view key) const {
  const MetaValue* v = find(key);
  if (v && std::holds_alternative<double>(*v)) return std::get<double>(*v);
  return std::nullopt;
}

std::string TaskInstance::id() const {
  return metadata.get_string("id").value_or("");
}

std::string task_to_jsonl(const TaskInstance& t) {
  ordered_json j;
  j["task_kind"] = std::string(to_string(t.task_kind));
  j["prompt_prefix"] = t.prompt_prefix;
  j["input"] = t.input;
  if (!t.targets.empty()) j["targets"] = t.targets;
  if (!t.target_scores.empty()) {
    ordered_json scores = ordered_json::object();
    for (const auto& [choice, score] : t.target_scores) scores[choice] = score;
    j["target_scores"] = std::move(scores);
  }
  ordered_json meta = ordered_json::object();
  for (const auto& [key, value] : t.metadata)
    std::visit([&meta, &key](const auto& x) { meta[key] = x; }, value);
  j["metadata"] = std::move(meta);
  return j.dump();
}

TaskInstance task_from_jsonl(std::string_view line) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error("task line is not a JSON object");

  TaskInstance t;
  auto kind_it = j.find("task_kind");
  if (kind_it == j.end() || !kind_it->is_string())
    throw Error("task_kind missing or not a string");
  const auto kind_name = kind_it->get<std::string>();
  auto kind = task_kind_from_string(kind_name);
  if (!kind) throw Error("unknown task_kind '" + kind_name + "'");
  t.task_kind = *kind;

  if (auto it = j.find("prompt_prefix"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("prompt_prefix must be a string");
    t.prompt_prefix = it->get<std::string>();
  }
  if (auto it = j.find("input"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("input must be a string");
    t.input = it->get<std::string>();
  }
  if (auto it = j.find("targets"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error("targets must be an array");
    for (const auto& v : *it) {
      if (!v.is_string()) throw Error("targets entries must be strings");
      t.targets.push_back(v.get<std::string>());
    }
  }
  if (auto it = j.find("target_scores"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error("target_scores must be an object");
    for (const auto& [choice, v] : it->items()) {
      if (!v.is_number()) throw Error("target_scores values must be numbers");
      const double s = v.get<double>();
      if (s < 0.0 || s > 1.0) throw Error("target_scores values must lie in [0,1]");
      t.target_scores.emplace_back(choice, s);
    }
  }
  if (t.targets.empty() == t.target_scores.empty())
    throw Error("exactly one of targets/target_scores must be non-empty");
  if (!t.target_scores.empty()) {
    double best = 0.0;
    for (const auto& [choice, s] : t.target_scores) best = std::max(best, s);
    if (std::abs(best - 1.0) > 1e-9)
      throw Error("target_scores must contain a 1.0 choice");
  }
  if (auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error("metadata must be an object");
    for (const auto& [key, v] : it->items()) {
      if (v.is_string()) t.metadata.set(key, v.get<std::string>());
      else if (v.is_boolean()) t.metadata.set(key, v.get<bool>());
      else if (v.is_number_integer() || v.is_number_unsigned())
        t.metadata.set(key, v.get<std::int64_t>());
      else if (v.is_number_float()) t.metadata.set(key, v.get<double>());
      else throw Error("metadata values must be scalars");
    }
  }
  return t;
}

std::vector<EloBand> default_elo_bands() {
  std::vector<EloBand> bands{{0, 1000}};
  for (int lo = 1000; lo < 2400; lo += 200) bands.push_back({lo, lo + 200});
  bands.push_back({2400, 3000});
  return bands;
}

std::vector<EloBand> eval_elo_bands() {
  return {{700, 1000}, {1200, 1500}, {1700, 2000}, {2700, 3000}};
}

std::vector<GameRecord> stratify_by_elo(std::span<const GameRecord> games,
                                        std::span<const EloBand> bands,
                                        int per_band, std::uint64_t seed,
                                        StratifyStats* stats) {
  if (per_band < 0) throw Error("per_band must be non-negative");
  std::vector<double> mean_elo(games.size(), -1.0);
  int missing = 0;
  for (std::size_t i = 0; i < games.size(); ++i) {
    auto w = games[i].header("WhiteElo");
    auto b = games[i].header("BlackElo");
    int we = 0, be = 0;
    if (w && b && parse_int(*w, we) && parse_int(*b, be))
      mean_elo[i] = (we + be) / 2.0;
    else
      ++missing;
  }
  if (stats) stats->missing_elo = missing;

  std::vector<GameRecord> out;
  for (std::size_t bi = 0; bi < bands.size(); ++bi) {
    if (bands[bi].lo >= bands[bi].hi) throw Error("elo band lo must be < hi");
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < games.size(); ++i)
      if (mean_elo[i] >= bands[bi].lo && mean_elo[i] < bands[bi].hi)
        pool.push_back(i);
    Rng rng(mix_seed(seed, bi));
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(per_band), pool.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(pool[k], pool[k + rng.below(pool.size() - k)]);
      out.push_back(games[pool[k]]);
    }
  }
  return out;
}

std::string_view to_string(ModelingTask task) {
  switch (task) {
    case ModelingTask::pgn_to_fen: return "pgn_to_fen";
    case ModelingTask::uci_to_fen: return "uci_to_fen";
    case ModelingTask::fen_uci_to_san: return "fen_uci_to_san";
    case ModelingTask::fen_san_to_uci: return "fen_san_to_uci";
    case ModelingTask::fen_to_ascii: return "fen_to_ascii";
    case ModelingTask::fen_uci_to_next_fen: return "fen_uci_to_next_fen";
    case ModelingTask::fen_san_to_next_fen: return "fen_san_to_next_fen";
    case ModelingTask::fen_to_legal_san: return "fen_to_legal_san";
    case ModelingTask::fen_to_legal_uci: return "fen_to_legal_uci";
    case ModelingTask::pgn_to_legal_san: return "pgn_to_legal_san";
    case ModelingTask::pgn_to_legal_uci: return "pgn_to_legal_uci";
  }
  return "?";
}

std::optional<ModelingTask> modeling_task_from_string(std::string_view name) {
  for (int k = 0; k < kModelingTaskCount; ++k)
    if (to_string(static_cast<ModelingTask>(k)) == name)
      return static_cast<ModelingTask>(k);
  return std::nullopt;
}

const ModelingTemplates& default_modeling_templates() {
  static const ModelingTemplates templates = [] {
    ModelingTemplates t;
    auto add = [&t](ModelingTask task, std::initializer_list<const char*> texts) {
      auto& pool = t.phrasings[static_cast<std::size_t>(task)];
      for (const char* s : texts) pool.emplace_back(s);
    };
    add(ModelingTask::pgn_to_fen,
        {"Convert the following PGN move list into its FEN representation.",
         "Given this PGN, produce the FEN of the resulting position.",
         "What is the FEN after playing the PGN moves below?"});
    add(ModelingTask::uci_to_fen,
        {"Convert the following UCI move list into its FEN representation.",
         "Given these UCI moves from the starting position, produce the resulting FEN.",
         "What is the FEN after playing the UCI moves below?"});
    add(ModelingTask::fen_uci_to_san,
        {"Given the position and the UCI move, write the move in standard algebraic notation.",
         "Translate the UCI move played in this position into SAN.",
         "Express the following UCI move as SAN for the given FEN."});
    add(ModelingTask::fen_san_to_uci,
        {"Given the position and the SAN move, write the move in UCI notation.",
         "Translate the SAN move played in this position into UCI.",
         "Express the following SAN move as UCI for the given FEN."});
    add(ModelingTask::fen_to_ascii,
        {"Draw the board for the following FEN as ASCII art.",
         "Render this FEN as an ASCII diagram.",
         "Show the position below as an ASCII board."});
    add(ModelingTask::fen_uci_to_next_fen,
        {"Given the position and the UCI move, produce the FEN after the move.",
         "Apply the UCI move to this position and output the resulting FEN.",
         "What is the FEN once the given UCI move is played?"});
    add(ModelingTask::fen_san_to_next_fen,
        {"Given the position and the SAN move, produce the FEN after the move.",
         "Apply the SAN move to this position and output the resulting FEN.",
         "What is the FEN once the given SAN move is played?"});
    add(ModelingTask::fen_to_legal_san,
        {"List every legal move in SAN for the following position.",
         "Enumerate all legal SAN moves available in this FEN.",
         "Which SAN moves are legal in the position below?"});
    add(ModelingTask::fen_to_legal_uci,
        {"List every legal move in UCI notation for the following position.",
         "Enumerate all legal UCI moves available in this FEN.",
         "Which UCI moves are legal in the position below?"});
    add(ModelingTask::pgn_to_legal_san,
        {"After the following PGN, list every legal move in SAN.",
         "Given this PGN, enumerate all legal SAN moves in the final position.",
         "Which SAN moves are legal after playing the PGN below?"});
    add(ModelingTask::pgn_to_legal_uci,
        {"After the following PGN, list every legal move in UCI notation.",
         "Given this PGN, enumerate all legal UCI moves in the final position.",
         "Which UCI moves are legal after playing the PGN below?"});
    return t;
  }();
  return templates;
}

ModelingTemplates load_modeling_templates(std::istream& in) {
  ModelingTemplates t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("template line " + std::to_string(line_no) +
                  ": expected task<TAB>text");
    const auto task = modeling_task_from_string(line.substr(0, tab));
    if (!task)
      throw Error("template line " + std::to_string(line_no) +
                  ": unknown modeling task '" + line.substr(0, tab) + "'");
    t.phrasings[static_cast<std::size_t>(*task)].push_back(line.substr(tab + 1));
  }
  for (int k = 0; k < kModelingTaskCount; ++k)
    if (t.phrasings[static_cast<std::size_t>(k)].size() < 3)
      throw Error(std::string("need at least 3 templates for task '") +
                  std::string(to_string(static_cast<ModelingTask>(k))) + "'");
  return t;
}

std::vector<TaskInstance> gen_modeling(std::span<const GameRecord> games,
                                       std::uint64_t seed,
                                       const ModelingTemplates& templates,
                                       std::size_t base_index) {
  for (const auto& pool : templates.phrasings)
    if (pool.empty()) throw Error("empty template pool");

  std::vector<TaskInstance> out;
  for (std::size_t i = 0; i < games.size(); ++i) {
    const std::size_t gi = base_index + i;
    const GameRecord& g = games[i];
    const int len = static_cast<int>(g.moves.size());
    if (len < 4) continue;
    const auto pos = g.positions();
    const std::string source = source_of(g);

    for (int ti = 0; ti < kModelingTaskCount; ++ti) {
      Rng rng(mix_seed(mix_seed(seed, gi), static_cast<std::uint64_t>(ti)));
      const int cut = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(len - 4 + 1)));
      const auto& pool = templates.phrasings[static_cast<std::size_t>(ti)];
      const std::size_t tmpl = rng.below(pool.size());
      const auto task = static_cast<ModelingTask>(ti);

      TaskInstance t;
      t.task_kind = TaskKind::modeling_synthetic;
      t.prompt_prefix = pool[tmpl];

      // Move-argument tasks describe the last prefix move; the rest describe
      // the position after the cut. A terminal cut position backs up one ply
      // so legal-move targets are never empty.
      const Move last = g.moves[static_cast<std::size_t>(cut - 1)].move;
      const Position& before = pos[static_cast<std::size_t>(cut - 1)];
      const Position& after = pos[static_cast<std::size_t>(cut)];
      int ecut = cut;
      if ((task == ModelingTask::fen_to_legal_san ||
           task == ModelingTask::fen_to_legal_uci ||
           task == ModelingTask::pgn_to_legal_san ||
           task == ModelingTask::pgn_to_legal_uci) &&
          !has_legal_move(after))
        ecut = cut - 1;
      const Position& at_cut = pos[static_cast<std::size_t>(ecut)];

      auto legal_list = [&at_cut](bool san) {
        std::string joined;
        for (Move m : legal_moves(at_cut)) {
          if (!joined.empty()) joined += ' ';
          joined += san ? format_san(at_cut, m) : format_uci(m);
        }
        return joined;
      };

      switch (task) {
        case ModelingTask::pgn_to_fen:
          t.input = format_movetext(g, cut);
          t.targets = {format_fen(after)};
          break;
        case ModelingTask::uci_to_fen:
          t.input = uci_join(g, cut);
          t.targets = {format_fen(after)};
          break;
        case ModelingTask::fen_uci_to_san:
          t.input = "FEN: " + format_fen(before) + "\nMove: " + format_uci(last);
          t.targets = {format_san(before, last)};
          break;
        case ModelingTask::fen_san_to_uci:
          t.input = "FEN: " + format_fen(before) + "\nMove: " + format_san(before, last);
          t.targets = {format_uci(last)};
          break;
        case ModelingTask::fen_to_ascii:
          t.input = format_fen(after);
          t.targets = {ascii_board(after)};
          break;
        case ModelingTask::fen_uci_to_next_fen:
          t.input = "FEN: " + format_fen(before) + "\nMove: " + format_uci(last);
          t.targets = {format_fen(after)};
          break;
        case ModelingTask::fen_san_to_next_fen:
          t.input = "FEN: " + format_fen(before) + "\nMove: " + format_san(before, last);
          t.targets = {format_fen(after)};
          break;
        case ModelingTask::fen_to_legal_san:
          t.input = format_fen(at_cut);
          t.targets = {legal_list(true)};
          break;
        case ModelingTask::fen_to_legal_uci:
          t.input = format_fen(at_cut);
          t.targets = {legal_list(false)};
          break;
        case ModelingTask::pgn_to_legal_san:
          t.input = format_movetext(g, ecut);
          t.targets = {legal_list(true)};
          break;
        case ModelingTask::pgn_to_legal_uci:
          t.input = format_movetext(g, ecut);
          t.targets = {legal_list(false)};
          break;
      }

      t.metadata.set("id", "modeling-" + std::string(to_string(task)) + "-g" +
                               std::to_string(gi));
      t.metadata.set("task", std::string(to_string(task)));
      t.metadata.set("template", static_cast<std::int64_t>(tmpl));
      t.metadata.set("cut", static_cast<std::int64_t>(ecut));
      t.metadata.set("source", source);
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::string_view length_split(int plies) {
  if (plies <= 20) return "short";
  if (plies <= 60) return "medium";
  return "long";
}

TaskInstance make_state_tracking(const GameRecord& g, int cut_ply,
                                 std::uint64_t seed) {
  check_cut(g, cut_ply, /*allow_end=*/false);
  const auto pos = g.positions();
  const Position& p = pos[static_cast<std::size_t>(cut_ply)];
  const Move m = g.moves[static_cast<std::size_t>(cut_ply)].move;

  TaskInstance t;
  t.task_kind = TaskKind::state_tracking;
  t.prompt_prefix = kStateTrackingPrefix;
  t.input = uci_join(g, cut_ply);
  if (!t.input.empty()) t.input += ' ';
  t.input += m.from.name();

  for (Move lm : legal_moves(p)) {
    if (!(lm.from == m.from)) continue;
    std::string dest = lm.to.name();
    if (t.targets.empty() || t.targets.back() != dest)
      t.targets.push_back(std::move(dest));  // promotions share a destination
  }

  t.metadata.set("split", std::string(length_split(cut_ply)));
  t.metadata.set("source", source_of(g));
  t.metadata.set("fen", format_fen(p));
  t.metadata.set("cut", static_cast<std::int64_t>(cut_ply));
  t.metadata.set("seed", static_cast<std::int64_t>(seed));
  return t;
}

TaskInstance make_fen_conversion(const GameRecord& g, int cut_ply,
                                 TaskKind kind) {
  if (kind != TaskKind::uci_to_fen && kind != TaskKind::pgn_to_fen)
    throw Error("make_fen_conversion expects uci_to_fen or pgn_to_fen");
  check_cut(g, cut_ply, /*allow_end=*/true);
  const auto pos = g.positions();

  TaskInstance t;
  t.task_kind = kind;
  if (kind == TaskKind::pgn_to_fen) {
    t.prompt_prefix = kPgnToFenPrefix;
    t.input = format_movetext(g, cut_ply);
  } else {
    t.prompt_prefix = kUciToFenPrefix;
    t.input = uci_join(g, cut_ply);
  }
  t.targets = {format_fen(pos[static_cast<std::size_t>(cut_ply)])};
  t.metadata.set("split", std::string(length_split(cut_ply)));
  t.metadata.set("source", source_of(g));
  t.metadata.set("cut", static_cast<std::int64_t>(cut_ply));
  return t;
}

TaskInstance make_state_value(const GameRecord& g, int cut_ply,
                              double white_winrate, bool brace_suffix) {
  check_cut(g, cut_ply, /*allow_end=*/true);
  if (white_winrate < 0.0 || white_winrate > 1.0)
    throw Error("white_winrate must lie in [0,1]");
  const auto pos = g.positions();
  const long pct = std::lround(100.0 * white_winrate);

  TaskInstance t;
  t.task_kind = TaskKind::state_value;
  t.prompt_prefix = kStateValuePrefix;
  t.input = format_movetext(g, cut_ply);
  t.target_scores = {
      {"Black has advantage.", pct <= 33 ? 1.0 : 0.0},
      {"The game is equal.", pct > 33 && pct <= 66 ? 1.0 : 0.0},
      {"White has advantage.", pct > 66 ? 1.0 : 0.0},
  };
  t.metadata.set("winrate", white_winrate);
  t.metadata.set("fen", format_fen(pos[static_cast<std::size_t>(cut_ply)]));
  t.metadata.set("cut", static_cast<std::int64_t>(cut_ply));
  t.metadata.set("source", source_of(g));
  if (brace_suffix) t.metadata.set("brace", true);
  return t;
}

TaskInstance make_annotation_mc(std::span<const AnnotationPair> pairs,
                                std::size_t i, std::uint64_t seed) {
  if (pairs.size() < 4) throw Error("need at least 4 annotation pairs");
  if (i >= pairs.size()) throw Error("annotation index out of range");
  Rng rng(mix_seed(seed, i));
  const std::string& truth = pairs[i].text;

  std::vector<std::string> choices = draw_distractors(
      pairs.size(), i, truth, 3, rng,
      [&pairs](std::size_t j) -> const std::string& { return pairs[j].text; });
  choices.push_back(truth);
  shuffle(choices, rng);

  TaskInstance t;
  t.task_kind = TaskKind::annotation_mc;
  t.prompt_prefix = kAnnotationPrefix;
  t.input = pairs[i].pgn_prefix;
  for (auto& c : choices) {
    const double score = c == truth ? 1.0 : 0.0;
    t.target_scores.emplace_back(std::move(c), score);
  }
  t.metadata.set("cut", static_cast<std::int64_t>(pairs[i].ply));
  t.metadata.set("seed", static_cast<std::int64_t>(seed));
  return t;
}

std::vector<OpeningRow> load_openings_tsv(std::istream& in) {
  std::vector<OpeningRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw Error("openings line " + std::to_string(line_no) +
                  ": expected eco<TAB>name<TAB>pgn");
    OpeningRow row{line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                   line.substr(tab2 + 1)};
    if (rows.empty() && line_no == 1 && row.eco == "eco") continue;  // header
    rows.push_back(std::move(row));
  }
  return rows;
}

TaskInstance make_opening_mc(std::span<const OpeningRow> openings,
                             std::size_t i, TaskKind direction,
                             std::uint64_t seed) {
  if (direction != TaskKind::opening2pgn && direction != TaskKind::pgn2opening)
    throw Error("make_opening_mc expects opening2pgn or pgn2opening");
  if (openings.size() < 5) throw Error("need at least 5 openings");
  if (i >= openings.size()) throw Error("opening index out of range");
  Rng rng(mix_seed(seed, i));
  const OpeningRow& row = openings[i];
  const bool to_pgn = direction == TaskKind::opening2pgn;
  const std::string& truth = to_pgn ? row.pgn : row.name;

  std::vector<std::string> choices = draw_distractors(
      openings.size(), i, truth, 4, rng,
      [&openings, to_pgn](std::size_t j) -> const std::string& {
        return to_pgn ? openings[j].pgn : openings[j].name;
      });
  choices.push_back(truth);
  shuffle(choices, rng);

  TaskInstance t;
  t.task_kind = direction;
  if (to_pgn) {
    t.prompt_prefix = kOpening2PgnPrefix;
    t.input = row.name;
    // The published input styles the bare opening name as "<name> Opening".
    if (row.name.find("Opening") == std::string::npos) t.input += " Opening";
  } else {
    t.prompt_prefix = kPgn2OpeningPrefix;
    t.input = row.pgn + ". The opening name of this PGN is.";
  }
  for (auto& c : choices) {
    const double score = c == truth ? 1.0 : 0.0;
    t.target_scores.emplace_back(std::move(c), score);
  }
  t.metadata.set("eco", row.eco);
  t.metadata.set("seed", static_cast<std::int64_t>(seed));
  return t;
}

std::vector<TaskInstance> make_checkmate_in_one(const GameRecord& g,
                                                int cut_ply, bool hint) {
  check_cut(g, cut_ply, /*allow_end=*/true);
  const auto pos = g.positions();
  Metadata base;
  base.set("cut", static_cast<std::int64_t>(cut_ply));
  base.set("source", source_of(g));
  return checkmate_instances(pos[static_cast<std::size_t>(cut_ply)],
                             format_movetext(g, cut_ply), hint,
                             std::move(base));
}

std::vector<TaskInstance> make_checkmate_from_puzzle(const Position& p,
                                                     std::string_view puzzle_id,
                                                     bool hint) {
  Metadata base;
  base.set("puzzle", std::string(puzzle_id));
  return checkmate_instances(p, format_fen(p), hint, std::move(base));
}

TaskInstance make_general_policy(
    const GameRecord& g, int cut_ply,
    std::span<const std::pair<Move, double>> move_winrates, EloBand elo_band,
    Color color, std::uint64_t seed) {
  check_cut(g, cut_ply, /*allow_end=*/true);
  if (elo_band.lo >= elo_band.hi) throw Error("elo band lo must be < hi");
  const auto pos = g.positions();
  const Position& p = pos[static_cast<std::size_t>(cut_ply)];
  if (p.side_to_move() != color)
    throw Error("color does not match the side to move at the cut");

  const auto legal = legal_moves(p);
  if (legal.empty()) throw Error("no legal moves at the cut position");
  std::vector<double> winrate(legal.size());
  for (std::size_t k = 0; k < legal.size(); ++k) {
    auto it = std::find_if(move_winrates.begin(), move_winrates.end(),
                           [&](const auto& mw) { return mw.first == legal[k]; });
    if (it == move_winrates.end())
      throw Error("move_winrates must cover every legal move");
    winrate[k] = it->second;
  }
  if (move_winrates.size() != legal.size())
    throw Error("move_winrates must contain exactly the legal moves");

  // Ascending winrate rank; stable sort keeps the deterministic move order
  // for ties.
  std::vector<std::size_t> order(legal.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&winrate](std::size_t a, std::size_t b) {
                     return winrate[a] < winrate[b];
                   });

  Rng rng(seed);
  const int white_elo =
      elo_band.lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(elo_band.hi - elo_band.lo)));
  const int black_elo =
      elo_band.lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(elo_band.hi - elo_band.lo)));

  TaskInstance t;
  t.task_kind = TaskKind::general_policy;
  t.prompt_prefix =
      std::string("In the following chess game, you play ") + color_name(color) + ".";
  t.input = std::string("[Date \"2017.04.01\"]\n[White \"???\"]\n[Black \"???\"]\n") +
            "[Result \"" + (color == Color::black ? "0-1" : "1-0") + "\"]\n" +
            "[WhiteElo \"" + std::to_string(white_elo) + "\"]\n" +
            "[BlackElo \"" + std::to_string(black_elo) + "\"]\n" +
            "[WhiteRatingDiff \"??\"]\n[BlackRatingDiff \"??\"]\n" +
            "[ECO \"??\"]\n[Opening \"??\"]\n[TimeControl \"300+0\"]\n" +
            "[Termination \"Time forfeit\"]";
  const std::string movetext = format_movetext(g, cut_ply);
  if (!movetext.empty()) t.input += "\n" + movetext;

  const std::size_t n = legal.size();
  for (std::size_t r = 0; r < n; ++r) {
    const Move m = legal[order[r]];
    const double score = n == 1 ? 1.0 : static_cast<double>(r) / static_cast<double>(n - 1);
    t.target_scores.emplace_back(format_san(p, m), score);
  }

  t.metadata.set("elo_band", std::to_string(elo_band.lo) + "-" + std::to_string(elo_band.hi));
  t.metadata.set("white_elo", static_cast<std::int64_t>(white_elo));
  t.metadata.set("black_elo", static_cast<std::int64_t>(black_elo));
  t.metadata.set("color", std::string(color_name(color)));
  t.metadata.set("fen", format_fen(p));
  t.metadata.set("cut", static_cast<std::int64_t>(cut_ply));
  t.metadata.set("source", source_of(g));
  t.metadata.set("seed", static_cast<std::int64_t>(seed));
  return t;
}

GameRecord gen_random_game(std::uint64_t seed, int max_plies) {
  if (max_plies < 2) throw Error("max_plies must be at least 2");
  Rng rng(seed);
  GameRecord g;
  g.headers = {{"Event", "Synthetic"}, {"Source", "synthetic"}};

  Position p;
  std::vector<Position> history;
  for (int ply = 0; ply < max_plies; ++ply) {
    if (outcome(p, history).over()) break;
    const auto legal = legal_moves(p);
    const Move m = legal[rng.below(legal.size())];
    TimedMove tm;
    tm.move = m;
    tm.san = format_san(p, m);
    g.moves.push_back(std::move(tm));
    history.push_back(p);
    p = apply(p, m);
  }

  const Outcome oc = outcome(p, history);
  if (oc.status == GameStatus::checkmate)
    g.result = *oc.winner == Color::white ? GameResult::white_win
                                          : GameResult::black_win;
  else if (oc.over())
    g.result = GameResult::draw;
  else
    g.result = GameResult::unknown;
  g.headers.emplace_back("Result", std::string(to_string(g.result)));
  return g;
}

}  // namespace chessbench
