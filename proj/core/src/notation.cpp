#include "chessbench/notation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <istream>
#include <sstream>

namespace chessbench {

namespace {

constexpr std::string_view kPieceLetters = "PNBRQK";

char piece_letter(PieceKind k) { return kPieceLetters[static_cast<int>(k)]; }

std::optional<PieceKind> kind_from_letter(char c) {
  auto pos = kPieceLetters.find(c);
  if (pos == std::string_view::npos) return std::nullopt;
  return static_cast<PieceKind>(pos);
}

char fen_char(Piece pc) {
  char c = piece_letter(pc.kind);
  return pc.color == Color::white ? c : static_cast<char>(std::tolower(c));
}

std::optional<Piece> piece_from_fen_char(char c) {
  Color color = std::isupper(static_cast<unsigned char>(c)) ? Color::white : Color::black;
  auto kind = kind_from_letter(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (!kind) return std::nullopt;
  return Piece{color, *kind};
}

bool is_space(int c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

int parse_int_field(std::string_view text, const char* field, std::size_t offset,
                    int min, int max) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FenError(std::string(field) + " is not a number: '" + std::string(text) + "'",
                   field, offset);
  if (value < min || value > max)
    throw FenError(std::string(field) + " out of range: " + std::string(text), field,
                   offset);
  return value;
}

// --- SAN core (shared by parse_san, format_san and the PGN reader so the
// legal-move list is only generated once per position) ----------------------

Move parse_san_with(const Position& p, std::string_view san,
                    std::span<const Move> legal) {
  std::string s(san);
  while (!s.empty() && (s.back() == '!' || s.back() == '?')) s.pop_back();
  while (!s.empty() && (s.back() == '+' || s.back() == '#')) s.pop_back();
  if (s.empty()) throw SanError("empty SAN token");

  std::string castle = s;
  std::replace(castle.begin(), castle.end(), '0', 'O');
  if (castle == "O-O" || castle == "O-O-O") {
    bool kingside = castle == "O-O";
    int rank = p.side_to_move() == Color::white ? 0 : 7;
    Move want{Square::of(4, rank), Square::of(kingside ? 6 : 2, rank), std::nullopt};
    auto home = p.piece_at(want.from);
    if (home && home->kind == PieceKind::king &&
        std::find(legal.begin(), legal.end(), want) != legal.end())
      return want;
    throw SanError("castling '" + std::string(san) + "' is not legal here");
  }

  std::optional<PieceKind> promotion;
  if (s.size() >= 3 && s[s.size() - 2] == '=') {
    auto kind = kind_from_letter(
        static_cast<char>(std::toupper(static_cast<unsigned char>(s.back()))));
    if (!kind || *kind == PieceKind::pawn || *kind == PieceKind::king)
      throw SanError("bad promotion piece in '" + std::string(san) + "'");
    promotion = kind;
    s.resize(s.size() - 2);
  } else if (s.size() >= 3 && std::isdigit(static_cast<unsigned char>(s[s.size() - 2])) &&
             std::string_view("NBRQ").find(s.back()) != std::string_view::npos) {
    promotion = kind_from_letter(s.back());
    s.pop_back();
  }

  if (s.size() < 2) throw SanError("missing destination in '" + std::string(san) + "'");
  auto dest = Square::parse(std::string_view(s).substr(s.size() - 2));
  if (!dest) throw SanError("bad destination square in '" + std::string(san) + "'");
  s.resize(s.size() - 2);

  PieceKind kind = PieceKind::pawn;
  std::size_t i = 0;
  if (i < s.size() && std::isupper(static_cast<unsigned char>(s[i]))) {
    auto k = kind_from_letter(s[i]);
    if (!k) throw SanError("unknown piece letter in '" + std::string(san) + "'");
    kind = *k;
    ++i;
  }
  int from_file = -1;
  int from_rank = -1;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c == 'x') continue;  // capture marker carries no placement information
    if (c >= 'a' && c <= 'h')
      from_file = c - 'a';
    else if (c >= '1' && c <= '8')
      from_rank = c - '1';
    else
      throw SanError("unexpected character '" + std::string(1, c) + "' in '" +
                     std::string(san) + "'");
  }

  Move found{};
  int matches = 0;
  for (const Move& m : legal) {
    if (m.to != *dest || m.promotion != promotion) continue;
    if (p.piece_at(m.from)->kind != kind) continue;
    if (from_file >= 0 && m.from.file() != from_file) continue;
    if (from_rank >= 0 && m.from.rank() != from_rank) continue;
    found = m;
    ++matches;
  }
  if (matches == 0)
    throw SanError("'" + std::string(san) + "' matches no legal move");
  if (matches > 1) throw SanError("'" + std::string(san) + "' is ambiguous");
  return found;
}

std::string format_san_with(const Position& p, Move m, std::span<const Move> legal) {
  if (std::find(legal.begin(), legal.end(), m) == legal.end())
    throw IllegalMove("cannot write SAN for an illegal move");
  Piece pc = *p.piece_at(m.from);

  std::string s;
  if (pc.kind == PieceKind::king && std::abs(m.to.file() - m.from.file()) == 2) {
    s = m.to.file() == 6 ? "O-O" : "O-O-O";
  } else if (pc.kind == PieceKind::pawn) {
    if (m.to.file() != m.from.file()) {  // any diagonal pawn move is a capture
      s += static_cast<char>('a' + m.from.file());
      s += 'x';
    }
    s += m.to.name();
    if (m.promotion) {
      s += '=';
      s += piece_letter(*m.promotion);
    }
  } else {
    s += piece_letter(pc.kind);
    bool clash = false;
    bool file_clash = false;
    bool rank_clash = false;
    for (const Move& other : legal) {
      if (other.from == m.from || other.to != m.to) continue;
      if (p.piece_at(other.from)->kind != pc.kind) continue;
      clash = true;
      if (other.from.file() == m.from.file()) file_clash = true;
      if (other.from.rank() == m.from.rank()) rank_clash = true;
    }
    if (clash) {
      if (!file_clash)
        s += static_cast<char>('a' + m.from.file());
      else if (!rank_clash)
        s += static_cast<char>('1' + m.from.rank());
      else
        s += m.from.name();
    }
    if (p.piece_at(m.to)) s += 'x';
    s += m.to.name();
  }

  Position next = detail::apply_unchecked(p, m);
  if (detail::in_check(next, next.side_to_move()))
    s += has_legal_move(next) ? '+' : '#';
  return s;
}

GameResult result_from_text(std::string_view text) {
  if (text == "1-0") return GameResult::white_win;
  if (text == "0-1") return GameResult::black_win;
  if (text == "1/2-1/2") return GameResult::draw;
  return GameResult::unknown;
}

}  // namespace

// --- FEN ---------------------------------------------------------------

Position parse_fen(std::string_view fen) {
  struct Field {
    std::string_view text;
    std::size_t offset;
  };
  std::vector<Field> fields;
  for (std::size_t i = 0; i < fen.size();) {
    if (is_space(fen[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < fen.size() && !is_space(fen[i])) ++i;
    fields.push_back({fen.substr(start, i - start), start});
  }
  if (fields.size() != 6)
    throw FenError("expected 6 FEN fields, got " + std::to_string(fields.size()),
                   "fields", 0);

  std::array<std::optional<Piece>, 64> placement{};
  {
    auto [text, off] = fields[0];
    int rank = 7;
    int file = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      char c = text[i];
      if (c == '/') {
        if (file != 8)
          throw FenError("rank does not span 8 squares", "placement", off + i);
        if (rank == 0) throw FenError("more than 8 ranks", "placement", off + i);
        --rank;
        file = 0;
      } else if (c >= '1' && c <= '8') {
        file += c - '0';
        if (file > 8) throw FenError("rank overflows 8 squares", "placement", off + i);
      } else if (auto pc = piece_from_fen_char(c)) {
        if (file > 7) throw FenError("rank overflows 8 squares", "placement", off + i);
        placement[rank * 8 + file] = *pc;
        ++file;
      } else {
        throw FenError("invalid placement character '" + std::string(1, c) + "'",
                       "placement", off + i);
      }
    }
    if (rank != 0 || file != 8)
      throw FenError("expected 8 ranks of 8 squares", "placement", off + text.size());
  }

  Color side;
  if (fields[1].text == "w")
    side = Color::white;
  else if (fields[1].text == "b")
    side = Color::black;
  else
    throw FenError("side to move must be 'w' or 'b'", "side", fields[1].offset);

  CastlingRights castling;
  if (fields[2].text != "-") {
    for (std::size_t i = 0; i < fields[2].text.size(); ++i) {
      bool* flag = nullptr;
      switch (fields[2].text[i]) {
        case 'K': flag = &castling.white_kingside; break;
        case 'Q': flag = &castling.white_queenside; break;
        case 'k': flag = &castling.black_kingside; break;
        case 'q': flag = &castling.black_queenside; break;
        default:
          throw FenError("invalid castling character", "castling",
                         fields[2].offset + i);
      }
      if (*flag)
        throw FenError("duplicate castling character", "castling",
                       fields[2].offset + i);
      *flag = true;
    }
  }

  std::optional<Square> en_passant;
  if (fields[3].text != "-") {
    en_passant = Square::parse(fields[3].text);
    if (!en_passant)
      throw FenError("invalid en-passant square", "en_passant", fields[3].offset);
  }

  int halfmove = parse_int_field(fields[4].text, "halfmove", fields[4].offset, 0, 150);
  int fullmove =
      parse_int_field(fields[5].text, "fullmove", fields[5].offset, 1, 9999);

  try {
    return Position::from_parts(placement, side, castling, en_passant, halfmove,
                                fullmove);
  } catch (const PositionError& e) {
    throw FenError(e.what(), "position", 0);
  }
}

std::string format_fen(const Position& p) {
  std::string out;
  for (int rank = 7; rank >= 0; --rank) {
    int empty = 0;
    for (int file = 0; file < 8; ++file) {
      auto pc = p.piece_at(Square::of(file, rank));
      if (!pc) {
        ++empty;
        continue;
      }
      if (empty > 0) {
        out += static_cast<char>('0' + empty);
        empty = 0;
      }
      out += fen_char(*pc);
    }
    if (empty > 0) out += static_cast<char>('0' + empty);
    if (rank > 0) out += '/';
  }

  out += p.side_to_move() == Color::white ? " w " : " b ";

  CastlingRights c = p.castling();
  if (c.any()) {
    if (c.white_kingside) out += 'K';
    if (c.white_queenside) out += 'Q';
    if (c.black_kingside) out += 'k';
    if (c.black_queenside) out += 'q';
  } else {
    out += '-';
  }

  out += ' ';
  out += p.en_passant() ? p.en_passant()->name() : "-";
  out += ' ';
  out += std::to_string(p.halfmove_clock());
  out += ' ';
  out += std::to_string(p.fullmove_number());
  return out;
}

// --- single moves --------------------------------------------------------

Move parse_san(const Position& p, std::string_view san) {
  return parse_san_with(p, san, legal_moves(p));
}

std::string format_san(const Position& p, Move m) {
  return format_san_with(p, m, legal_moves(p));
}

Move parse_uci_move(std::string_view text) {
  if (text.size() != 4 && text.size() != 5)
    throw UciError("UCI move must be 4 or 5 characters: '" + std::string(text) + "'",
                   0);
  auto from = Square::parse(text.substr(0, 2));
  auto to = Square::parse(text.substr(2, 2));
  if (!from || !to)
    throw UciError("bad square in UCI move '" + std::string(text) + "'", 0);
  std::optional<PieceKind> promotion;
  if (text.size() == 5) {
    switch (std::tolower(static_cast<unsigned char>(text[4]))) {
      case 'n': promotion = PieceKind::knight; break;
      case 'b': promotion = PieceKind::bishop; break;
      case 'r': promotion = PieceKind::rook; break;
      case 'q': promotion = PieceKind::queen; break;
      default:
        throw UciError("bad promotion in UCI move '" + std::string(text) + "'", 0);
    }
  }
  return Move{*from, *to, promotion};
}

std::string format_uci(Move m) {
  std::string s = m.from.name() + m.to.name();
  if (m.promotion)
    s += static_cast<char>(std::tolower(
        static_cast<unsigned char>(piece_letter(*m.promotion))));
  return s;
}

std::vector<Position> parse_uci_line(std::string_view moves) {
  std::vector<Position> trace;
  trace.push_back(Position::initial());
  std::size_t index = 0;
  for (std::size_t i = 0; i < moves.size();) {
    if (is_space(moves[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < moves.size() && !is_space(moves[i])) ++i;
    std::string_view token = moves.substr(start, i - start);
    Move m{};
    try {
      m = parse_uci_move(token);
    } catch (const UciError& e) {
      throw UciError(e.what(), index);
    }
    try {
      trace.push_back(apply(trace.back(), m));
    } catch (const IllegalMove&) {
      throw UciError("illegal move '" + std::string(token) + "'", index);
    }
    ++index;
  }
  return trace;
}

// --- PGN -----------------------------------------------------------------

std::string_view to_string(GameResult r) {
  switch (r) {
    case GameResult::white_win: return "1-0";
    case GameResult::black_win: return "0-1";
    case GameResult::draw: return "1/2-1/2";
    case GameResult::unknown: return "*";
  }
  return "*";
}

std::optional<std::string> GameRecord::header(std::string_view name) const {
  for (const auto& [n, v] : headers)
    if (n == name) return v;
  return std::nullopt;
}

Position GameRecord::initial_position() const {
  if (auto fen = header("FEN")) return parse_fen(*fen);
  return Position::initial();
}

std::vector<Position> GameRecord::positions() const {
  std::vector<Position> trace;
  trace.reserve(moves.size() + 1);
  trace.push_back(initial_position());
  for (const TimedMove& tm : moves) trace.push_back(apply(trace.back(), tm.move));
  return trace;
}

struct PgnReader::Token {
  enum class Kind {
    end,
    header,
    san,
    number,
    comment,
    nag,
    open_paren,
    close_paren,
    result,
  };
  Kind kind = Kind::end;
  std::string text;   // SAN body / comment content / result / header name
  std::string value;  // header value
  int nag = 0;
  int line = 1;
  int column = 1;
};

PgnReader::PgnReader(std::istream& in, PgnOptions options)
    : in_(in), options_(options) {}

int PgnReader::get() {
  int c;
  if (peeked_) {
    peeked_ = false;
    c = peek_char_;
  } else {
    c = in_.get();
  }
  if (c == '\n') {
    ++line_;
    column_ = 0;
  } else if (c != std::char_traits<char>::eof()) {
    ++column_;
  }
  return c;
}

int PgnReader::peek() {
  if (!peeked_) {
    peek_char_ = in_.get();
    peeked_ = true;
  }
  return peek_char_;
}

PgnReader::Token PgnReader::next_token() {
  constexpr int kEof = std::char_traits<char>::eof();
  for (;;) {
    int c = get();
    // UTF-8 BOM bytes are treated as whitespace between tokens.
    while (is_space(c) || c == 0xEF || c == 0xBB || c == 0xBF) c = get();
    if (c == kEof) return Token{Token::Kind::end, "", "", 0, line_, column_};

    Token t;
    t.line = line_;
    t.column = column_;

    if (c == '[') {
      while (is_space(peek())) get();
      std::string name;
      while (std::isalnum(peek()) || peek() == '_') name += static_cast<char>(get());
      if (name.empty()) throw PgnError("missing header tag name", t.line, t.column);
      while (is_space(peek())) get();
      if (get() != '"') throw PgnError("missing header value quote", t.line, t.column);
      std::string value;
      for (;;) {
        int v = get();
        if (v == kEof || v == '\n')
          throw PgnError("unterminated header value", t.line, t.column);
        if (v == '\\') {
          int esc = get();
          if (esc == '"' || esc == '\\')
            value += static_cast<char>(esc);
          else {
            value += '\\';
            if (esc != kEof) value += static_cast<char>(esc);
          }
          continue;
        }
        if (v == '"') break;
        value += static_cast<char>(v);
      }
      while (is_space(peek())) get();
      if (get() != ']') throw PgnError("missing ']' in header", t.line, t.column);
      t.kind = Token::Kind::header;
      t.text = std::move(name);
      t.value = std::move(value);
      return t;
    }

    if (c == '{') {
      std::string content;
      for (;;) {
        int v = get();
        if (v == kEof) throw PgnError("unterminated comment", t.line, t.column);
        if (v == '}') break;
        content += static_cast<char>(v == '\n' || v == '\r' || v == '\t' ? ' ' : v);
      }
      while (!content.empty() && content.front() == ' ') content.erase(content.begin());
      while (!content.empty() && content.back() == ' ') content.pop_back();
      t.kind = Token::Kind::comment;
      t.text = std::move(content);
      return t;
    }

    if (c == ';') {
      std::string content;
      while (peek() != '\n' && peek() != kEof) content += static_cast<char>(get());
      while (!content.empty() && (content.front() == ' ' || content.front() == '\r'))
        content.erase(content.begin());
      while (!content.empty() && (content.back() == ' ' || content.back() == '\r'))
        content.pop_back();
      t.kind = Token::Kind::comment;
      t.text = std::move(content);
      return t;
    }

    if (c == '(') {
      t.kind = Token::Kind::open_paren;
      return t;
    }
    if (c == ')') {
      t.kind = Token::Kind::close_paren;
      return t;
    }

    if (c == '$') {
      std::string digits;
      while (std::isdigit(peek())) digits += static_cast<char>(get());
      if (digits.empty()) throw PgnError("missing NAG number", t.line, t.column);
      t.kind = Token::Kind::nag;
      t.nag = std::stoi(digits);
      return t;
    }

    if (c == '%' && t.column == 1) {  // PGN escape line
      while (peek() != '\n' && peek() != kEof) get();
      continue;
    }

    std::string word(1, static_cast<char>(c));
    for (;;) {
      int v = peek();
      if (v == kEof || is_space(v) || v == '{' || v == '}' || v == '(' || v == ')' ||
          v == '$' || v == ';' || v == '[')
        break;
      word += static_cast<char>(get());
    }

    if (word == "1-0" || word == "0-1" || word == "1/2-1/2" || word == "*") {
      t.kind = Token::Kind::result;
      t.text = std::move(word);
      return t;
    }

    // Split a leading move number off tokens like "12." / "12...Nf6".
    std::size_t p = 0;
    while (p < word.size() && std::isdigit(static_cast<unsigned char>(word[p]))) ++p;
    if (p > 0) {
      std::size_t q = p;
      while (q < word.size() && word[q] == '.') ++q;
      if (q == word.size()) {
        t.kind = Token::Kind::number;
        return t;
      }
      if (q > p && std::isalpha(static_cast<unsigned char>(word[q])))
        word.erase(0, q);
    }
    if (word.size() > 1 && word.front() == '.' &&
        word.find_first_not_of('.') != std::string::npos)
      word.erase(0, word.find_first_not_of('.'));
    if (std::all_of(word.begin(), word.end(), [](char d) { return d == '.'; })) {
      t.kind = Token::Kind::number;  // bare continuation dots
      return t;
    }

    t.kind = Token::Kind::san;
    t.text = std::move(word);
    return t;
  }
}

void PgnReader::skip_variation() {
  constexpr int kEof = std::char_traits<char>::eof();
  int depth = 1;
  for (;;) {
    int c = get();
    if (c == kEof) throw PgnError("unterminated variation", line_, column_);
    if (c == '{') {
      for (;;) {
        int v = get();
        if (v == kEof) throw PgnError("unterminated comment", line_, column_);
        if (v == '}') break;
      }
    } else if (c == ';') {
      while (peek() != '\n' && peek() != kEof) get();
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth == 0) return;
    }
  }
}

std::optional<GameRecord> PgnReader::parse_game() {
  GameRecord g;
  bool saw_anything = false;
  bool in_headers = true;
  if (carried_header_) {
    g.headers.emplace_back(std::move(carried_name_), std::move(carried_value_));
    carried_header_ = false;
    saw_anything = true;
  }

  std::optional<Position> pos;
  std::vector<Move> legal;
  bool result_from_token = false;

  auto finish = [&]() {
    if (!pos && g.header("FEN")) {
      try {
        (void)g.initial_position();
      } catch (const FenError& e) {
        throw PgnError(std::string("invalid FEN header: ") + e.what(), line_, column_);
      }
    }
    if (!result_from_token) {
      if (auto header_result = g.header("Result"))
        g.result = result_from_text(*header_result);
    }
  };

  for (;;) {
    Token t = next_token();
    switch (t.kind) {
      case Token::Kind::end:
        if (!saw_anything) return std::nullopt;
        finish();
        return g;

      case Token::Kind::header:
        if (in_headers) {
          g.headers.emplace_back(std::move(t.text), std::move(t.value));
          saw_anything = true;
        } else {
          carried_header_ = true;
          carried_name_ = std::move(t.text);
          carried_value_ = std::move(t.value);
          finish();
          return g;
        }
        break;

      case Token::Kind::comment:
        in_headers = false;
        saw_anything = true;
        (g.moves.empty() ? g.start_comments : g.moves.back().comments)
            .push_back(std::move(t.text));
        break;

      case Token::Kind::nag:
        in_headers = false;
        if (!g.moves.empty()) g.moves.back().nags.push_back(t.nag);
        break;

      case Token::Kind::number:
        in_headers = false;
        saw_anything = true;
        break;

      case Token::Kind::open_paren:
        in_headers = false;
        if (g.moves.empty())
          throw PgnError("variation before any move", t.line, t.column);
        skip_variation();
        ++g.variation_count;
        break;

      case Token::Kind::close_paren:
        throw PgnError("unmatched ')'", t.line, t.column);

      case Token::Kind::result:
        g.result = result_from_text(t.text);
        result_from_token = true;
        finish();
        return g;

      case Token::Kind::san: {
        in_headers = false;
        saw_anything = true;
        if (!pos) {
          try {
            pos = g.initial_position();
          } catch (const FenError& e) {
            throw PgnError(std::string("invalid FEN header: ") + e.what(), t.line,
                           t.column);
          }
          legal = legal_moves(*pos);
        }
        std::string body = std::move(t.text);
        std::string suffix;
        while (!body.empty() && (body.back() == '!' || body.back() == '?')) {
          suffix.insert(suffix.begin(), body.back());
          body.pop_back();
        }
        TimedMove tm;
        try {
          tm.move = parse_san_with(*pos, body, legal);
        } catch (const SanError& e) {
          throw PgnError(e.what(), t.line, t.column);
        }
        tm.san = format_san_with(*pos, tm.move, legal);
        tm.suffix = std::move(suffix);
        g.moves.push_back(std::move(tm));
        *pos = detail::apply_unchecked(*pos, g.moves.back().move);
        legal = legal_moves(*pos);
        break;
      }
    }
  }
}

std::optional<GameRecord> PgnReader::next() {
  for (;;) {
    try {
      return parse_game();
    } catch (const PgnError& e) {
      if (!options_.lenient) throw;
      warnings_.push_back("line " + std::to_string(e.line()) + ":" +
                          std::to_string(e.column()) + ": " + e.what());
      carried_header_ = false;
      // Resynchronize at the next header line.
      bool at_line_start = column_ == 0;
      constexpr int kEof = std::char_traits<char>::eof();
      for (;;) {
        int c = peek();
        if (c == kEof) break;
        if (at_line_start && c == '[') break;
        c = get();
        at_line_start = c == '\n';
      }
    }
  }
}

PgnParseOutcome parse_pgn(std::string_view text, const PgnOptions& options) {
  std::istringstream in{std::string(text)};
  PgnReader reader(in, options);
  PgnParseOutcome out;
  while (auto game = reader.next()) out.games.push_back(std::move(*game));
  out.warnings.assign(reader.warnings().begin(), reader.warnings().end());
  return out;
}

std::string format_pgn(const GameRecord& g) {
  std::string out;
  for (const auto& [name, value] : g.headers) {
    out += '[';
    out += name;
    out += " \"";
    for (char c : value) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += "\"]\n";
  }
  if (!g.headers.empty()) out += '\n';

  std::vector<std::string> tokens;
  for (const std::string& c : g.start_comments) tokens.push_back("{ " + c + " }");
  Position pos = g.initial_position();
  bool interrupted = true;  // the first black move needs an explicit number
  for (const TimedMove& tm : g.moves) {
    if (pos.side_to_move() == Color::white)
      tokens.push_back(std::to_string(pos.fullmove_number()) + ".");
    else if (interrupted)
      tokens.push_back(std::to_string(pos.fullmove_number()) + "...");
    tokens.push_back(tm.san + tm.suffix);
    for (int nag : tm.nags) tokens.push_back("$" + std::to_string(nag));
    for (const std::string& c : tm.comments) tokens.push_back("{ " + c + " }");
    interrupted = !tm.nags.empty() || !tm.comments.empty();
    pos = apply(pos, tm.move);
  }
  tokens.emplace_back(to_string(g.result));

  // Wrap at word granularity so long comments still fit the column limit;
  // the reader collapses intra-comment whitespace, so this round-trips.
  std::string line;
  auto emit_word = [&](std::string_view word) {
    if (line.empty()) {
      line = word;
    } else if (line.size() + 1 + word.size() <= 79) {
      line += ' ';
      line += word;
    } else {
      out += line;
      out += '\n';
      line = word;
    }
  };
  for (const std::string& token : tokens) {
    for (std::size_t i = 0; i < token.size();) {
      if (token[i] == ' ') {
        ++i;
        continue;
      }
      std::size_t start = i;
      while (i < token.size() && token[i] != ' ') ++i;
      emit_word(std::string_view(token).substr(start, i - start));
    }
  }
  if (!line.empty()) {
    out += line;
    out += '\n';
  }
  return out;
}

std::string format_movetext(const GameRecord& g, int plies) {
  std::size_t n = plies < 0 ? g.moves.size()
                            : std::min<std::size_t>(static_cast<std::size_t>(plies),
                                                    g.moves.size());
  Position initial = g.initial_position();
  int fullmove = initial.fullmove_number();
  Color stm = initial.side_to_move();
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    if (stm == Color::white)
      out += std::to_string(fullmove) + ". ";
    else if (i == 0)
      out += std::to_string(fullmove) + "... ";
    out += g.moves[i].san;
    if (stm == Color::black) ++fullmove;
    stm = opponent(stm);
  }
  return out;
}

// --- comment cleaning -----------------------------------------------------

namespace {

// Decodes one UTF-8 code point; invalid bytes decode as themselves with
// length 1 so they are passed through untouched.
std::pair<char32_t, std::size_t> next_codepoint(std::string_view s, std::size_t i) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0 && cont(1))
    return {static_cast<char32_t>((b0 & 0x1F) << 6 |
                                  (static_cast<unsigned char>(s[i + 1]) & 0x3F)),
            2};
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2))
    return {static_cast<char32_t>((b0 & 0x0F) << 12 |
                                  (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
                                  (static_cast<unsigned char>(s[i + 2]) & 0x3F)),
            3};
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3))
    return {static_cast<char32_t>((b0 & 0x07) << 18 |
                                  (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12 |
                                  (static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6 |
                                  (static_cast<unsigned char>(s[i + 3]) & 0x3F)),
            4};
  return {b0, 1};
}

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // emoji & symbol blocks
         (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // stars and similar symbols
         (cp >= 0xFE00 && cp <= 0xFE0F) ||    // variation selectors
         cp == 0x200D;                        // zero-width joiner
}

}  // namespace

std::string clean_comment(std::string_view comment) {
  // Drop bracketed annotation directives, keeping evaluations.
  std::string no_directives;
  for (std::size_t i = 0; i < comment.size();) {
    if (comment[i] == '[' && i + 1 < comment.size() && comment[i + 1] == '%') {
      std::size_t tag_start = i + 2;
      std::size_t tag_end = tag_start;
      while (tag_end < comment.size() &&
             std::isalnum(static_cast<unsigned char>(comment[tag_end])))
        ++tag_end;
      std::size_t close = comment.find(']', i);
      std::size_t end = close == std::string_view::npos ? comment.size() : close + 1;
      std::string_view tag = comment.substr(tag_start, tag_end - tag_start);
      if (tag == "eval")
        no_directives += comment.substr(i, end - i);
      i = end;
    } else {
      no_directives += comment[i];
      ++i;
    }
  }

  std::string no_emoji;
  for (std::size_t i = 0; i < no_directives.size();) {
    auto [cp, len] = next_codepoint(no_directives, i);
    if (!is_emoji(cp)) no_emoji += no_directives.substr(i, len);
    i += len;
  }

  std::string out;
  bool pending_space = false;
  for (char c : no_emoji) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

GameRecord clean_comments(const GameRecord& g) {
  auto clean_list = [](const std::vector<std::string>& comments) {
    std::vector<std::string> out;
    for (const std::string& c : comments) {
      std::string cleaned = clean_comment(c);
      if (!cleaned.empty()) out.push_back(std::move(cleaned));
    }
    return out;
  };
  GameRecord out = g;
  out.start_comments = clean_list(g.start_comments);
  for (TimedMove& tm : out.moves) tm.comments = clean_list(tm.comments);
  return out;
}

// --- boards ----------------------------------------------------------------

std::string ascii_board(const Position& p) {
  std::string out;
  for (int rank = 7; rank >= 0; --rank) {
    for (int file = 0; file < 8; ++file) {
      if (file > 0) out += ' ';
      auto pc = p.piece_at(Square::of(file, rank));
      out += pc ? fen_char(*pc) : '.';
    }
    out += '\n';
  }
  return out;
}

}  // namespace chessbench
