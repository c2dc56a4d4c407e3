#include "chessbench/engine.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <thread>

#include "chessbench/errors.hpp"
#include "chessbench/notation.hpp"

namespace chessbench {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<int> to_int(std::string_view s) {
  int value = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || p != end) return std::nullopt;
  return value;
}

}  // namespace

void EngineConfig::validate() const {
  if (executable.empty()) throw Error("engine executable must not be empty");
  if (depth.has_value() == move_time_ms.has_value())
    throw Error("exactly one of depth/move_time_ms must be set");
  if (depth && *depth < 1) throw Error("engine depth must be >= 1");
  if (move_time_ms && *move_time_ms < 1)
    throw Error("engine move_time_ms must be >= 1");
  if (hash_mb < 1) throw Error("engine hash_mb must be >= 1");
  if (threads < 1) throw Error("engine threads must be >= 1");
  if (timeout_ms < 1) throw Error("engine timeout_ms must be >= 1");
}

double winrate_from_cp(double cp) {
  return 1.0 / (1.0 + std::exp(-0.00368208 * cp));
}

double winrate(const EngineEval& eval) {
  if (eval.kind == EngineEval::Kind::mate_in) return eval.value > 0 ? 1.0 : 0.0;
  return winrate_from_cp(eval.value);
}

EngineEval MaterialEvaluator::evaluate(const Position& p) {
  const Color stm = p.side_to_move();
  if (!has_legal_move(p)) {
    if (detail::in_check(p, stm))
      return {EngineEval::Kind::mate_in, stm == Color::white ? -1 : 1, 1};
    return {EngineEval::Kind::centipawns, 0, 1};
  }
  for (Move m : legal_moves(p)) {
    const Position q = detail::apply_unchecked(p, m);
    if (!has_legal_move(q) && detail::in_check(q, q.side_to_move()))
      return {EngineEval::Kind::mate_in, stm == Color::white ? 1 : -1, 1};
  }
  static constexpr int kPoints[] = {1, 3, 3, 5, 9, 0};
  int diff = 0;
  for (int sq = 0; sq < 64; ++sq)
    if (auto piece = p.piece_at(Square(sq)))
      diff += (piece->color == Color::white ? 1 : -1) *
              kPoints[static_cast<int>(piece->kind)];
  return {EngineEval::Kind::centipawns, 100 * diff, 1};
}

namespace uci {

std::optional<InfoScore> parse_info_line(std::string_view line) {
  const auto toks = split_ws(line);
  if (toks.empty() || toks[0] != "info") return std::nullopt;
  InfoScore out;
  bool have_score = false;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    if (toks[i] == "string") break;  // display text, not fields
    if (toks[i] == "depth" && i + 1 < toks.size()) {
      if (auto v = to_int(toks[i + 1])) out.depth = *v;
      ++i;
    } else if (toks[i] == "score" && i + 2 < toks.size()) {
      std::optional<int> v = to_int(toks[i + 2]);
      if (v && toks[i + 1] == "cp") {
        out.kind = InfoScore::Kind::cp;
        out.value = *v;
        have_score = true;
      } else if (v && toks[i + 1] == "mate") {
        out.kind = InfoScore::Kind::mate;
        out.value = *v;
        have_score = true;
      }
      i += 2;
    }
  }
  if (!have_score) return std::nullopt;
  return out;
}

std::optional<std::string> parse_bestmove(std::string_view line) {
  const auto toks = split_ws(line);
  if (toks.size() < 2 || toks[0] != "bestmove") return std::nullopt;
  return std::string(toks[1]);
}

}  // namespace uci

struct EngineSession::Impl {
  EngineConfig cfg;
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string rx;
  bool ready = false;

  explicit Impl(EngineConfig c) : cfg(std::move(c)) {}
  ~Impl() { close_session(); }

  void spawn() {
    // The executable string is split on whitespace: first token is the
    // command, the rest are its arguments.
    const auto arg_views = split_ws(cfg.executable);
    std::vector<std::string> args(arg_views.begin(), arg_views.end());
    if (args.empty()) throw SpawnError("engine executable must not be empty");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    // Writes to a dead engine must surface as errors, not kill the process.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2], out_pipe[2], exec_pipe[2];
    if (pipe(in_pipe) != 0) throw SpawnError("pipe: " + errno_text());
    if (pipe(out_pipe) != 0 || pipe(exec_pipe) != 0) {
      throw SpawnError("pipe: " + errno_text());
    }
    fcntl(exec_pipe[1], F_SETFD, FD_CLOEXEC);

    pid = fork();
    if (pid < 0) throw SpawnError("fork: " + errno_text());
    if (pid == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], exec_pipe[0]})
        close(fd);
      execvp(argv[0], argv.data());
      const int err = errno;
      [[maybe_unused]] ssize_t n = write(exec_pipe[1], &err, sizeof err);
      _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);
    close(exec_pipe[1]);
    to_child = in_pipe[1];
    from_child = out_pipe[0];

    // A successful exec closes the CLOEXEC pipe without writing.
    int err = 0;
    const ssize_t n = read(exec_pipe[0], &err, sizeof err);
    close(exec_pipe[0]);
    if (n > 0) {
      int status;
      waitpid(pid, &status, 0);
      pid = -1;
      throw SpawnError("cannot execute '" + args[0] + "': " + std::strerror(err));
    }
    fcntl(from_child, F_SETFL, O_NONBLOCK);
  }

  void write_line(std::string_view line) {
    std::string buf(line);
    buf += '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = write(to_child, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolViolation("engine closed its input (" + errno_text() + ")");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Next line before the deadline; nullopt on timeout. A closed engine pipe
  // throws ProtocolViolation.
  std::optional<std::string> read_line(Clock::time_point deadline) {
    for (;;) {
      if (const auto pos = rx.find('\n'); pos != std::string::npos) {
        std::string line = rx.substr(0, pos);
        rx.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto now = Clock::now();
      if (now >= deadline) return std::nullopt;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
      pollfd pfd{from_child, POLLIN, 0};
      const int rc = poll(&pfd, 1, static_cast<int>(left.count()) + 1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolViolation("poll: " + errno_text());
      }
      if (rc == 0) return std::nullopt;
      char buf[4096];
      const ssize_t n = read(from_child, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ProtocolViolation("read: " + errno_text());
      }
      if (n == 0) throw ProtocolViolation("engine closed its output");
      rx.append(buf, static_cast<std::size_t>(n));
    }
  }

  void handshake() {
    write_line("uci");
    auto deadline = Clock::now() + std::chrono::milliseconds(cfg.timeout_ms);
    for (;;) {
      auto line = read_line(deadline);
      if (!line)
        throw HandshakeTimeout("engine did not send uciok within " +
                               std::to_string(cfg.timeout_ms) + " ms");
      if (*line == "uciok") break;
    }
    write_line("setoption name Hash value " + std::to_string(cfg.hash_mb));
    write_line("setoption name Threads value " + std::to_string(cfg.threads));
    write_line("isready");
    deadline = Clock::now() + std::chrono::milliseconds(cfg.timeout_ms);
    for (;;) {
      auto line = read_line(deadline);
      if (!line)
        throw HandshakeTimeout("engine did not send readyok within " +
                               std::to_string(cfg.timeout_ms) + " ms");
      if (*line == "readyok") break;
    }
    ready = true;
  }

  void close_session() {
    if (to_child >= 0) {
      try {
        if (pid > 0) write_line("quit");
      } catch (const Error&) {
        // already gone
      }
      close(to_child);
      to_child = -1;
    }
    if (pid > 0) {
      int status = 0;
      for (int i = 0; i < 100; ++i) {
        if (waitpid(pid, &status, WNOHANG) == pid) {
          pid = -1;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      if (pid > 0) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        pid = -1;
      }
    }
    if (from_child >= 0) {
      close(from_child);
      from_child = -1;
    }
  }
};

EngineSession::EngineSession(EngineConfig cfg) {
  cfg.validate();
  impl_ = std::make_unique<Impl>(std::move(cfg));
}

EngineSession::~EngineSession() = default;
EngineSession::EngineSession(EngineSession&&) noexcept = default;
EngineSession& EngineSession::operator=(EngineSession&&) noexcept = default;

void EngineSession::open() {
  if (impl_->ready) return;
  impl_->spawn();
  impl_->handshake();
}

bool EngineSession::is_open() const { return impl_ && impl_->ready; }

const EngineConfig& EngineSession::config() const { return impl_->cfg; }

EngineEval EngineSession::evaluate(const Position& p) {
  if (!impl_->ready) open();
  Impl& im = *impl_;
  im.write_line("position fen " + format_fen(p));
  if (im.cfg.depth)
    im.write_line("go depth " + std::to_string(*im.cfg.depth));
  else
    im.write_line("go movetime " + std::to_string(*im.cfg.move_time_ms));

  const auto deadline = Clock::now() + std::chrono::milliseconds(im.cfg.timeout_ms);
  std::optional<uci::InfoScore> last;
  for (;;) {
    auto line = im.read_line(deadline);
    if (!line)
      throw EngineTimeout("engine did not send bestmove within " +
                          std::to_string(im.cfg.timeout_ms) + " ms");
    if (auto info = uci::parse_info_line(*line)) {
      last = info;
    } else if (uci::parse_bestmove(*line)) {
      break;
    }
  }
  if (!last) throw EngineParseError("engine sent bestmove without any score");

  const bool black_to_move = p.side_to_move() == Color::black;
  EngineEval out;
  out.depth = std::max(1, last->depth);
  if (last->kind == uci::InfoScore::Kind::cp) {
    out.kind = EngineEval::Kind::centipawns;
    out.value = black_to_move ? -last->value : last->value;
  } else {
    out.kind = EngineEval::Kind::mate_in;
    if (last->value == 0)  // the mover is already mated
      out.value = black_to_move ? 1 : -1;
    else
      out.value = black_to_move ? -last->value : last->value;
  }
  return out;
}

std::unique_ptr<Evaluator> make_evaluator(const EngineConfig& cfg) {
  cfg.validate();
  if (cfg.executable.starts_with("builtin:")) {
    if (cfg.executable == "builtin:material")
      return std::make_unique<MaterialEvaluator>();
    throw Error("unknown builtin evaluator '" + cfg.executable + "'");
  }
  return std::make_unique<EngineSession>(cfg);
}

std::vector<std::pair<Move, double>> rank_moves(Evaluator& eval,
                                                const Position& p) {
  std::vector<std::pair<Move, double>> out;
  const bool black_to_move = p.side_to_move() == Color::black;
  for (Move m : legal_moves(p)) {
    EngineEval e;
    try {
      e = eval.evaluate(detail::apply_unchecked(p, m));
    } catch (const EngineError& err) {
      throw EngineError(std::string(err.what()) + " (after move " +
                        format_uci(m) + ")");
    }
    const double w = winrate(e);
    out.emplace_back(m, black_to_move ? 1.0 - w : w);
  }
  return out;
}

}  // namespace chessbench
