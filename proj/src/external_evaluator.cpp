#include "hwnas/external_evaluator.hpp"

#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "hwnas/errors.hpp"

extern char** environ;

namespace hwnas {

namespace {

constexpr std::size_t kMaxLine = 64 * 1024 * 1024;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

WorkerProcess::WorkerProcess(const std::string& command, double timeout_s) {
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw WorkerExit(errno_text("pipe"));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw WorkerExit(errno_text("pipe"));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  // Own process group, so a kill reaches everything the shell started.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  const std::string script = "exec " + command;
  const char* argv[] = {"sh", "-c", script.c_str(), nullptr};
  const int rc = posix_spawn(&pid_, "/bin/sh", &actions, &attr,
                             const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  if (rc != 0) {
    pid_ = -1;
    terminate();
    throw WorkerExit(std::string("cannot spawn worker: ") + std::strerror(rc));
  }

  try {
    const auto line = read_line(timeout_s);
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("hello") ||
        !j["hello"].is_object() || j["hello"].value("protocol", -1) != kProtocolVersion)
      throw ProtocolError("bad handshake: " + line);
  } catch (...) {
    terminate();
    throw;
  }
}

WorkerProcess::~WorkerProcess() { terminate(); }

void WorkerProcess::terminate() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ <= 0) return;
  // Closing stdin asks a well-behaved worker to exit; give it a moment.
  for (int i = 0; i < 20; ++i) {
    if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
      pid_ = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(-pid_, SIGKILL);
  waitpid(pid_, nullptr, 0);
  pid_ = -1;
}

std::string WorkerProcess::read_line(double timeout_s) {
  using clock = std::chrono::steady_clock;
  const auto deadline =
      clock::now() + std::chrono::duration_cast<clock::duration>(
                         std::chrono::duration<double>(timeout_s));
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (from_child_ < 0) throw WorkerExit("worker pipe closed");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) {
      terminate();
      throw TimeoutError("worker did not answer within " + std::to_string(timeout_s) + " s");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw WorkerExit(errno_text("poll"));
    }
    if (pr == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WorkerExit(errno_text("read"));
    }
    if (n == 0) {
      terminate();
      throw WorkerExit("worker exited");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
    if (buffer_.size() > kMaxLine) throw ProtocolError("worker line too long");
  }
}

void WorkerProcess::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    if (to_child_ < 0) throw WorkerExit("worker pipe closed");
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      terminate();
      throw WorkerExit(errno_text("write"));
    }
    off += static_cast<std::size_t>(n);
  }
}

EvaluationResult WorkerProcess::request(const EvaluationRequest& req, double timeout_s) {
  write_line(request_to_json(req).dump());
  const auto line = read_line(timeout_s);
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("response is not JSON: " + line);
  auto res = result_from_json(j);
  if (res.id != req.id)
    throw ProtocolError("response id " + std::to_string(res.id) + " does not match request " +
                        std::to_string(req.id));
  if (res.ok() && res.adversarial_accuracies.size() != req.epsilons.size())
    throw ProtocolError("response has " + std::to_string(res.adversarial_accuracies.size()) +
                        " adversarial accuracies for " + std::to_string(req.epsilons.size()) +
                        " epsilons");
  if (!res.ok()) res.adversarial_accuracies.assign(req.epsilons.size(), 0.0);
  return res;
}

ExternalEvaluator::ExternalEvaluator(ExternalOptions opts) : opts_(std::move(opts)) {
  if (opts_.command.empty()) throw ConfigError("external evaluator needs a command");
  if (opts_.workers < 1) throw ConfigError("evaluator.workers must be >= 1");
  if (!(opts_.timeout_s > 0.0)) throw ConfigError("evaluator timeout must be > 0");
  slots_.resize(static_cast<std::size_t>(opts_.workers));
  busy_.assign(slots_.size(), false);
}

ExternalEvaluator::~ExternalEvaluator() = default;

std::size_t ExternalEvaluator::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    for (std::size_t i = 0; i < busy_.size(); ++i) {
      if (!busy_[i]) {
        busy_[i] = true;
        return i;
      }
    }
    cv_.wait(lock);
  }
}

void ExternalEvaluator::release(std::size_t slot) {
  {
    std::lock_guard lock(mutex_);
    busy_[slot] = false;
  }
  cv_.notify_one();
}

EvaluationResult ExternalEvaluator::evaluate(const EvaluationRequest& req) {
  check_request(req);
  const auto slot = acquire();
  EvaluationResult res;
  try {
    if (!slots_[slot]) slots_[slot] = std::make_unique<WorkerProcess>(opts_.command, opts_.timeout_s);
    res = slots_[slot]->request(req, opts_.timeout_s);
  } catch (const EvaluatorError& e) {
    slots_[slot].reset();
    res = EvaluationResult::failed(req.id, e.what(), req.epsilons.size());
  }
  release(slot);
  return res;
}

std::vector<EvaluationResult> ExternalEvaluator::evaluate_batch(
    std::span<const EvaluationRequest> reqs) {
  for (const auto& r : reqs) check_request(r);
  std::vector<EvaluationResult> out(reqs.size());
  const std::size_t threads = std::min<std::size_t>(slots_.size(), reqs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < reqs.size(); ++i) out[i] = evaluate(reqs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < reqs.size(); i = next++) out[i] = evaluate(reqs[i]);
      });
    }
  }
  return out;
}

}  // namespace hwnas
