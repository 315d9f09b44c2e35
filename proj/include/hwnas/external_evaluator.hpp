#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <sys/types.h>

#include "hwnas/evaluator.hpp"

namespace hwnas {

/// A trainer process speaking the line protocol on its stdin/stdout.
/// Started through `/bin/sh -c <command>`; the constructor blocks until the
/// hello line arrives.
class WorkerProcess {
 public:
  WorkerProcess(const std::string& command, double timeout_s);
  ~WorkerProcess();

  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  /// Throws ProtocolError, TimeoutError or WorkerExit. After any throw the
  /// process is no longer usable.
  EvaluationResult request(const EvaluationRequest& req, double timeout_s);

  pid_t pid() const { return pid_; }

 private:
  std::string read_line(double timeout_s);
  void write_line(const std::string& line);
  void terminate();

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

struct ExternalOptions {
  std::string command;
  double timeout_s = 3600.0;
  int workers = 1;
};

/// Pool of worker processes. Transport failures turn into Failed results;
/// the affected worker is restarted on its next use.
class ExternalEvaluator final : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalOptions opts);
  ~ExternalEvaluator() override;

  EvaluationResult evaluate(const EvaluationRequest& req) override;
  std::vector<EvaluationResult> evaluate_batch(std::span<const EvaluationRequest> reqs) override;

  const ExternalOptions& options() const { return opts_; }

 private:
  std::size_t acquire();
  void release(std::size_t slot);

  ExternalOptions opts_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<WorkerProcess>> slots_;
  std::vector<bool> busy_;
};

}  // namespace hwnas
