#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ccs/annotations.hpp"
#include "ccs/error.hpp"

namespace ccs {

enum class JobKind { parse, predict, convert, train, evaluate };
enum class JobState { queued, running, done, failed };

const char* to_string(JobKind k) noexcept;
const char* to_string(JobState s) noexcept;

/// queued -> running -> done | failed; nothing else.
bool valid_transition(JobState from, JobState to) noexcept;

struct Job {
  std::string id;
  JobKind kind = JobKind::parse;
  JobState state = JobState::queued;
  std::string inputs;  // JSON
  std::string result;  // locator of the output, set when done
  std::string error;   // set when failed
  std::int64_t enqueued_ms = 0, started_ms = 0, ended_ms = 0;  // 0: not yet
};

std::string job_json(const Job& j);

enum class QueuePolicy { reject, block };

/// Bounded FIFO of jobs run by `executors` threads. With `capacity` jobs
/// waiting, submit() throws Errc::busy (reject) or waits for room (block).
class JobQueue {
 public:
  using Task = std::function<std::string()>;  // returns the result locator

  JobQueue(std::size_t capacity, int executors, QueuePolicy policy);
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(JobKind kind, std::string inputs, Task task);
  std::optional<Job> get(const std::string& id) const;
  /// Blocks until the job is done or failed, or the timeout passes.
  std::optional<Job> wait(const std::string& id, std::chrono::milliseconds timeout) const;
  std::size_t waiting() const;
  void shutdown();

 private:
  void run();
  void set_state(Job& j, JobState to);

  const std::size_t capacity_;
  const QueuePolicy policy_;
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::deque<std::pair<std::string, Task>> pending_;
  std::map<std::string, Job> jobs_;
  std::uint64_t counter_ = 0;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0: any free port
  std::filesystem::path store = "ccs-store";
  std::size_t queue_size = 64;
  int executors = 2;  // jobs in flight
  int workers = 1;    // page workers per job
  double xy_gap = 12;
  double merge_gap = 24;
  QueuePolicy queue_policy = QueuePolicy::reject;
  std::filesystem::path ui_dir;  // empty: no /ui
  std::size_t max_upload = std::size_t{64} << 20;
};

/// Reads a JSON config file; keys mirror the field names. Unknown keys and
/// bad values are invalid_argument.
ServiceConfig load_config(const std::filesystem::path& file, ServiceConfig base = {});
/// CCS_PORT, CCS_STORE, CCS_QUEUE_SIZE, CCS_WORKERS, CCS_EXECUTORS,
/// CCS_XY_GAP, CCS_MERGE_GAP, CCS_QUEUE_POLICY, CCS_UI_DIR, CCS_MAX_UPLOAD.
ServiceConfig apply_env(ServiceConfig c, const std::function<const char*(const char*)>& getenv);

int http_status(Errc code) noexcept;

/// HTTP facade over the stores, the job queue and the pipeline.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts serving on a background thread; returns the port.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

  const ServiceConfig& config() const { return config_; }
  AnnotationStore& store() { return *store_; }
  JobQueue& jobs() { return *jobs_; }

 private:
  struct Impl;
  ServiceConfig config_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<JobQueue> jobs_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ccs
