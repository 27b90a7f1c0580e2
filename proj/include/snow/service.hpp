// Copyright 2026 The snowdepth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "snow/annotations.hpp"
#include "snow/formats.hpp"

namespace snow {

// Key-value configuration, one "key = value" per line, '#' starts a comment.
// Keys: data_dir, host, port, gold_rate, seed, tasks_file, log_file,
// image_dir, ui_dir, gold_tolerance_deg, gold_min_pass_fraction, gold_min_tasks.
// Relative paths resolve against data_dir; data_dir defaults to $SNOW_DATA_DIR
// and then to the current directory.
struct ServiceConfig {
  std::filesystem::path data_dir = ".";
  std::string host = "127.0.0.1";
  int port = 8080;
  double gold_rate = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path tasks_file = "tasks.jsonl";
  std::filesystem::path log_file = "responses.log.jsonl";
  std::filesystem::path image_dir = "images";
  std::filesystem::path ui_dir;  // optional static files served at "/"
  GoldPolicy gold_policy;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

ServiceConfig parse_service_config(std::string_view text);
ServiceConfig load_service_config(const std::filesystem::path& path);

// Default data root: $SNOW_DATA_DIR when set, "." otherwise.
std::filesystem::path default_data_dir();

struct TaskState {
  AnnotationTask task;
  std::vector<WorkerResponse> responses;
  std::set<std::string> outstanding;  // served but not yet answered
  std::optional<AggregateResult> aggregate;
};

// In-memory protocol state. Every mutation goes through apply_serve or
// apply_response so that replaying a log reproduces it exactly.
class AnnotationQueue {
 public:
  AnnotationQueue(std::vector<AnnotationTask> tasks, double gold_rate, std::uint64_t seed);

  // Task to hand to this worker next, or nullopt. Does not mutate state.
  std::optional<std::string> pick_task(const std::string& worker_id) const;

  void apply_serve(const std::string& worker_id, const std::string& task_id);

  // Throws kValidation or kConflict without touching state.
  void check_response(const WorkerResponse& r) const;

  // Records the response; returns the aggregate once a regular task has two.
  std::optional<AggregateResult> apply_response(const WorkerResponse& r);

  const TaskState* find(const std::string& task_id) const;
  const std::vector<TaskState>& tasks() const { return tasks_; }
  std::uint64_t serve_count() const { return serve_count_; }
  double gold_rate() const { return gold_rate_; }

  std::vector<GoldSample> gold_samples(const std::string& worker_id) const;
  GoldStatus gold_status(const std::string& worker_id, const GoldPolicy& policy) const;

  // Canonical dump used to compare states.
  std::string snapshot() const;

  static constexpr std::size_t kResponsesPerTask = 2;

 private:
  struct WorkerState {
    std::set<std::string> served;
    std::set<std::string> answered;
  };

  double draw(std::uint64_t counter) const;

  std::vector<TaskState> tasks_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, WorkerState> workers_;
  double gold_rate_;
  std::uint64_t seed_;
  std::uint64_t serve_count_ = 0;
};

struct ExportFilter {
  std::optional<AggregateStatus> status = AggregateStatus::kAccepted;  // nullopt: every decided task
  bool exclude_spammers = false;
  bool include_consistency = true;
};

// Aggregates sorted by task id, then one consistency line when any task has
// at least two vector responses.
std::string build_export(const AnnotationQueue& queue, const ExportFilter& filter, const GoldPolicy& policy = {});

std::optional<ConsistencyReport> queue_consistency(const AnnotationQueue& queue);

struct SubmitAck {
  std::uint64_t seq = 0;
  AggregateStatus status = AggregateStatus::kPending;
  std::optional<AggregateResult> aggregate;
};

// Append-only JSONL log. Lines carry "seq" and "ts" next to the record fields.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path);
  ~ResponseLog();
  ResponseLog(const ResponseLog&) = delete;
  ResponseLog& operator=(const ResponseLog&) = delete;

  // Flushed to stable storage before returning.
  void append(const Json& line);
  std::uint64_t last_seq() const { return last_seq_; }
  const std::filesystem::path& path() const { return path_; }

  // Parsed lines of an existing log. A torn final line (no trailing newline
  // and not parseable) is dropped and reported through `torn_tail`.
  static std::vector<Json> load(const std::filesystem::path& path, bool* torn_tail = nullptr,
                                std::size_t* valid_bytes = nullptr);

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::uint64_t last_seq_ = 0;
};

// Replays serve and response lines onto a fresh queue.
void replay_log(AnnotationQueue& queue, const std::vector<Json>& lines);

class AnnotationService {
 public:
  AnnotationService(std::vector<AnnotationTask> tasks, const ServiceConfig& config);
  // Loads tasks from config.tasks_file.
  explicit AnnotationService(const ServiceConfig& config);

  std::optional<AnnotationTask> next_task(const std::string& worker_id);
  SubmitAck submit_response(const WorkerResponse& r);
  std::string export_jsonl(const ExportFilter& filter) const;
  std::optional<ConsistencyReport> consistency() const;
  std::string snapshot() const;
  GoldStatus gold_status(const std::string& worker_id) const;
  // The response this worker already gave for the task, if any.
  std::optional<WorkerResponse> recorded_response(const std::string& task_id, const std::string& worker_id) const;

  const ServiceConfig& config() const { return config_; }
  std::uint64_t last_seq() const;

 private:
  ServiceConfig config_;
  mutable std::shared_mutex mu_;
  AnnotationQueue queue_;
  ResponseLog log_;
};

std::vector<AnnotationTask> load_tasks(const std::filesystem::path& path);

// HTTP transport over an AnnotationService:
//   GET  /api/task?worker=ID   GET /api/image/{id}   GET /api/export
//   POST /api/response         GET /api/consistency
class HttpFrontend {
 public:
  explicit HttpFrontend(AnnotationService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace snow
