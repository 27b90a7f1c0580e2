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

#include "snow/service.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>

#include <unistd.h>

#include "snow/error.hpp"

namespace snow {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) fail(ErrorKind::kValidation, "config key '" + key + "': bad number '" + value + "'");
  return out;
}

Json strings_json(const std::set<std::string>& s) {
  Json out = Json::array();
  for (const auto& v : s) out.push_back(v);
  return out;
}

}  // namespace

fs::path default_data_dir() {
  if (const char* env = std::getenv("SNOW_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

fs::path ServiceConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return data_dir / p;
}

ServiceConfig parse_service_config(std::string_view text) {
  ServiceConfig cfg;
  cfg.data_dir = default_data_dir();
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::kValidation, "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "data_dir") {
      cfg.data_dir = value;
    } else if (key == "host") {
      cfg.host = value;
    } else if (key == "port") {
      cfg.port = parse_number<int>(key, value);
      if (cfg.port < 0 || cfg.port > 65535) fail(ErrorKind::kValidation, "config key 'port' out of range");
    } else if (key == "gold_rate") {
      cfg.gold_rate = parse_number<double>(key, value);
      if (!(cfg.gold_rate >= 0 && cfg.gold_rate <= 1))
        fail(ErrorKind::kValidation, "config key 'gold_rate' must lie in [0, 1]");
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "tasks_file") {
      cfg.tasks_file = value;
    } else if (key == "log_file") {
      cfg.log_file = value;
    } else if (key == "image_dir") {
      cfg.image_dir = value;
    } else if (key == "ui_dir") {
      cfg.ui_dir = value;
    } else if (key == "gold_tolerance_deg") {
      cfg.gold_policy.tolerance_deg = parse_number<double>(key, value);
    } else if (key == "gold_min_pass_fraction") {
      cfg.gold_policy.min_pass_fraction = parse_number<double>(key, value);
    } else if (key == "gold_min_tasks") {
      cfg.gold_policy.min_tasks = parse_number<std::size_t>(key, value);
    } else {
      fail(ErrorKind::kValidation, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

ServiceConfig load_service_config(const fs::path& path) { return parse_service_config(read_file(path)); }

// ---------------------------------------------------------------------------
// AnnotationQueue

AnnotationQueue::AnnotationQueue(std::vector<AnnotationTask> tasks, double gold_rate, std::uint64_t seed)
    : gold_rate_(gold_rate), seed_(seed) {
  if (!(gold_rate >= 0 && gold_rate <= 1)) fail(ErrorKind::kInvalidArgument, "gold rate must lie in [0, 1]");
  tasks_.reserve(tasks.size());
  for (auto& t : tasks) {
    validate_task(t);
    if (index_.contains(t.task_id)) fail(ErrorKind::kValidation, "duplicate task id " + t.task_id);
    index_.emplace(t.task_id, tasks_.size());
    tasks_.push_back(TaskState{std::move(t), {}, {}, std::nullopt});
  }
}

double AnnotationQueue::draw(std::uint64_t counter) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
  std::mt19937_64 rng(seq);
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

const TaskState* AnnotationQueue::find(const std::string& task_id) const {
  auto it = index_.find(task_id);
  return it == index_.end() ? nullptr : &tasks_[it->second];
}

std::optional<std::string> AnnotationQueue::pick_task(const std::string& worker_id) const {
  if (worker_id.empty()) fail(ErrorKind::kValidation, "worker id must not be empty");
  auto accepting = [](const TaskState& t) {
    return t.task.is_gold() || t.responses.size() < kResponsesPerTask;
  };
  // A task handed out earlier and not answered yet is handed out again.
  for (const auto& t : tasks_)
    if (t.outstanding.contains(worker_id) && accepting(t)) return t.task.task_id;

  const WorkerState* worker = nullptr;
  if (auto it = workers_.find(worker_id); it != workers_.end()) worker = &it->second;
  auto unseen = [&](const TaskState& t) { return worker == nullptr || !worker->served.contains(t.task.task_id); };

  // Regular tasks whose open slots are all handed out are only picked when
  // nothing else is left, so an abandoned serve cannot starve a task.
  auto best_of = [&](bool gold) -> std::optional<std::string> {
    const TaskState* best = nullptr;
    std::size_t best_load = 0;
    for (const auto& t : tasks_) {
      if (t.task.is_gold() != gold || !accepting(t) || !unseen(t)) continue;
      std::size_t load = t.responses.size() + t.outstanding.size();
      if (!gold && load >= kResponsesPerTask) load += tasks_.size();
      if (best == nullptr || load < best_load) {
        best = &t;
        best_load = load;
      }
    }
    if (best == nullptr) return std::nullopt;
    return best->task.task_id;
  };

  const bool want_gold = gold_rate_ > 0 && (gold_rate_ >= 1 || draw(serve_count_) < gold_rate_);
  if (want_gold) {
    if (auto gold = best_of(true)) return gold;
    if (gold_rate_ >= 1) return std::nullopt;
  }
  return best_of(false);
}

void AnnotationQueue::apply_serve(const std::string& worker_id, const std::string& task_id) {
  auto it = index_.find(task_id);
  if (it == index_.end()) fail(ErrorKind::kValidation, "unknown task " + task_id);
  WorkerState& w = workers_[worker_id];
  if (w.served.contains(task_id)) fail(ErrorKind::kConflict, "task " + task_id + " already served to " + worker_id);
  w.served.insert(task_id);
  tasks_[it->second].outstanding.insert(worker_id);
  ++serve_count_;
}

void AnnotationQueue::check_response(const WorkerResponse& r) const {
  validate_response(r);
  const TaskState* t = find(r.task_id);
  if (t == nullptr) fail(ErrorKind::kValidation, "unknown task " + r.task_id);
  auto w = workers_.find(r.worker_id);
  if (w != workers_.end() && w->second.answered.contains(r.task_id))
    fail(ErrorKind::kConflict, "worker " + r.worker_id + " already answered task " + r.task_id);
  if (w == workers_.end() || !w->second.served.contains(r.task_id))
    fail(ErrorKind::kValidation, "task " + r.task_id + " was not served to worker " + r.worker_id);
  if (!t->task.is_gold() && t->responses.size() >= kResponsesPerTask)
    fail(ErrorKind::kConflict, "task " + r.task_id + " already has two responses");
}

std::optional<AggregateResult> AnnotationQueue::apply_response(const WorkerResponse& r) {
  check_response(r);
  TaskState& t = tasks_[index_.at(r.task_id)];
  t.responses.push_back(r);
  t.outstanding.erase(r.worker_id);
  workers_[r.worker_id].answered.insert(r.task_id);
  if (!t.task.is_gold() && t.responses.size() == kResponsesPerTask) {
    t.aggregate = aggregate_pair(t.responses[0], t.responses[1]);
    return t.aggregate;
  }
  return std::nullopt;
}

std::vector<GoldSample> AnnotationQueue::gold_samples(const std::string& worker_id) const {
  std::vector<GoldSample> out;
  for (const auto& t : tasks_) {
    if (!t.task.is_gold()) continue;
    for (const auto& r : t.responses)
      if (r.worker_id == worker_id) out.push_back({r.normal, *t.task.gold});
  }
  return out;
}

GoldStatus AnnotationQueue::gold_status(const std::string& worker_id, const GoldPolicy& policy) const {
  return gold_check(gold_samples(worker_id), policy);
}

std::string AnnotationQueue::snapshot() const {
  Json j;
  j["serve_count"] = serve_count_;
  j["gold_rate"] = gold_rate_;
  Json tasks = Json::array();
  for (const auto& t : tasks_) {
    Json e;
    e["task"] = to_json(t.task);
    Json responses = Json::array();
    for (const auto& r : t.responses) responses.push_back(to_json(r));
    e["responses"] = std::move(responses);
    e["outstanding"] = strings_json(t.outstanding);
    if (t.aggregate) e["aggregate"] = to_json(*t.aggregate);
    tasks.push_back(std::move(e));
  }
  j["tasks"] = std::move(tasks);
  Json workers = Json::object();
  for (const auto& [id, w] : workers_) {
    Json e;
    e["served"] = strings_json(w.served);
    e["answered"] = strings_json(w.answered);
    workers[id] = std::move(e);
  }
  j["workers"] = std::move(workers);
  return j.dump();
}

std::optional<ConsistencyReport> queue_consistency(const AnnotationQueue& queue) {
  std::vector<ConsistencyGroup> groups;
  for (const auto& t : queue.tasks()) {
    ConsistencyGroup g;
    g.task_id = t.task.task_id;
    for (const auto& r : t.responses)
      if (r.normal) g.responses.push_back(*r.normal);
    if (g.responses.size() < 2) continue;
    g.reference = t.task.gold;
    groups.push_back(std::move(g));
  }
  if (groups.empty()) return std::nullopt;
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.task_id < b.task_id; });
  return consistency_stats(groups);
}

std::string build_export(const AnnotationQueue& queue, const ExportFilter& filter, const GoldPolicy& policy) {
  std::vector<const AggregateResult*> rows;
  std::map<std::string, GoldStatus> status_cache;
  auto spammer = [&](const std::string& worker) {
    auto it = status_cache.find(worker);
    if (it == status_cache.end()) it = status_cache.emplace(worker, queue.gold_status(worker, policy)).first;
    return it->second == GoldStatus::kSpammer;
  };
  for (const auto& t : queue.tasks()) {
    if (!t.aggregate) continue;
    if (filter.status && t.aggregate->status != *filter.status) continue;
    if (filter.exclude_spammers &&
        std::any_of(t.responses.begin(), t.responses.end(), [&](const auto& r) { return spammer(r.worker_id); }))
      continue;
    rows.push_back(&*t.aggregate);
  }
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->task_id < b->task_id; });
  std::string out;
  for (const auto* r : rows) {
    out += to_json(*r).dump();
    out += '\n';
  }
  if (filter.include_consistency) {
    if (auto report = queue_consistency(queue)) {
      out += to_json(*report).dump();
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ResponseLog

std::vector<Json> ResponseLog::load(const fs::path& path, bool* torn_tail, std::size_t* valid_bytes) {
  if (torn_tail != nullptr) *torn_tail = false;
  if (valid_bytes != nullptr) *valid_bytes = 0;
  std::vector<Json> lines;
  if (!fs::exists(path)) return lines;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::uint64_t last_seq = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      // An unterminated tail was never acknowledged.
      if (torn_tail != nullptr) *torn_tail = true;
      break;
    }
    ++line_no;
    const std::string_view line(text.data() + pos, end - pos);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    }
    if (!j.is_object() || !j.contains("seq") || !j["seq"].is_number_unsigned())
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": missing sequence number");
    const auto seq = j["seq"].get<std::uint64_t>();
    if (seq <= last_seq)
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": sequence numbers must increase");
    last_seq = seq;
    lines.push_back(std::move(j));
    pos = end + 1;
    if (valid_bytes != nullptr) *valid_bytes = pos;
  }
  return lines;
}

ResponseLog::ResponseLog(fs::path path) : path_(std::move(path)) {
  bool torn = false;
  std::size_t valid = 0;
  const auto lines = load(path_, &torn, &valid);
  if (torn) fs::resize_file(path_, valid);
  if (!lines.empty()) last_seq_ = lines.back()["seq"].get<std::uint64_t>();
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  file_ = std::fopen(path_.c_str(), "ab");
  if (file_ == nullptr) fail(ErrorKind::kIo, "cannot open log " + path_.string());
}

ResponseLog::~ResponseLog() {
  if (file_ != nullptr) std::fclose(file_);
}

void ResponseLog::append(const Json& record) {
  Json line;
  line["seq"] = last_seq_ + 1;
  line["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  for (auto it = record.begin(); it != record.end(); ++it) line[it.key()] = it.value();
  const std::string text = line.dump() + "\n";
  if (std::fwrite(text.data(), 1, text.size(), file_) != text.size() || std::fflush(file_) != 0 ||
      ::fsync(::fileno(file_)) != 0)
    fail(ErrorKind::kIo, "cannot append to log " + path_.string());
  ++last_seq_;
}

void replay_log(AnnotationQueue& queue, const std::vector<Json>& lines) {
  for (const auto& j : lines) {
    const std::string kind = j.value("kind", std::string());
    if (kind == "serve") {
      queue.apply_serve(j.at("worker_id").get<std::string>(), j.at("task_id").get<std::string>());
    } else if (kind == "response") {
      queue.apply_response(response_from_json(j));
    } else {
      fail(ErrorKind::kFormat, "log line " + j.value("seq", Json()).dump() + ": unexpected kind '" + kind + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// AnnotationService

std::vector<AnnotationTask> load_tasks(const fs::path& path) {
  std::vector<AnnotationTask> tasks;
  for (auto& rec : read_jsonl(path)) {
    auto* task = std::get_if<AnnotationTask>(&rec.value);
    if (task == nullptr) fail(ErrorKind::kFormat, path.string() + ": expected only task records");
    tasks.push_back(std::move(*task));
  }
  return tasks;
}

AnnotationService::AnnotationService(std::vector<AnnotationTask> tasks, const ServiceConfig& config)
    : config_(config),
      queue_(std::move(tasks), config.gold_rate, config.seed),
      log_(config.resolve(config.log_file)) {
  replay_log(queue_, ResponseLog::load(log_.path()));
}

AnnotationService::AnnotationService(const ServiceConfig& config)
    : AnnotationService(load_tasks(config.resolve(config.tasks_file)), config) {}

std::optional<AnnotationTask> AnnotationService::next_task(const std::string& worker_id) {
  std::unique_lock lock(mu_);
  const auto picked = queue_.pick_task(worker_id);
  if (!picked) return std::nullopt;
  const TaskState* t = queue_.find(*picked);
  if (!t->outstanding.contains(worker_id)) {
    Json record;
    record["kind"] = "serve";
    record["task_id"] = *picked;
    record["worker_id"] = worker_id;
    log_.append(record);
    queue_.apply_serve(worker_id, *picked);
  }
  return queue_.find(*picked)->task;
}

SubmitAck AnnotationService::submit_response(const WorkerResponse& r) {
  std::unique_lock lock(mu_);
  queue_.check_response(r);
  log_.append(to_json(r));
  SubmitAck ack;
  ack.seq = log_.last_seq();
  ack.aggregate = queue_.apply_response(r);
  if (ack.aggregate) ack.status = ack.aggregate->status;
  return ack;
}

std::string AnnotationService::export_jsonl(const ExportFilter& filter) const {
  std::shared_lock lock(mu_);
  return build_export(queue_, filter, config_.gold_policy);
}

std::optional<ConsistencyReport> AnnotationService::consistency() const {
  std::shared_lock lock(mu_);
  return queue_consistency(queue_);
}

std::string AnnotationService::snapshot() const {
  std::shared_lock lock(mu_);
  return queue_.snapshot();
}

GoldStatus AnnotationService::gold_status(const std::string& worker_id) const {
  std::shared_lock lock(mu_);
  return queue_.gold_status(worker_id, config_.gold_policy);
}

std::optional<WorkerResponse> AnnotationService::recorded_response(const std::string& task_id,
                                                                  const std::string& worker_id) const {
  std::shared_lock lock(mu_);
  const TaskState* t = queue_.find(task_id);
  if (t == nullptr) return std::nullopt;
  for (const auto& r : t->responses)
    if (r.worker_id == worker_id) return r;
  return std::nullopt;
}

std::uint64_t AnnotationService::last_seq() const {
  std::shared_lock lock(mu_);
  return log_.last_seq();
}

}  // namespace snow
