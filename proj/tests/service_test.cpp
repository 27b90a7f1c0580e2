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

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "snow/formats.hpp"
#include "support.hpp"

namespace snow {
namespace {

using testing::TempDir;
using testing::tilted_normal;

std::vector<AnnotationTask> make_tasks(int count, int gold_every = 0) {
  std::vector<AnnotationTask> tasks;
  for (int i = 0; i < count; ++i) {
    AnnotationTask t;
    char id[16];
    std::snprintf(id, sizeof id, "t%03d", i);
    t.task_id = id;
    t.image_id = "img" + std::to_string(i % 3);
    t.keypoint = Pixel{10 + i, 20 + i};
    t.focal_length_px = 500.0;
    t.image_width = 320;
    t.image_height = 240;
    if (gold_every > 0 && i % gold_every == 0) t.gold = tilted_normal(15.0, 30.0 * i);
    tasks.push_back(t);
  }
  return tasks;
}

ServiceConfig config_in(const TempDir& dir, double gold_rate = 0.0, std::uint64_t seed = 1) {
  ServiceConfig cfg;
  cfg.data_dir = dir.path();
  cfg.gold_rate = gold_rate;
  cfg.seed = seed;
  return cfg;
}

WorkerResponse answer(const std::string& task, const std::string& worker, std::optional<Vec3> n,
                      std::string response_id = {}) {
  WorkerResponse r;
  r.task_id = task;
  r.worker_id = worker;
  r.normal = std::move(n);
  r.elapsed_s = 2.5;
  r.response_id = std::move(response_id);
  return r;
}

TEST(QueueTest, FreshQueueWithoutGoldServesUnansweredTask) {
  AnnotationQueue q(make_tasks(4, 2), 0.0, 3);
  auto id = q.pick_task("w1");
  ASSERT_TRUE(id.has_value());
  const TaskState* t = q.find(*id);
  ASSERT_NE(t, nullptr);
  EXPECT_TRUE(t->responses.empty());
  EXPECT_FALSE(t->task.is_gold());
}

TEST(QueueTest, OutstandingTaskIsServedAgain) {
  AnnotationQueue q(make_tasks(4), 0.0, 3);
  auto id = q.pick_task("w1");
  ASSERT_TRUE(id);
  q.apply_serve("w1", *id);
  EXPECT_EQ(q.pick_task("w1"), id);
}

TEST(QueueTest, AnsweredTaskIsNeverServedToSameWorker) {
  AnnotationQueue q(make_tasks(3), 0.0, 3);
  std::set<std::string> seen;
  for (int i = 0; i < 3; ++i) {
    auto id = q.pick_task("w1");
    ASSERT_TRUE(id);
    EXPECT_TRUE(seen.insert(*id).second);
    q.apply_serve("w1", *id);
    q.apply_response(answer(*id, "w1", tilted_normal(5, 0)));
  }
  EXPECT_FALSE(q.pick_task("w1").has_value());
}

TEST(QueueTest, FullGoldRateServesOnlyGold) {
  AnnotationQueue q(make_tasks(12, 3), 1.0, 9);
  for (int w = 0; w < 4; ++w) {
    const std::string worker = "w" + std::to_string(w);
    auto id = q.pick_task(worker);
    ASSERT_TRUE(id);
    EXPECT_TRUE(q.find(*id)->task.is_gold());
    q.apply_serve(worker, *id);
    q.apply_response(answer(*id, worker, tilted_normal(10, 0)));
  }
}

TEST(QueueTest, FullGoldRateWithoutGoldTasksServesNothing) {
  AnnotationQueue q(make_tasks(5), 1.0, 9);
  EXPECT_FALSE(q.pick_task("w1").has_value());
}

TEST(QueueTest, RejectsBadRequests) {
  AnnotationQueue q(make_tasks(2), 0.0, 1);
  EXPECT_SNOW_ERROR(q.pick_task(""), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(q.apply_serve("w1", "nope"), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(q.check_response(answer("nope", "w1", tilted_normal(0, 0))), ErrorKind::kValidation);
  // Not served to this worker.
  EXPECT_SNOW_ERROR(q.check_response(answer("t000", "w1", tilted_normal(0, 0))), ErrorKind::kValidation);
  q.apply_serve("w1", "t000");
  EXPECT_SNOW_ERROR(q.apply_serve("w1", "t000"), ErrorKind::kConflict);
  EXPECT_SNOW_ERROR(q.check_response(answer("t000", "w1", Vec3(0, 0, -2))), ErrorKind::kValidation);
}

TEST(QueueTest, ThirdWorkerCannotAnswerDecidedTask) {
  AnnotationQueue q(make_tasks(1), 0.0, 1);
  for (const char* w : {"a", "b", "c"}) q.apply_serve(w, "t000");
  q.apply_response(answer("t000", "a", tilted_normal(0, 0)));
  q.apply_response(answer("t000", "b", tilted_normal(0, 0)));
  EXPECT_SNOW_ERROR(q.check_response(answer("t000", "c", tilted_normal(0, 0))), ErrorKind::kConflict);
}

TEST(ServiceTest, AgreeingPairIsAccepted) {
  TempDir dir("svc");
  AnnotationService s(make_tasks(1), config_in(dir));
  ASSERT_TRUE(s.next_task("a"));
  ASSERT_TRUE(s.next_task("b"));
  const SubmitAck first = s.submit_response(answer("t000", "a", tilted_normal(0, 0)));
  EXPECT_EQ(first.status, AggregateStatus::kPending);
  EXPECT_FALSE(first.aggregate);
  const SubmitAck second = s.submit_response(answer("t000", "b", tilted_normal(20, 0)));
  ASSERT_TRUE(second.aggregate);
  EXPECT_EQ(second.status, AggregateStatus::kAccepted);
  ASSERT_TRUE(second.aggregate->normal);
  EXPECT_NEAR(angle_deg(*second.aggregate->normal, tilted_normal(10, 0)), 0.0, 1e-9);
  EXPECT_GT(second.seq, first.seq);
}

TEST(ServiceTest, DistantPairIsRejected) {
  TempDir dir("svc");
  AnnotationService s(make_tasks(1), config_in(dir));
  s.next_task("a");
  s.next_task("b");
  s.submit_response(answer("t000", "a", tilted_normal(20, 0)));
  const SubmitAck ack = s.submit_response(answer("t000", "b", tilted_normal(20, 180)));
  EXPECT_EQ(ack.status, AggregateStatus::kRejected);
  ASSERT_TRUE(ack.aggregate && ack.aggregate->disagreement_deg);
  EXPECT_NEAR(*ack.aggregate->disagreement_deg, 40.0, 1e-9);
  EXPECT_FALSE(ack.aggregate->normal);
}

TEST(ServiceTest, DuplicateSubmitConflictsAndLeavesLogUnchanged) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir);
  AnnotationService s(make_tasks(2), cfg);
  s.next_task("a");
  s.submit_response(answer("t000", "a", tilted_normal(5, 0), "r1"));
  const std::string before = read_file(cfg.resolve(cfg.log_file));
  const std::string state = s.snapshot();
  EXPECT_SNOW_ERROR(s.submit_response(answer("t000", "a", tilted_normal(5, 0), "r1")), ErrorKind::kConflict);
  EXPECT_EQ(read_file(cfg.resolve(cfg.log_file)), before);
  EXPECT_EQ(s.snapshot(), state);
  auto earlier = s.recorded_response("t000", "a");
  ASSERT_TRUE(earlier);
  EXPECT_EQ(earlier->response_id, "r1");
  EXPECT_FALSE(s.recorded_response("t000", "b"));
}

TEST(ServiceTest, InvalidSubmitIsNotLogged) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir);
  AnnotationService s(make_tasks(1), cfg);
  s.next_task("a");
  const std::string before = read_file(cfg.resolve(cfg.log_file));
  EXPECT_SNOW_ERROR(s.submit_response(answer("t000", "a", Vec3(1, 1, 1))), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(s.submit_response(answer("t000", "", tilted_normal(0, 0))), ErrorKind::kValidation);
  EXPECT_EQ(read_file(cfg.resolve(cfg.log_file)), before);
}

TEST(ExportTest, EmptyLogExportsNothing) {
  TempDir dir("svc");
  AnnotationService s(make_tasks(3), config_in(dir));
  EXPECT_EQ(s.export_jsonl(ExportFilter{}), "");
  EXPECT_EQ(s.export_jsonl(ExportFilter{std::nullopt, false, true}), "");
  EXPECT_FALSE(s.consistency());
}

// Ten tasks answered by two workers with disagreements from 0 to 45 degrees.
struct TenTaskLog {
  std::vector<WorkerResponse> responses;
  std::vector<AggregateResult> offline;
};

TenTaskLog run_ten_tasks(AnnotationService& s) {
  TenTaskLog log;
  std::map<std::string, WorkerResponse> first;
  for (const char* w : {"a", "b"}) {
    while (auto t = s.next_task(w)) {
      const int i = std::stoi(t->task_id.substr(1));
      const double spread = 5.0 * i;
      WorkerResponse r = std::string(w) == "a" ? answer(t->task_id, w, tilted_normal(spread / 2, 90))
                                               : answer(t->task_id, w, tilted_normal(spread / 2, 270));
      if (i == 7 && r.worker_id == "b") r.normal.reset();
      s.submit_response(r);
      log.responses.push_back(r);
      if (r.worker_id == "a")
        first[r.task_id] = r;
      else
        log.offline.push_back(aggregate_pair(first.at(r.task_id), r));
    }
  }
  EXPECT_EQ(log.offline.size(), 10u);
  return log;
}

TEST(ExportTest, ExportMatchesOfflineAggregation) {
  TempDir dir("svc");
  AnnotationService s(make_tasks(10), config_in(dir));
  TenTaskLog log = run_ten_tasks(s);
  std::sort(log.offline.begin(), log.offline.end(),
            [](const auto& a, const auto& b) { return a.task_id < b.task_id; });

  std::string all, accepted;
  std::size_t accepted_count = 0;
  for (const auto& r : log.offline) {
    all += to_json(r).dump() + "\n";
    if (r.status == AggregateStatus::kAccepted) {
      accepted += to_json(r).dump() + "\n";
      ++accepted_count;
    }
  }
  EXPECT_EQ(accepted_count, 7u);  // spreads 0..30 accepted (30 inclusive), one hard_to_tell, 40 and 45 rejected
  EXPECT_EQ(s.export_jsonl(ExportFilter{std::nullopt, false, false}), all);
  EXPECT_EQ(s.export_jsonl(ExportFilter{AggregateStatus::kAccepted, false, false}), accepted);

  const std::string full = s.export_jsonl(ExportFilter{});
  ASSERT_EQ(full.rfind(accepted, 0), 0u);
  const Json tail = Json::parse(full.substr(accepted.size()));
  EXPECT_EQ(tail["kind"], "consistency");
  EXPECT_EQ(s.export_jsonl(ExportFilter{}), full);
}

TEST(ExportTest, ExportIsByteIdenticalAcrossRestart) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir);
  std::string first;
  {
    AnnotationService s(make_tasks(10), cfg);
    run_ten_tasks(s);
    first = s.export_jsonl(ExportFilter{});
  }
  AnnotationService again(make_tasks(10), cfg);
  EXPECT_EQ(again.export_jsonl(ExportFilter{}), first);
}

TEST(ExportTest, SpammerResponsesCanBeExcluded) {
  TempDir dir("svc");
  ServiceConfig cfg = config_in(dir, 0.5, 4);
  cfg.gold_policy.min_tasks = 2;
  std::vector<AnnotationTask> tasks = make_tasks(40, 2);
  AnnotationService s(tasks, cfg);
  std::map<std::string, Vec3> gold;
  for (const auto& t : tasks)
    if (t.gold) gold[t.task_id] = *t.gold;
  // "good" answers gold exactly, "bad" answers gold with a flipped azimuth.
  for (int round = 0; round < 20; ++round) {
    for (const char* w : {"good", "bad", "peer"}) {
      auto t = s.next_task(w);
      if (!t) continue;
      Vec3 n = tilted_normal(5, 0);
      auto g = gold.find(t->task_id);
      if (g != gold.end()) n = std::string(w) == "bad" ? Vec3(-g->second.x(), -g->second.y(), -0.2).normalized() : g->second;
      try {
        s.submit_response(answer(t->task_id, w, n));
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kConflict);
      }
    }
  }
  ASSERT_EQ(s.gold_status("bad"), GoldStatus::kSpammer);
  EXPECT_EQ(s.gold_status("good"), GoldStatus::kTrusted);
  const std::string filtered = s.export_jsonl(ExportFilter{std::nullopt, true, false});
  const std::string unfiltered = s.export_jsonl(ExportFilter{std::nullopt, false, false});
  EXPECT_LT(filtered.size(), unfiltered.size());
}

TEST(ModelCheck, RandomInterleavingKeepsProtocolInvariants) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    AnnotationQueue q(make_tasks(15, 5), 0.2, seed);
    std::map<std::string, std::string> holding;  // worker -> served task
    std::map<std::string, std::set<std::string>> answered;
    const std::vector<std::string> workers = {"w0", "w1", "w2", "w3", "w4", "w5"};
    for (int step = 0; step < 300; ++step) {
      const std::string& w = workers[rng() % workers.size()];
      auto held = holding.find(w);
      if (held == holding.end()) {
        auto id = q.pick_task(w);
        if (!id) continue;
        EXPECT_EQ(answered[w].count(*id), 0u) << "answered task served again";
        q.apply_serve(w, *id);
        holding[w] = *id;
        continue;
      }
      const std::string task = held->second;
      std::optional<Vec3> n;
      if (rng() % 8 != 0) n = tilted_normal(static_cast<double>(rng() % 40), static_cast<double>(rng() % 360));
      const WorkerResponse r = answer(task, w, n);
      const std::string before = q.snapshot();
      try {
        q.check_response(r);
        q.apply_response(r);
        answered[w].insert(task);
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kConflict);
        EXPECT_EQ(q.snapshot(), before);
      }
      holding.erase(held);
      if (rng() % 5 == 0) {
        // Replayed submission from the same worker.
        EXPECT_SNOW_ERROR(q.check_response(r), ErrorKind::kConflict);
      }
    }
    for (const auto& t : q.tasks()) {
      std::set<std::string> distinct;
      for (const auto& r : t.responses) distinct.insert(r.worker_id);
      EXPECT_EQ(distinct.size(), t.responses.size()) << t.task.task_id;
      if (!t.task.is_gold()) {
        EXPECT_LE(t.responses.size(), AnnotationQueue::kResponsesPerTask) << t.task.task_id;
        EXPECT_EQ(t.aggregate.has_value(), t.responses.size() == AnnotationQueue::kResponsesPerTask);
      } else {
        EXPECT_FALSE(t.aggregate.has_value());
      }
    }
  }
}

// Drives a service through a mixed workload and returns the raw log text.
std::string mixed_workload(const ServiceConfig& cfg, std::uint64_t seed, int task_count = 12) {
  AnnotationService s(make_tasks(task_count, 4), cfg);
  std::mt19937_64 rng(seed);
  for (int step = 0; step < 80; ++step) {
    const std::string w = "w" + std::to_string(rng() % 4);
    auto t = s.next_task(w);
    if (!t || rng() % 4 == 0) continue;
    try {
      s.submit_response(answer(t->task_id, w, tilted_normal(static_cast<double>(rng() % 50), 0)));
    } catch (const Error&) {
    }
  }
  return read_file(cfg.resolve(cfg.log_file));
}

TEST(ReplayTest, EveryLogPrefixRestartsToItsReplay) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir, 0.3, 5);
  const std::string log = mixed_workload(cfg, 11);
  std::vector<std::size_t> ends{0};
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i] == '\n') ends.push_back(i + 1);
  ASSERT_GT(ends.size(), 40u);

  const std::vector<Json> lines = ResponseLog::load(cfg.resolve(cfg.log_file));
  ASSERT_EQ(lines.size() + 1, ends.size());
  for (std::size_t k = 0; k < ends.size(); ++k) {
    TempDir prefix_dir("prefix");
    const ServiceConfig pcfg = config_in(prefix_dir, 0.3, 5);
    write_file_atomic(pcfg.resolve(pcfg.log_file), log.substr(0, ends[k]));
    AnnotationService restarted(make_tasks(12, 4), pcfg);

    AnnotationQueue replayed(make_tasks(12, 4), 0.3, 5);
    replay_log(replayed, std::vector<Json>(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(k)));
    EXPECT_EQ(restarted.snapshot(), replayed.snapshot()) << "prefix " << k;
  }
}

TEST(ReplayTest, RestartContinuesWhereLiveServiceStopped) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir, 0.3, 5);
  std::string live;
  std::optional<AnnotationTask> next_live;
  {
    AnnotationService s(make_tasks(12, 4), cfg);
    for (int i = 0; i < 6; ++i) {
      auto t = s.next_task("w" + std::to_string(i % 3));
      if (t) s.submit_response(answer(t->task_id, "w" + std::to_string(i % 3), tilted_normal(3.0 * i, 0)));
    }
    live = s.snapshot();
  }
  AnnotationService restarted(make_tasks(12, 4), cfg);
  EXPECT_EQ(restarted.snapshot(), live);
  EXPECT_GT(restarted.last_seq(), 0u);
}

TEST(ReplayTest, TornTailIsDropped) {
  TempDir dir("svc");
  const ServiceConfig cfg = config_in(dir, 0.0, 5);
  const std::string log = mixed_workload(cfg, 3, 80);
  std::string state;
  std::uint64_t seq = 0;
  {
    AnnotationService s(make_tasks(80, 4), cfg);
    state = s.snapshot();
    seq = s.last_seq();
  }
  {
    std::ofstream f(cfg.resolve(cfg.log_file), std::ios::app | std::ios::binary);
    f << R"({"seq":999,"ts":1.0,"kind":"resp)";
  }
  bool torn = false;
  const auto lines = ResponseLog::load(cfg.resolve(cfg.log_file), &torn);
  EXPECT_TRUE(torn);
  AnnotationService s(make_tasks(80, 4), cfg);
  EXPECT_EQ(s.snapshot(), state);
  EXPECT_EQ(read_file(cfg.resolve(cfg.log_file)), log);
  auto t = s.next_task("fresh");
  ASSERT_TRUE(t);
  EXPECT_EQ(s.last_seq(), seq + 1);
  EXPECT_EQ(ResponseLog::load(cfg.resolve(cfg.log_file)).size(), lines.size() + 1);
}

TEST(ReplayTest, CorruptMiddleLineIsFormatError) {
  TempDir dir("svc");
  const auto path = dir / "log.jsonl";
  write_file_atomic(path, "{\"seq\":1,\"ts\":0,\"kind\":\"serve\",\"task_id\":\"t000\",\"worker_id\":\"a\"}\nnot json\n");
  EXPECT_SNOW_ERROR(ResponseLog::load(path), ErrorKind::kFormat);
  write_file_atomic(path,
                    "{\"seq\":2,\"ts\":0,\"kind\":\"serve\",\"task_id\":\"t000\",\"worker_id\":\"a\"}\n"
                    "{\"seq\":2,\"ts\":0,\"kind\":\"serve\",\"task_id\":\"t001\",\"worker_id\":\"a\"}\n");
  EXPECT_SNOW_ERROR(ResponseLog::load(path), ErrorKind::kFormat);
}

TEST(ConfigTest, ParsesKeysAndComments) {
  const ServiceConfig cfg = parse_service_config(
      "# service\n"
      "data_dir = /srv/snow\n"
      "host = 0.0.0.0\n"
      "port = 9000   # inline\n"
      "gold_rate = 0.25\n"
      "seed = 42\n"
      "tasks_file = t.jsonl\n"
      "gold_min_tasks = 3\n"
      "\n");
  EXPECT_EQ(cfg.data_dir, "/srv/snow");
  EXPECT_EQ(cfg.host, "0.0.0.0");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_DOUBLE_EQ(cfg.gold_rate, 0.25);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.gold_policy.min_tasks, 3u);
  EXPECT_EQ(cfg.resolve(cfg.tasks_file), std::filesystem::path("/srv/snow/t.jsonl"));
  EXPECT_EQ(cfg.resolve("/abs/x"), std::filesystem::path("/abs/x"));
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_SNOW_ERROR(parse_service_config("colour = blue\n"), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(parse_service_config("gold_rate = 1.5\n"), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(parse_service_config("port = 70000\n"), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(parse_service_config("port = eighty\n"), ErrorKind::kValidation);
  EXPECT_SNOW_ERROR(parse_service_config("just a line\n"), ErrorKind::kValidation);
}

class HttpTest : public ::testing::Test {
 protected:
  void start(std::vector<AnnotationTask> tasks, double gold_rate = 0.0) {
    service_ = std::make_unique<AnnotationService>(std::move(tasks), config_in(dir_, gold_rate));
    frontend_ = std::make_unique<HttpFrontend>(*service_);
    port_ = frontend_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { frontend_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/api/consistency"); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    if (frontend_) frontend_->stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Result post(const WorkerResponse& r) {
    return client_->Post("/api/response", to_json(r).dump(), "application/json");
  }

  TempDir dir_{"http"};
  std::unique_ptr<AnnotationService> service_;
  std::unique_ptr<HttpFrontend> frontend_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, TaskEndpointHidesGold) {
  start(make_tasks(2, 1), 1.0);
  auto missing = client_->Get("/api/task");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 400);
  EXPECT_EQ(Json::parse(missing->body)["error"], "validation");

  auto res = client_->Get("/api/task?worker=a");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const Json body = Json::parse(res->body);
  EXPECT_FALSE(body.contains("gold"));
  EXPECT_FALSE(body.contains("kind"));
  EXPECT_EQ(body["focal_length_px"], 500.0);
  EXPECT_EQ(body["image_url"], "/api/image/" + body["image_id"].get<std::string>());
}

TEST_F(HttpTest, SubmitFlowAndStatusCodes) {
  start(make_tasks(1));
  EXPECT_EQ(client_->Get("/api/consistency")->status, 204);
  ASSERT_EQ(client_->Get("/api/task?worker=a")->status, 200);
  ASSERT_EQ(client_->Get("/api/task?worker=b")->status, 200);

  auto first = post(answer("t000", "a", tilted_normal(0, 0), "ra"));
  ASSERT_TRUE(first);
  EXPECT_EQ(first->status, 200);
  EXPECT_EQ(Json::parse(first->body)["status"], "pending");

  auto retry = post(answer("t000", "a", tilted_normal(0, 0), "ra"));
  EXPECT_EQ(retry->status, 409);
  EXPECT_EQ(Json::parse(retry->body)["already_recorded"], true);
  auto other = post(answer("t000", "a", tilted_normal(0, 0), "different"));
  EXPECT_EQ(other->status, 409);
  EXPECT_FALSE(Json::parse(other->body).contains("already_recorded"));

  auto bad = client_->Post("/api/response", "{\"task_id\":\"t000\"}", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(client_->Post("/api/response", "nope", "application/json")->status, 400);

  auto second = post(answer("t000", "b", tilted_normal(10, 0)));
  ASSERT_EQ(second->status, 200);
  const Json ack = Json::parse(second->body);
  EXPECT_EQ(ack["status"], "accepted");
  EXPECT_EQ(ack["aggregate"]["kind"], "aggregate");

  EXPECT_EQ(client_->Get("/api/task?worker=c")->status, 204);

  auto exported = client_->Get("/api/export");
  ASSERT_EQ(exported->status, 200);
  EXPECT_EQ(exported->get_header_value("Content-Type"), "application/x-ndjson");
  EXPECT_EQ(exported->body, service_->export_jsonl(ExportFilter{}));
  const std::string rejected = client_->Get("/api/export?status=rejected")->body;
  EXPECT_EQ(Json::parse(rejected)["kind"], "consistency");
  EXPECT_EQ(client_->Get("/api/export?status=bogus")->status, 400);
  EXPECT_EQ(client_->Get("/api/consistency")->status, 200);
}

TEST_F(HttpTest, ImagesAreServedFromImageDir) {
  std::filesystem::create_directories(dir_ / "images");
  write_file_atomic(dir_ / "images" / "img0.png", "PNGDATA");
  start(make_tasks(1));
  auto ok = client_->Get("/api/image/img0");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(ok->body, "PNGDATA");
  EXPECT_EQ(ok->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(client_->Get("/api/image/img9")->status, 404);
  EXPECT_NE(client_->Get("/api/image/..%2Fsecret")->status, 200);
}

}  // namespace
}  // namespace snow
