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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snow/annotations.hpp"
#include "snow/error.hpp"
#include "snow/formats.hpp"
#include "snow/geometry.hpp"
#include "snow/losses.hpp"
#include "snow/metrics.hpp"
#include "snow/optimizer.hpp"
#include "snow/service.hpp"

namespace snow {
namespace {

namespace fs = std::filesystem;

// Relative paths are taken relative to the data root ($SNOW_DATA_DIR or ".").
fs::path data_path(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  return default_data_dir() / path;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegenerateGeometry:
    case ErrorKind::kBehindCamera:
      return kExitDegenerateGeometry;
    case ErrorKind::kDivergence:
      return kExitFailure;
    default:
      return kExitValidation;
  }
}

CameraIntrinsics intrinsics_for(int width, int height, double f, std::optional<double> cx,
                                std::optional<double> cy) {
  CameraIntrinsics k = CameraIntrinsics::centered(f, width, height);
  if (cx) k.cx = *cx;
  if (cy) k.cy = *cy;
  k.validate();
  return k;
}

// Focal length used when --f is not given: the image width in pixels.
double default_focal(const DepthMap& z, const std::optional<double>& f) {
  return f ? *f : static_cast<double>(z.width());
}

void emit(std::ostream& out, const std::optional<std::string>& path, const std::string& text) {
  if (path)
    write_file_atomic(data_path(*path), text);
  else
    out << text;
}

template <typename T>
std::vector<T> records_of(const std::vector<AnnotationRecord>& records) {
  std::vector<T> out;
  for (const AnnotationRecord& r : records)
    if (const T* v = std::get_if<T>(&r.value)) out.push_back(*v);
  return out;
}

Json metric_json(const MetricReport& m) {
  Json j;
  j["rmse"] = m.rmse;
  j["log_rmse"] = m.log_rmse;
  j["silog_rmse"] = m.silog_rmse;
  j["absrel"] = m.absrel;
  j["sqrrel"] = m.sqrrel;
  j["ls_rmse"] = m.ls_rmse;
  j["ls_scale"] = m.alignment.a;
  j["ls_shift"] = m.alignment.b;
  return j;
}

Json ordinal_json(const OrdinalReport& r) {
  Json j;
  j["delta"] = r.threshold;
  j["wkdr"] = r.wkdr;
  j["wkdr_eq"] = r.wkdr_eq;
  j["wkdr_neq"] = r.wkdr_neq;
  j["pairs"] = r.pairs;
  j["eq_pairs"] = r.eq_pairs;
  j["neq_pairs"] = r.neq_pairs;
  return j;
}

Json normal_report_json(const NormalErrorReport& r) {
  Json j;
  j["mean_deg"] = r.mean_deg;
  j["median_deg"] = r.median_deg;
  j["within_11.25"] = r.pct_within[0];
  j["within_22.5"] = r.pct_within[1];
  j["within_30"] = r.pct_within[2];
  j["count"] = r.count;
  return j;
}

OrdinalLossKind parse_ordinal_loss_kind(const std::string& name) {
  if (name == "margin") return OrdinalLossKind::kMargin;
  if (name == "legacy") return OrdinalLossKind::kLegacy;
  fail(ErrorKind::kValidation, "unknown ordinal loss '" + name + "'");
}

std::atomic<HttpFrontend*> g_frontend{nullptr};

extern "C" void stop_on_signal(int) {
  if (HttpFrontend* f = g_frontend.load()) f->stop();
}

struct DeriveNormalsArgs {
  std::string depth, out;
  double f = 0;
  std::optional<double> cx, cy;
};

int derive_normals_cmd(const DeriveNormalsArgs& a, std::ostream& out) {
  const DepthMap z = read_depth_map(data_path(a.depth));
  const CameraIntrinsics k = intrinsics_for(z.width(), z.height(), a.f, a.cx, a.cy);
  const NormalMap n = derive_normals(z, k);
  write_normal_map(data_path(a.out), n);
  Json j;
  j["width"] = n.width();
  j["height"] = n.height();
  j["defined"] = n.defined_count();
  out << j.dump(2) << '\n';
  return kExitOk;
}

struct EvalDepthArgs {
  std::string pred, gt;
  std::vector<double> normalize;
  std::optional<std::string> wkdr_pairs;
  std::vector<double> delta_grid;
};

int eval_depth_cmd(const EvalDepthArgs& a, std::ostream& out) {
  DepthMap pred = read_depth_map(data_path(a.pred));
  const DepthMap gt = read_depth_map(data_path(a.gt));
  if (!a.normalize.empty()) {
    if (a.normalize.size() != 2) fail(ErrorKind::kValidation, "--normalize takes mean,std");
    pred = normalize_to_stats(pred, a.normalize[0], a.normalize[1]);
  }
  Json j = metric_json(metric_suite(pred, gt));
  if (a.wkdr_pairs) {
    const auto pairs = records_of<RelativeDepthAnnotation>(read_jsonl(data_path(*a.wkdr_pairs)));
    std::vector<double> grid = a.delta_grid;
    if (grid.empty()) grid.push_back(std::log(1.02));
    j["ordinal"] = ordinal_json(wkdr_sweep(pred, pairs, grid).report);
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

struct EvalNormalsArgs {
  std::optional<std::string> pred, pred_depth, gt, gt_depth, annotations;
  std::optional<double> f;
};

NormalMap normals_from(const std::optional<std::string>& nmap, const std::optional<std::string>& dmap,
                       const std::optional<double>& f, const char* what) {
  if (nmap && dmap) fail(ErrorKind::kValidation, std::string("give either a normal map or a depth map for ") + what);
  if (nmap) return read_normal_map(data_path(*nmap));
  if (!dmap) fail(ErrorKind::kValidation, std::string("missing input for ") + what);
  const DepthMap z = read_depth_map(data_path(*dmap));
  return derive_normals(z, intrinsics_for(z.width(), z.height(), default_focal(z, f), {}, {}));
}

int eval_normals_cmd(const EvalNormalsArgs& a, std::ostream& out) {
  NormalErrorReport report;
  if (a.annotations) {
    if (a.gt || a.gt_depth) fail(ErrorKind::kValidation, "--annotations replaces --gt/--gt-depth");
    if (!a.pred_depth) fail(ErrorKind::kValidation, "--annotations needs --pred-depth");
    const DepthMap z = read_depth_map(data_path(*a.pred_depth));
    const CameraIntrinsics k = intrinsics_for(z.width(), z.height(), default_focal(z, a.f), {}, {});
    const auto normals = records_of<NormalAnnotation>(read_jsonl(data_path(*a.annotations)));
    std::map<int, NormalMap> per_level;
    std::vector<Vec3> pred, gt;
    for (const NormalAnnotation& n : normals) {
      auto it = per_level.find(n.scale_level);
      if (it == per_level.end()) {
        const Downsampled d = downsample(z, k, 1 << n.scale_level);
        it = per_level.emplace(n.scale_level, derive_normals(d.depth, d.intrinsics)).first;
      }
      validate_annotation(n, z.width(), z.height());
      const auto& p = it->second.at(n.p.x, n.p.y);
      if (!p) fail(ErrorKind::kDegenerateGeometry, "no normal at an annotated pixel");
      pred.push_back(*p);
      gt.push_back(n.n);
    }
    report = normal_error_stats(pred, gt);
  } else {
    const NormalMap pred = normals_from(a.pred, a.pred_depth, a.f, "the prediction");
    const NormalMap gt = normals_from(a.gt, a.gt_depth, a.f, "the ground truth");
    report = normal_error_stats(pred, gt);
  }
  out << normal_report_json(report).dump(2) << '\n';
  return kExitOk;
}

struct GenAnnotationsArgs {
  std::string gt;
  std::optional<double> f;
  int normals = 0;
  std::vector<int> scales{1};
  int pairs = 0;
  double ratio = 1.02;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

int gen_annotations_cmd(const GenAnnotationsArgs& a, std::ostream& out) {
  if (a.normals < 0 || a.pairs < 0) fail(ErrorKind::kValidation, "counts must be non-negative");
  if (a.normals == 0 && a.pairs == 0) fail(ErrorKind::kValidation, "nothing to generate");
  const DepthMap z = read_depth_map(data_path(a.gt));
  const CameraIntrinsics k = intrinsics_for(z.width(), z.height(), default_focal(z, a.f), {}, {});
  std::vector<AnnotationRecord> records;
  if (a.normals > 0)
    for (const NormalAnnotation& n : generate_normal_annotations(z, k, a.normals, a.scales, a.seed))
      records.push_back({n, Json::object()});
  // Independent stream so adding pairs never changes the normal samples.
  if (a.pairs > 0)
    for (const RelativeDepthAnnotation& p : generate_ordinal_pairs(z, a.ratio, a.pairs, a.seed + 1))
      records.push_back({p, Json::object()});
  emit(out, a.out, format_jsonl(records));
  return kExitOk;
}

struct AggregateArgs {
  std::string responses;
  double threshold = kAgreementThresholdDeg;
  std::optional<std::string> out;
};

int aggregate_cmd(const AggregateArgs& a, std::ostream& out) {
  const auto responses = records_of<WorkerResponse>(read_jsonl(data_path(a.responses)));
  std::map<std::string, std::vector<WorkerResponse>> by_task;
  for (const WorkerResponse& r : responses) {
    validate_response(r);
    auto& group = by_task[r.task_id];
    if (group.size() == 2) fail(ErrorKind::kValidation, "task '" + r.task_id + "' has more than two responses");
    group.push_back(r);
  }
  std::string text;
  for (const auto& [task_id, group] : by_task) {
    AggregateResult result;
    result.task_id = task_id;
    if (group.size() == 2) result = aggregate_pair(group[0], group[1], a.threshold);
    text += to_json(result).dump() + '\n';
  }
  emit(out, a.out, text);
  return kExitOk;
}

struct ConsistencyArgs {
  std::string responses;
  std::optional<std::string> tasks;
};

int consistency_cmd(const ConsistencyArgs& a, std::ostream& out) {
  const auto responses = records_of<WorkerResponse>(read_jsonl(data_path(a.responses)));
  std::map<std::string, ConsistencyGroup> groups;
  for (const WorkerResponse& r : responses) {
    validate_response(r);
    if (r.hard_to_tell()) continue;
    ConsistencyGroup& g = groups[r.task_id];
    g.task_id = r.task_id;
    g.responses.push_back(*r.normal);
  }
  if (a.tasks) {
    for (const AnnotationTask& t : records_of<AnnotationTask>(read_jsonl(data_path(*a.tasks)))) {
      auto it = groups.find(t.task_id);
      if (it != groups.end() && t.gold) it->second.reference = t.gold;
    }
  }
  std::vector<ConsistencyGroup> usable;
  for (auto& [id, g] : groups)
    if (g.responses.size() >= 2) usable.push_back(g);
  if (usable.empty()) fail(ErrorKind::kValidation, "no task has two usable responses");
  out << to_json(consistency_stats(usable)).dump(2) << '\n';
  return kExitOk;
}

struct OptimizeArgs {
  std::string annotations, out;
  std::optional<std::string> like, trace;
  int width = 0, height = 0;
  std::optional<double> f, cx, cy;
  std::string loss = "angle";
  std::string ordinal_loss = "margin";
  double lambda = 1.0;
  double tau = std::log(1.02);
  std::vector<int> scales;
  int max_iters = 20000;
  double step = 0.05;
  double stop_tol = 1e-7;
  bool compare_center = false;
};

int optimize_cmd(const OptimizeArgs& a, std::ostream& out) {
  int width = a.width, height = a.height;
  if (a.like) {
    const DepthMap like = read_depth_map(data_path(*a.like));
    width = like.width();
    height = like.height();
  }
  if (width < 3 || height < 3) fail(ErrorKind::kValidation, "give --width/--height (at least 3) or --like");
  const auto records = read_jsonl(data_path(a.annotations));

  OptimizeJob job;
  job.width = width;
  job.height = height;
  job.intrinsics = intrinsics_for(width, height, a.f ? *a.f : width, a.cx, a.cy);
  job.ordinal = records_of<RelativeDepthAnnotation>(records);
  job.normals = records_of<NormalAnnotation>(records);
  job.cfg.lambda = a.lambda;
  job.cfg.tau = a.tau;
  job.cfg.normal_loss_kind = parse_normal_loss_kind(a.loss);
  job.cfg.ordinal_loss_kind = parse_ordinal_loss_kind(a.ordinal_loss);
  job.cfg.depth_loss_compares_center = a.compare_center;
  if (!a.scales.empty()) {
    job.cfg.scales = a.scales;
  } else {
    int top = 0;
    for (const NormalAnnotation& n : job.normals) top = std::max(top, n.scale_level);
    job.cfg.scales.clear();
    for (int l = 0; l <= top; ++l) job.cfg.scales.push_back(1 << l);
  }
  job.max_iters = a.max_iters;
  job.step = a.step;
  job.stop_tol = a.stop_tol;

  const OptimizeOutcome result = optimize_depth(job);
  write_depth_map(data_path(a.out), result.depth);

  Json summary;
  summary["iterations"] = result.trace.iterations_run;
  summary["best_iteration"] = result.trace.best_iteration;
  summary["best_loss"] = result.trace.best_loss;
  summary["final_gradient_norm"] = result.trace.final_gradient_norm;
  summary["converged"] = result.trace.converged;
  if (a.trace) {
    Json t = summary;
    t["losses"] = result.trace.losses;
    write_file_atomic(data_path(*a.trace), t.dump() + '\n');
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct ServeArgs {
  std::optional<std::string> config, data_dir, host;
  std::optional<int> port;
};

int serve_cmd(const ServeArgs& a, std::ostream& err) {
  ServiceConfig config;
  if (a.config) config = load_service_config(data_path(*a.config));
  if (a.data_dir) config.data_dir = *a.data_dir;
  if (a.host) config.host = *a.host;
  if (a.port) config.port = *a.port;
  AnnotationService service(config);
  HttpFrontend frontend(service);
  const int port = frontend.bind(config.host, config.port);
  err << "listening on " << config.host << ':' << port << std::endl;
  g_frontend.store(&frontend);
  std::signal(SIGINT, stop_on_signal);
  std::signal(SIGTERM, stop_on_signal);
  frontend.serve();
  g_frontend.store(nullptr);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth estimation from surface normal and relative depth annotations"};
  app.require_subcommand(1);

  DeriveNormalsArgs dn;
  auto* derive = app.add_subcommand("derive-normals", "Derive a normal map from a depth map");
  derive->add_option("--depth", dn.depth, "Input DMAP1 file")->required();
  derive->add_option("--f", dn.f, "Focal length in pixels")->required();
  derive->add_option("--cx", dn.cx, "Principal point x (default: image center)");
  derive->add_option("--cy", dn.cy, "Principal point y (default: image center)");
  derive->add_option("--out", dn.out, "Output NMAP1 file")->required();

  EvalDepthArgs ed;
  auto* eval_depth = app.add_subcommand("eval-depth", "Metric and ordinal depth errors");
  eval_depth->add_option("--pred", ed.pred, "Predicted DMAP1")->required();
  eval_depth->add_option("--gt", ed.gt, "Ground-truth DMAP1")->required();
  eval_depth->add_option("--normalize", ed.normalize, "Rescale prediction to mean,std first")->delimiter(',');
  auto* pairs_opt = eval_depth->add_option("--wkdr-pairs", ed.wkdr_pairs, "JSONL with ordinal records");
  eval_depth->add_option("--delta-grid", ed.delta_grid, "Log-ratio thresholds to sweep")
      ->delimiter(',')
      ->needs(pairs_opt);

  EvalNormalsArgs en;
  auto* eval_normals = app.add_subcommand("eval-normals", "Angular error between normal fields");
  eval_normals->add_option("--pred", en.pred, "Predicted NMAP1");
  eval_normals->add_option("--pred-depth", en.pred_depth, "Predicted DMAP1 (normals are derived)");
  eval_normals->add_option("--gt", en.gt, "Ground-truth NMAP1");
  eval_normals->add_option("--gt-depth", en.gt_depth, "Ground-truth DMAP1 (normals are derived)");
  eval_normals->add_option("--annotations", en.annotations, "JSONL normal records used as ground truth");
  eval_normals->add_option("--f", en.f, "Focal length for derived normals (default: width)");

  GenAnnotationsArgs ga;
  auto* gen = app.add_subcommand("gen-annotations", "Sample annotations from a ground-truth depth map");
  gen->add_option("--gt", ga.gt, "Ground-truth DMAP1")->required();
  gen->add_option("--f", ga.f, "Focal length in pixels (default: width)");
  gen->add_option("--normals", ga.normals, "Number of normal annotations");
  gen->add_option("--scales", ga.scales, "Downsampling factors, starting with 1")->delimiter(',');
  gen->add_option("--pairs", ga.pairs, "Number of ordinal pairs");
  gen->add_option("--ratio", ga.ratio, "Depth ratio at or below which a pair is '='");
  gen->add_option("--seed", ga.seed, "Random seed");
  gen->add_option("--out", ga.out, "Output JSONL (default: stdout)");

  AggregateArgs ag;
  auto* aggregate = app.add_subcommand("aggregate", "Combine paired worker responses");
  aggregate->add_option("--responses", ag.responses, "JSONL with response records")->required();
  aggregate->add_option("--threshold", ag.threshold, "Agreement threshold in degrees");
  aggregate->add_option("--out", ag.out, "Output JSONL (default: stdout)");

  ConsistencyArgs cs;
  auto* consistency = app.add_subcommand("consistency", "Human-human and human-reference disagreement");
  consistency->add_option("--responses", cs.responses, "JSONL with response records")->required();
  consistency->add_option("--tasks", cs.tasks, "JSONL with task records; gold normals become references");

  OptimizeArgs op;
  auto* optimize = app.add_subcommand("optimize", "Fit a depth map to annotations");
  optimize->add_option("--annotations", op.annotations, "JSONL with normal and ordinal records")->required();
  optimize->add_option("--out", op.out, "Output DMAP1")->required();
  optimize->add_option("--like", op.like, "Take width and height from this DMAP1");
  optimize->add_option("--width", op.width, "Output width");
  optimize->add_option("--height", op.height, "Output height");
  optimize->add_option("--f", op.f, "Focal length in pixels (default: width)");
  optimize->add_option("--cx", op.cx, "Principal point x");
  optimize->add_option("--cy", op.cy, "Principal point y");
  optimize->add_option("--loss", op.loss, "Normal loss: angle or depth");
  optimize->add_option("--ordinal-loss", op.ordinal_loss, "Ordinal loss: margin or legacy");
  optimize->add_option("--lambda", op.lambda, "Weight of the normal term");
  optimize->add_option("--tau", op.tau, "Ordinal margin on log depth");
  optimize->add_option("--scales", op.scales, "Pyramid factors (default: from annotations)")->delimiter(',');
  optimize->add_option("--max-iters", op.max_iters, "Iteration cap");
  optimize->add_option("--step", op.step, "Step size");
  optimize->add_option("--stop-tol", op.stop_tol, "Relative improvement stop threshold");
  optimize->add_flag("--compare-center", op.compare_center, "Depth loss compares against the center pixel");
  optimize->add_option("--trace", op.trace, "Write the loss trace as JSON");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--config", sv.config, "Key-value configuration file");
  serve->add_option("--data-dir", sv.data_dir, "Data root (default: $SNOW_DATA_DIR or .)");
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--port", sv.port, "Port (0 picks a free port)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*derive) return derive_normals_cmd(dn, out);
    if (*eval_depth) return eval_depth_cmd(ed, out);
    if (*eval_normals) return eval_normals_cmd(en, out);
    if (*gen) return gen_annotations_cmd(ga, out);
    if (*aggregate) return aggregate_cmd(ag, out);
    if (*consistency) return consistency_cmd(cs, out);
    if (*optimize) return optimize_cmd(op, out);
    if (*serve) return serve_cmd(sv, err);
  } catch (const Error& e) {
    err << "error (" << error_kind_name(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace snow
