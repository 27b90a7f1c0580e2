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

// Eigen must come before httplib: glibc's <resolv.h> defines a `_res` macro
// that collides with Eigen parameter names.
#include "snow/service.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

#include "snow/error.hpp"

namespace snow {

namespace fs = std::filesystem;

namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kIo: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  Json body;
  body["error"] = kind;
  body["message"] = message;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

bool safe_image_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

const char* content_type_for(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

// Image files are looked up as <image_dir>/<id> or <image_dir>/<id>.<ext>.
std::optional<fs::path> find_image(const fs::path& dir, const std::string& id) {
  std::error_code ec;
  if (fs::is_regular_file(dir / id, ec)) return dir / id;
  for (const char* ext : {".jpg", ".jpeg", ".png", ".gif", ".webp"}) {
    fs::path p = dir / (id + ext);
    if (fs::is_regular_file(p, ec)) return p;
  }
  return std::nullopt;
}

}  // namespace

struct HttpFrontend::Impl {
  AnnotationService& service;
  httplib::Server server;

  explicit Impl(AnnotationService& s) : service(s) { routes(); }

  void routes() {
    server.Get("/api/task", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string worker = req.get_param_value("worker");
      if (worker.empty()) return send_error(res, 400, "validation", "missing worker parameter");
      try {
        auto task = service.next_task(worker);
        if (!task) {
          res.status = 204;
          return;
        }
        Json body = to_json(*task, /*include_gold=*/false);
        body.erase("kind");
        body["image_url"] = "/api/image/" + task->image_id;
        res.set_content(body.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, http_status(e.kind()), error_kind_name(e.kind()), e.what());
      }
    });

    server.Post("/api/response", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        Json body;
        try {
          body = Json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
          fail(ErrorKind::kValidation, "request body is not valid JSON");
        }
        WorkerResponse r;
        try {
          r = response_from_json(body);
        } catch (const Error& e) {
          fail(ErrorKind::kValidation, e.what());
        }
        SubmitAck ack;
        try {
          ack = service.submit_response(r);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kConflict || r.response_id.empty()) throw;
          // A retry of a response that already landed: still a conflict, but
          // the client can tell its earlier attempt was recorded.
          const auto earlier = service.recorded_response(r.task_id, r.worker_id);
          if (!earlier || earlier->response_id != r.response_id) throw;
          Json out;
          out["error"] = error_kind_name(e.kind());
          out["message"] = e.what();
          out["already_recorded"] = true;
          res.status = 409;
          res.set_content(out.dump(), "application/json");
          return;
        }
        Json out;
        out["ok"] = true;
        out["seq"] = ack.seq;
        out["status"] = aggregate_status_name(ack.status);
        if (ack.aggregate) out["aggregate"] = to_json(*ack.aggregate);
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, http_status(e.kind()), error_kind_name(e.kind()), e.what());
      }
    });

    server.Get(R"(/api/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!safe_image_id(id)) return send_error(res, 400, "validation", "bad image id");
      const auto path = find_image(service.config().resolve(service.config().image_dir), id);
      if (!path) return send_error(res, 404, "not_found", "no image " + id);
      try {
        res.set_content(read_file(*path), content_type_for(*path));
      } catch (const Error& e) {
        send_error(res, 500, error_kind_name(e.kind()), e.what());
      }
    });

    server.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
      ExportFilter filter;
      const std::string status = req.get_param_value("status");
      try {
        if (status == "all")
          filter.status.reset();
        else if (!status.empty())
          filter.status = parse_aggregate_status(status);
      } catch (const Error& e) {
        return send_error(res, 400, "validation", e.what());
      }
      filter.exclude_spammers = req.get_param_value("exclude_spammers") == "1";
      res.set_content(service.export_jsonl(filter), "application/x-ndjson");
    });

    server.Get("/api/consistency", [this](const httplib::Request&, httplib::Response& res) {
      auto report = service.consistency();
      if (!report) {
        res.status = 204;
        return;
      }
      Json body = to_json(*report);
      body.erase("kind");
      res.set_content(body.dump(), "application/json");
    });

    const fs::path ui = service.config().resolve(service.config().ui_dir);
    if (!ui.empty() && fs::is_directory(ui)) server.set_mount_point("/", ui.string());
  }
};

HttpFrontend::HttpFrontend(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorKind::kIo, "cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorKind::kIo, "cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void HttpFrontend::serve() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace snow
