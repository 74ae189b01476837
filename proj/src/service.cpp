// Copyright 2026 The Relabel Authors. All Rights Reserved.
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

#include "relabel/service.hpp"

#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "relabel/error.hpp"
#include "relabel/io.hpp"

namespace relabel {

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kForbidden: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kDuplicate:
    case ErrorCode::kStageOrder:
    case ErrorCode::kNotReady: return 409;
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kDegenerate: return 422;
    case ErrorCode::kIo:
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

namespace {

struct Session {
  std::string annotator_id;  // empty for the admin session
  bool admin = false;
  std::chrono::steady_clock::time_point issued_at;
};

std::string NewToken() {
  static thread_local std::random_device device;
  std::string token;
  for (int i = 0; i < 2; ++i) {
    const std::uint64_t word =
        (static_cast<std::uint64_t>(device()) << 32) ^ device();
    token += HexDigest(word);
  }
  return token;
}

void SendJson(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, const Error& error) {
  Json body;
  body["code"] = ErrorCodeName(error.code());
  body["message"] = error.what();
  if (!error.field().empty()) body["field"] = error.field();
  SendJson(res, HttpStatusFor(error.code()), body);
}

Json ParseBody(const httplib::Request& req) {
  try {
    Json body = Json::parse(req.body);
    if (!body.is_object()) {
      throw Error(ErrorCode::kParse, "request body must be a JSON object");
    }
    return body;
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

struct ApiService::Impl {
  std::shared_ptr<Workspace> workspace;
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;
  std::mutex sessions_mutex;
  std::map<std::string, Session> sessions;

  Session Authenticate(const httplib::Request& req) {
    const std::string header = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) {
      throw Error(ErrorCode::kUnauthorized, "missing bearer token");
    }
    const std::string token = header.substr(prefix.size());
    std::lock_guard<std::mutex> lock(sessions_mutex);
    auto it = sessions.find(token);
    if (it == sessions.end()) throw Error(ErrorCode::kUnauthorized, "invalid token");
    if (std::chrono::steady_clock::now() - it->second.issued_at > options.token_ttl) {
      sessions.erase(it);
      throw Error(ErrorCode::kUnauthorized, "token expired");
    }
    return it->second;
  }

  Session RequireAnnotator(const httplib::Request& req) {
    Session session = Authenticate(req);
    if (session.admin) {
      throw Error(ErrorCode::kForbidden, "annotator endpoint");
    }
    return session;
  }

  Json Login(const Json& body) {
    Session session;
    session.issued_at = std::chrono::steady_clock::now();
    Json out;
    if (body.contains("admin_key")) {
      if (options.admin_key.empty() ||
          body.at("admin_key").get<std::string>() != options.admin_key) {
        throw Error(ErrorCode::kUnauthorized, "bad admin key", "admin_key");
      }
      session.admin = true;
      out["role"] = "admin";
    } else {
      const auto id = body.at("annotator_id").get<std::string>();
      const auto secret = body.value("secret", std::string());
      bool ok = false;
      for (const auto& entry : workspace->roster()) {
        if (entry.profile.annotator_id == id) {
          ok = !entry.secret.empty() && entry.secret == secret;
          out["experience_tier"] = ToString(entry.profile.tier);
        }
      }
      if (!ok) throw Error(ErrorCode::kUnauthorized, "unknown annotator or bad secret");
      session.annotator_id = id;
      out["role"] = "annotator";
      out["annotator_id"] = id;
    }
    const std::string token = NewToken();
    {
      std::lock_guard<std::mutex> lock(sessions_mutex);
      sessions[token] = session;
    }
    out["token"] = token;
    out["expires_in"] = options.token_ttl.count();
    return out;
  }

  Json Entry(const ClassEntry& entry, bool prechecked) {
    Json e;
    e["class_id"] = entry.class_id;
    e["name"] = entry.name;
    e["synonyms"] = entry.synonyms;
    e["exemplars"] = entry.exemplar_refs;
    e["prechecked"] = prechecked;
    return e;
  }

  std::optional<Json> NextTask(const std::string& annotator_id) {
    auto flow = workspace->workflow();
    auto task = flow->NextTask(annotator_id);
    if (!task) return std::nullopt;
    const ClassCatalog& catalog = workspace->catalog();
    const ImageRecord& image = workspace->registry().at(task->image_id);
    Json out;
    out["image_id"] = image.image_id;
    out["image_uri"] = image.uri;
    Json groups = Json::array();
    switch (task->kind) {
      case Task::Kind::kInitial: {
        out["stage"] = "initial";
        for (const auto& group : flow->setup().proposals.at(image.image_id).groups) {
          Json g = Json::array();
          for (ClassId id : group) g.push_back(Entry(catalog.at(id), false));
          groups.push_back(g);
        }
        break;
      }
      case Task::Kind::kRefinement: {
        out["stage"] = "refinement";
        const auto presentation = flow->BuildRefinementPresentation(image.image_id);
        for (const auto& group : presentation.proposals.groups) {
          Json g = Json::array();
          for (ClassId id : group) {
            g.push_back(Entry(catalog.at(id), presentation.prechecked.count(id) > 0));
          }
          groups.push_back(g);
        }
        break;
      }
      case Task::Kind::kTriage: {
        out["stage"] = "triage";
        Json original;
        original["class_id"] = image.original_label;
        original["name"] = catalog.at(image.original_label).name;
        out["original_label"] = original;
        break;
      }
    }
    out["groups"] = groups;
    out["progress"] = {{"done", task->done}, {"total", task->total}};
    return out;
  }

  Json PostAnnotation(const std::string& annotator_id, const Json& body) {
    auto flow = workspace->workflow();
    const Phase phase = flow->phase();
    AnnotationStage stage = phase == Phase::kRefinement ? AnnotationStage::kRefinement
                                                        : AnnotationStage::kInitial;
    if (body.contains("stage")) {
      const AnnotationStage requested =
          ParseAnnotationStage(body.at("stage").get<std::string>());
      if (requested != stage || (phase != Phase::kInitial && phase != Phase::kRefinement)) {
        throw Error(ErrorCode::kStageOrder,
                    "submission for a stale stage (workflow is in " +
                        std::string(ToString(phase)) + ")",
                    "stage");
      }
    }
    LabelSet labels;
    const auto& array = body.at("labels");
    if (!array.is_array()) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be an array", "labels");
    }
    for (const auto& id : array) {
      if (!id.is_number_integer()) {
        throw Error(ErrorCode::kInvalidArgument, "labels must be class ids", "labels");
      }
      labels.insert(id.get<ClassId>());
    }
    std::optional<std::string> comment;
    if (auto c = body.find("comment"); c != body.end() && !c->is_null()) {
      comment = c->get<std::string>();
    }
    const SubmitResult result =
        flow->Submit(annotator_id, body.at("image_id").get<std::string>(), stage,
                     std::move(labels), std::move(comment));
    Json out;
    out["revision"] = result.revision;
    out["duplicate"] = result.duplicate;
    return out;
  }

  Json PostTriage(const std::string& annotator_id, const Json& body) {
    TriageRecord record;
    record.image_id = body.at("image_id").get<std::string>();
    record.annotator_id = annotator_id;
    record.quality_category =
        ParseQualityCategory(body.at("quality_category").get<std::string>());
    record.gt_stance = ParseGroundTruthStance(body.at("gt_stance").get<std::string>());
    workspace->workflow()->RecordTriage(record);
    Json out;
    out["image_id"] = record.image_id;
    out["quality_category"] = ToString(record.quality_category);
    out["gt_stance"] = ToString(record.gt_stance);
    return out;
  }

  Json AdminStage(const Json& body) {
    const Phase target = ParsePhase(body.at("stage").get<std::string>());
    Json out;
    switch (target) {
      case Phase::kAnalysis:
        out["result"] = workspace->AnalyzeAgreement();
        break;
      case Phase::kRefinement:
        out["result"] = workspace->AssignRefinement(
            body.value("experienced", std::vector<std::string>{}));
        break;
      case Phase::kFinal:
        out["result"] = workspace->Finalize();
        break;
      case Phase::kInitial:
        throw Error(ErrorCode::kStageOrder, "the initial stage cannot be re-entered",
                    "stage");
    }
    out["stage"] = ToString(workspace->workflow()->phase());
    return out;
  }

  // Wraps a handler so library errors become {code, message, field}.
  template <typename Fn>
  httplib::Server::Handler Guard(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        SendError(res, e);
      } catch (const Json::exception& e) {
        SendError(res, Error(ErrorCode::kInvalidArgument,
                             std::string("bad request: ") + e.what()));
      } catch (const std::exception& e) {
        SendError(res, Error(ErrorCode::kInternal, e.what()));
      }
    };
  }

  void Routes() {
    server.Post("/api/login", Guard([this](const auto& req, auto& res) {
                  SendJson(res, 200, Login(ParseBody(req)));
                }));
    server.Get("/api/tasks/next", Guard([this](const auto& req, auto& res) {
                 const Session session = RequireAnnotator(req);
                 auto task = NextTask(session.annotator_id);
                 if (!task) {
                   res.status = 204;
                   return;
                 }
                 SendJson(res, 200, *task);
               }));
    server.Post("/api/annotations", Guard([this](const auto& req, auto& res) {
                  const Session session = RequireAnnotator(req);
                  SendJson(res, 200, PostAnnotation(session.annotator_id, ParseBody(req)));
                }));
    server.Get(R"(/api/labels/(-?\d+)/exemplars)",
               Guard([this](const auto& req, auto& res) {
                 Authenticate(req);
                 const ClassId id = static_cast<ClassId>(std::stol(req.matches[1]));
                 SendJson(res, 200, Entry(workspace->catalog().at(id), false));
               }));
    server.Post("/api/triage", Guard([this](const auto& req, auto& res) {
                  const Session session = RequireAnnotator(req);
                  SendJson(res, 200, PostTriage(session.annotator_id, ParseBody(req)));
                }));
    server.Get(R"(/api/reports/([A-Za-z0-9_]+))",
               Guard([this](const auto& req, auto& res) {
                 Authenticate(req);
                 const auto doc = workspace->ReadReport(
                     req.matches[1], req.get_param_value("model"));
                 res.status = 200;
                 res.set_content(doc.body, doc.content_type);
               }));
    server.Post("/api/admin/stage", Guard([this](const auto& req, auto& res) {
                  const Session session = Authenticate(req);
                  if (!session.admin) {
                    throw Error(ErrorCode::kForbidden, "stage changes need the admin role");
                  }
                  SendJson(res, 200, AdminStage(ParseBody(req)));
                }));
    server.Get("/api/progress", Guard([this](const auto& req, auto& res) {
                 const Session session = Authenticate(req);
                 auto flow = workspace->workflow();
                 Json out;
                 out["stage"] = ToString(flow->phase());
                 if (session.admin) {
                   out["submissions"] = flow->records().size();
                 } else {
                   const Progress progress = flow->ProgressFor(session.annotator_id);
                   out["done"] = progress.done;
                   out["total"] = progress.total;
                 }
                 SendJson(res, 200, out);
               }));
  }
};

ApiService::ApiService(std::shared_ptr<Workspace> workspace, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->workspace = std::move(workspace);
  impl_->options = std::move(options);
  // Fail early if the workspace cannot serve annotation yet.
  impl_->workspace->workflow();
  impl_->Routes();
}

ApiService::~ApiService() { Stop(); }

int ApiService::Start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ApiService::Run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ApiService::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace relabel
