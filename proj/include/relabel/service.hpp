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

#ifndef RELABEL_SERVICE_HPP_
#define RELABEL_SERVICE_HPP_

#include <chrono>
#include <memory>
#include <string>

#include "relabel/workspace.hpp"

namespace relabel {

struct ServiceOptions {
  // Secret for POST /api/login {"admin_key": ...}; empty disables admin login.
  std::string admin_key;
  std::chrono::seconds token_ttl{std::chrono::hours(12)};
};

// HTTP status for an error category.
int HttpStatusFor(ErrorCode code);

// JSON endpoints under /api for the annotator UI and operators:
//
//   POST /api/login                     {annotator_id, secret} | {admin_key}
//   GET  /api/tasks/next                204 when the annotator has no task
//   POST /api/annotations               {image_id, labels, comment?, stage?}
//   GET  /api/labels/{class_id}/exemplars
//   POST /api/triage                    {image_id, quality_category, gt_stance}
//   GET  /api/reports/{kind}            ?model= filters heatmap rows
//   POST /api/admin/stage               {stage, experienced?}
//   GET  /api/progress
//
// Requests other than login carry "Authorization: Bearer <token>". Errors
// are {code, message, field?}.
class ApiService {
 public:
  ApiService(std::shared_ptr<Workspace> workspace, ServiceOptions options);
  ~ApiService();

  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  // Binds (port 0 picks a free port), serves on a background thread and
  // returns the bound port.
  int Start(const std::string& host, int port);
  // Binds and serves on the calling thread until Stop().
  void Run(const std::string& host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relabel

#endif  // RELABEL_SERVICE_HPP_
