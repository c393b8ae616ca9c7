// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ftmp/checkpoint.hpp"
#include "ftmp/study.hpp"

namespace ftmp {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string checkpoint;
  std::string diagnostic_set;
  std::string annotation_log;
  // Known annotator ids; empty accepts any nonempty id.
  std::vector<std::string> annotators;
  std::string static_dir;
};

ServiceConfig service_config_from_json(const std::string& text);
ServiceConfig load_service_config(const std::filesystem::path& path);

// Append-only JSONL store of annotation records. Every append is written
// with a single write() and fsync'd before it returns. A torn last line
// (crash mid-write) is dropped on open.
class AnnotationLog {
 public:
  enum class Append { Ok, Duplicate };

  explicit AnnotationLog(std::filesystem::path path);
  ~AnnotationLog();
  AnnotationLog(const AnnotationLog&) = delete;
  AnnotationLog& operator=(const AnnotationLog&) = delete;

  Append append(const AnnotationRecord& record);

  std::vector<AnnotationRecord> records() const;
  std::vector<AnnotationRecord> records_for(const std::string& annotator) const;
  bool contains(const std::string& annotator, const std::string& example_id) const;
  std::size_t count(const std::string& annotator) const;
  // Annotators in order of first appearance.
  std::vector<std::string> annotators() const;
  // Bytes discarded from a torn tail when the log was opened.
  std::size_t recovered_bytes() const { return recovered_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::vector<AnnotationRecord> records_;
  std::set<std::pair<std::string, std::string>> keys_;
  std::size_t recovered_ = 0;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

// The request handlers are plain functions of the request body so they
// can be tested without a socket; serve() wires them to HTTP.
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();

  HttpResponse predict(const std::string& body) const;
  HttpResponse diagnostic_next(const std::string& annotator) const;
  HttpResponse annotate(const std::string& body);
  HttpResponse report() const;

  bool has_model() const { return ckpt_.has_value(); }
  const std::string& model_version() const { return version_; }

  // Binds and blocks until stop(). on_bound receives the actual port.
  void serve(const std::function<void(int)>& on_bound = {});
  void stop();

 private:
  std::vector<TalkMove> diagnostic_predictions() const;

  ServiceConfig cfg_;
  std::optional<Checkpoint> ckpt_;
  std::string version_;
  std::optional<DiagnosticSet> diag_;
  std::unique_ptr<AnnotationLog> log_;
  mutable std::once_flag preds_once_;
  mutable std::vector<TalkMove> preds_;
  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace ftmp
