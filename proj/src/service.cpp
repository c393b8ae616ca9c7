// SPDX-License-Identifier: Apache-2.0
#include "ftmp/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ftmp/error.hpp"
#include "ftmp/model3e.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

namespace {

std::string error_body(const std::string& message) { return json{{"error", message}}.dump(); }

HttpResponse fail(int status, const std::string& message) { return {status, error_body(message)}; }

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

}  // namespace

ServiceConfig service_config_from_json(const std::string& text) {
  ServiceConfig cfg;
  try {
    const json j = json::parse(text);
    if (j.contains("listen")) {
      // "host:port"
      const auto listen = j["listen"].get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw ValidationError("listen must be host:port");
      cfg.host = listen.substr(0, colon);
      cfg.port = std::stoi(listen.substr(colon + 1));
    }
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.checkpoint = j.value("checkpoint", std::string());
    cfg.diagnostic_set = j.value("diagnostic_set", std::string());
    cfg.annotation_log = j.value("annotation_log", std::string());
    cfg.annotators = j.value("annotators", std::vector<std::string>{});
    cfg.static_dir = j.value("static_dir", std::string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("service config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("service config: bad port");
  }
  if (cfg.port < 0 || cfg.port > 65535) throw ValidationError("service config: port out of range");
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return service_config_from_json(ss.str());
}

AnnotationLog::AnnotationLog(std::filesystem::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(sys_error("cannot open annotation log " + path_.string()));

  std::string data;
  {
    std::ifstream in(path_, std::ios::binary);
    data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  // Everything after the last newline is a torn write.
  const auto last_nl = data.rfind('\n');
  const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (complete < data.size()) {
    recovered_ = data.size() - complete;
    if (::ftruncate(fd_, static_cast<off_t>(complete)) != 0 || ::fsync(fd_) != 0)
      throw Error(sys_error("cannot truncate torn tail of " + path_.string()));
  }
  std::size_t pos = 0, lineno = 0;
  while (pos < complete) {
    const auto nl = data.find('\n', pos);
    const auto line = data.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.empty()) continue;
    AnnotationRecord r;
    try {
      r = annotation_from_json(line);
    } catch (const Error& e) {
      throw ParseError(path_.string() + ": " + e.what(), lineno);
    }
    if (keys_.emplace(r.annotator_id, r.example_id).second) records_.push_back(std::move(r));
  }
}

AnnotationLog::~AnnotationLog() {
  if (fd_ >= 0) ::close(fd_);
}

AnnotationLog::Append AnnotationLog::append(const AnnotationRecord& record) {
  validate(record);
  const std::string line = to_json(record) + "\n";
  std::lock_guard lock(mu_);
  if (keys_.contains({record.annotator_id, record.example_id})) return Append::Duplicate;
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const auto n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(sys_error("annotation log write failed"));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(sys_error("annotation log fsync failed"));
  keys_.emplace(record.annotator_id, record.example_id);
  records_.push_back(record);
  return Append::Ok;
}

std::vector<AnnotationRecord> AnnotationLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<AnnotationRecord> AnnotationLog::records_for(const std::string& annotator) const {
  std::lock_guard lock(mu_);
  std::vector<AnnotationRecord> out;
  for (const auto& r : records_)
    if (r.annotator_id == annotator) out.push_back(r);
  return out;
}

bool AnnotationLog::contains(const std::string& annotator, const std::string& example_id) const {
  std::lock_guard lock(mu_);
  return keys_.contains({annotator, example_id});
}

std::size_t AnnotationLog::count(const std::string& annotator) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& r : records_) n += r.annotator_id == annotator;
  return n;
}

std::vector<std::string> AnnotationLog::annotators() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& r : records_)
    if (std::find(out.begin(), out.end(), r.annotator_id) == out.end()) out.push_back(r.annotator_id);
  return out;
}

struct Service::Http {
  httplib::Server server;
};

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), http_(std::make_unique<Http>()) {
  Vocabulary vocab;
  if (!cfg_.checkpoint.empty()) {
    ckpt_ = load_model(cfg_.checkpoint);
    if (auto* m = dynamic_cast<const Model3E*>(ckpt_->model.get());
        m && (m->params().dims.ext_utt > 0 || m->params().dims.ext_ctx > 0))
      throw ValidationError("checkpoints with external embedding blocks cannot serve live text");
    version_ = std::string(name_of(ckpt_->model->kind())) + "-" + ftmp::model_version(cfg_.checkpoint);
    vocab = ckpt_->vocab;
  }
  if (!cfg_.diagnostic_set.empty()) diag_ = load_diagnostic(cfg_.diagnostic_set, vocab);
  if (!cfg_.annotation_log.empty()) log_ = std::make_unique<AnnotationLog>(cfg_.annotation_log);
}

Service::~Service() = default;

HttpResponse Service::predict(const std::string& body) const {
  if (!ckpt_) return fail(503, "no model loaded");
  std::vector<Utterance> context;
  try {
    const json j = json::parse(body);
    const json& items = j.is_array() ? j : j.at("context");
    if (!items.is_array()) return fail(400, "context must be an array");
    std::int64_t idx = 0;
    for (const auto& it : items) {
      Utterance u;
      u.speaker_id = it.at("speaker_id").get<std::string>();
      const auto role = parse_role(it.at("role").get<std::string>());
      if (!role) return fail(400, "unknown role " + it.at("role").dump());
      u.role = *role;
      u.text = it.at("text").get<std::string>();
      // Student turns may omit the move; it is always Wait.
      if (it.contains("talk_move")) {
        const auto m = parse_talk_move(it.at("talk_move").get<std::string>());
        if (!m) return fail(400, "unknown talk move " + it.at("talk_move").dump());
        u.talk_move = *m;
      } else {
        u.talk_move = u.role == Role::Student ? TalkMove::Wait : TalkMove::None;
      }
      u.idx = idx++;
      context.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    return fail(400, std::string("malformed request: ") + e.what());
  }
  Example ex;
  bool truncated = false;
  try {
    ex = make_example(context, ckpt_->vocab, WindowConfig{ckpt_->window}, &truncated);
  } catch (const ValidationError& e) {
    return fail(422, e.what());
  }
  const Mat probs = ckpt_->model->probabilities(std::span<const Example>(&ex, 1));
  json p = json::array();
  for (int k = 0; k < kNumTalkMoves; ++k) p.push_back(probs(k, 0));
  const json out = {{"probs", p},
                    {"labels", talk_move_names()},
                    {"label", name_of(predict_from_probs(probs.col(0)))},
                    {"model_version", version_},
                    {"window", ckpt_->window},
                    {"truncated", truncated}};
  return {200, out.dump()};
}

HttpResponse Service::diagnostic_next(const std::string& annotator) const {
  if (!diag_) return fail(503, "no diagnostic set loaded");
  if (!log_) return fail(503, "no annotation log configured");
  if (annotator.empty()) return fail(400, "missing annotator parameter");
  if (!cfg_.annotators.empty() &&
      std::find(cfg_.annotators.begin(), cfg_.annotators.end(), annotator) == cfg_.annotators.end())
    return fail(404, "unknown annotator " + annotator);
  const auto total = diag_->items.size();
  std::size_t completed = 0;
  const DiagnosticItem* next = nullptr;
  std::size_t next_index = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (log_->contains(annotator, diag_->items[i].example_id)) {
      ++completed;
    } else if (!next) {
      next = &diag_->items[i];
      next_index = i;
    }
  }
  json out = {{"annotator", annotator}, {"completed", completed}, {"total", total}, {"done", next == nullptr}};
  if (next) {
    json ctx = json::array();
    for (const auto& d : next->display) {
      if (d.pad) {
        ctx.push_back({{"pad", true}});
        continue;
      }
      ctx.push_back({{"pad", false},
                     {"speaker_change", d.speaker_change},
                     {"speaker_id", d.speaker_id},
                     {"role", name_of(d.role)},
                     {"text", d.text},
                     {"talk_move", name_of(d.talk_move)}});
    }
    out["example_id"] = next->example_id;
    out["index"] = next_index;
    out["context"] = ctx;
    out["labels"] = talk_move_names();
  }
  return {200, out.dump()};
}

HttpResponse Service::annotate(const std::string& body) {
  if (!diag_) return fail(503, "no diagnostic set loaded");
  if (!log_) return fail(503, "no annotation log configured");
  AnnotationRecord r;
  try {
    const json j = json::parse(body);
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.example_id = j.at("example_id").get<std::string>();
    const auto primary = parse_talk_move(j.at("primary").get<std::string>());
    if (!primary) return fail(400, "unknown talk move " + j.at("primary").dump());
    r.primary = *primary;
    if (!j.at("acceptable").is_array()) return fail(400, "acceptable must be an array");
    for (const auto& m : j.at("acceptable")) {
      const auto mv = parse_talk_move(m.get<std::string>());
      if (!mv) return fail(400, "unknown talk move " + m.dump());
      r.acceptable.insert(*mv);
    }
    r.timestamp = j.value("timestamp", std::string());
  } catch (const json::exception& e) {
    return fail(400, std::string("malformed annotation: ") + e.what());
  }
  if (!cfg_.annotators.empty() &&
      std::find(cfg_.annotators.begin(), cfg_.annotators.end(), r.annotator_id) == cfg_.annotators.end())
    return fail(404, "unknown annotator " + r.annotator_id);
  if (!diag_->find(r.example_id)) return fail(422, "example " + r.example_id + " is not in the diagnostic set");
  if (r.timestamp.empty()) r.timestamp = utc_timestamp();
  try {
    validate(r);
  } catch (const ValidationError& e) {
    return fail(422, e.what());
  }
  if (log_->append(r) == AnnotationLog::Append::Duplicate)
    return fail(409, "annotator " + r.annotator_id + " already annotated " + r.example_id);
  return {200, json{{"ok", true}, {"completed", log_->count(r.annotator_id)}, {"total", diag_->items.size()}}
                   .dump()};
}

std::vector<TalkMove> Service::diagnostic_predictions() const {
  std::call_once(preds_once_, [&] {
    std::vector<Example> ex;
    for (const auto& it : diag_->items) ex.push_back(it.example);
    preds_ = predict_all(*ckpt_->model, ex);
  });
  return preds_;
}

HttpResponse Service::report() const {
  if (!diag_ || !log_) return fail(409, "no diagnostic set or annotation log configured");
  if (!ckpt_) return fail(409, "no model predictions: no model loaded");
  const auto total = diag_->items.size();
  auto candidates = cfg_.annotators.empty() ? log_->annotators() : cfg_.annotators;
  std::vector<std::string> complete;
  for (const auto& a : candidates)
    if (log_->count(a) == total) complete.push_back(a);
  if (complete.empty()) return fail(409, "no annotator has completed the diagnostic set");

  std::vector<std::string> ids;
  std::vector<TalkMove> truth;
  for (const auto& it : diag_->items) {
    ids.push_back(it.example_id);
    truth.push_back(it.example.label);
  }
  const auto ann1 = log_->records_for(complete[0]);
  const auto ann2 = complete.size() > 1 ? log_->records_for(complete[1]) : std::vector<AnnotationRecord>{};
  const auto rep = agreement_report(ids, ann1, ann2, diagnostic_predictions(), truth);
  json out = json::parse(report_json(rep));
  out["annotator_1"] = complete[0];
  out["annotator_2"] = complete.size() > 1 ? json(complete[1]) : json(nullptr);
  out["model_version"] = version_;
  return {200, out.dump()};
}

void Service::serve(const std::function<void(int)>& on_bound) {
  auto& srv = http_->server;
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  srv.Post("/predict", [&, reply](const httplib::Request& req, httplib::Response& res) { reply(res, predict(req.body)); });
  srv.Get("/diagnostic/next", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, diagnostic_next(req.get_param_value("annotator")));
  });
  srv.Post("/annotations", [&, reply](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, annotate(req.body));
    } catch (const Error& e) {
      reply(res, fail(500, e.what()));
    }
  });
  srv.Get("/report", [&, reply](const httplib::Request&, httplib::Response& res) { reply(res, report()); });
  srv.Get("/health", [&, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, {200, json{{"ok", true}, {"model_loaded", has_model()}, {"model_version", version_}}.dump()});
  });
  if (!cfg_.static_dir.empty() && !srv.set_mount_point("/", cfg_.static_dir))
    throw Error("static_dir " + cfg_.static_dir + " does not exist");
  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    const json line = {{"ts", utc_timestamp()},    {"method", req.method},     {"path", req.path},
                       {"status", res.status},     {"remote", req.remote_addr}, {"bytes", res.body.size()}};
    std::cerr << line.dump() << std::endl;
  });

  int port = cfg_.port;
  if (port == 0) {
    port = srv.bind_to_any_port(cfg_.host);
    if (port < 0) throw Error("cannot bind " + cfg_.host);
  } else if (!srv.bind_to_port(cfg_.host, port)) {
    throw Error("cannot bind " + cfg_.host + ":" + std::to_string(port));
  }
  std::cerr << json{{"ts", utc_timestamp()}, {"event", "listening"}, {"host", cfg_.host}, {"port", port},
                    {"model_version", version_}}
                   .dump()
            << std::endl;
  if (on_bound) on_bound(port);
  srv.listen_after_bind();
}

void Service::stop() { http_->server.stop(); }

}  // namespace ftmp
