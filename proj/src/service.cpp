#include "ccs/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ccs/detect.hpp"
#include "ccs/evaluate.hpp"
#include "ccs/forest.hpp"
#include "ccs/json_io.hpp"
#include "ccs/pipeline.hpp"

namespace ccs {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

const char* to_string(JobKind k) noexcept {
  switch (k) {
    case JobKind::parse: return "parse";
    case JobKind::predict: return "predict";
    case JobKind::convert: return "convert";
    case JobKind::train: return "train";
    case JobKind::evaluate: return "evaluate";
  }
  return "?";
}

const char* to_string(JobState s) noexcept {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

bool valid_transition(JobState from, JobState to) noexcept {
  return (from == JobState::queued && to == JobState::running) ||
         (from == JobState::running && (to == JobState::done || to == JobState::failed));
}

std::string job_json(const Job& j) {
  json out{{"id", j.id},
           {"kind", to_string(j.kind)},
           {"state", to_string(j.state)},
           {"inputs", j.inputs.empty() ? json::object() : json::parse(j.inputs)},
           {"enqueued_ms", j.enqueued_ms},
           {"started_ms", j.started_ms ? json(j.started_ms) : json()},
           {"ended_ms", j.ended_ms ? json(j.ended_ms) : json()}};
  if (!j.result.empty()) out["result"] = j.result;
  if (!j.error.empty()) out["error"] = j.error;
  return out.dump();
}

// ---------------------------------------------------------------- job queue

JobQueue::JobQueue(std::size_t capacity, int executors, QueuePolicy policy) : capacity_(capacity), policy_(policy) {
  if (capacity < 1) throw Error(Errc::invalid_argument, "queue size must be at least 1");
  if (executors < 1) throw Error(Errc::invalid_argument, "executor count must be at least 1");
  for (int i = 0; i < executors; ++i) threads_.emplace_back([this] { run(); });
}

JobQueue::~JobQueue() { shutdown(); }

std::string JobQueue::submit(JobKind kind, std::string inputs, Task task) {
  std::unique_lock lock(mu_);
  if (policy_ == QueuePolicy::block)
    changed_.wait(lock, [&] { return stopping_ || pending_.size() < capacity_; });
  if (stopping_) throw Error(Errc::busy, "service is shutting down");
  if (pending_.size() >= capacity_)
    throw Error(Errc::busy, "job queue full (" + std::to_string(capacity_) + " waiting)");
  char id[32];
  std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(++counter_));
  Job j;
  j.id = id;
  j.kind = kind;
  j.inputs = std::move(inputs);
  j.enqueued_ms = now_ms();
  jobs_.emplace(j.id, j);
  pending_.emplace_back(j.id, std::move(task));
  changed_.notify_all();
  return j.id;
}

std::optional<Job> JobQueue::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::optional<Job> JobQueue::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  auto finished = [&] {
    auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.state == JobState::done || it->second.state == JobState::failed;
  };
  changed_.wait_for(lock, timeout, finished);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::size_t JobQueue::waiting() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

void JobQueue::set_state(Job& j, JobState to) {
  if (!valid_transition(j.state, to))
    throw Error(Errc::internal, std::string("job ") + j.id + ": " + to_string(j.state) + " -> " + to_string(to));
  j.state = to;
  if (to == JobState::running)
    j.started_ms = std::max(now_ms(), j.enqueued_ms);
  else
    j.ended_ms = std::max(now_ms(), j.started_ms);
}

void JobQueue::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    changed_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
    if (pending_.empty()) return;
    auto [id, task] = std::move(pending_.front());
    pending_.pop_front();
    set_state(jobs_.at(id), JobState::running);
    changed_.notify_all();
    lock.unlock();
    std::string result, error;
    bool ok = true;
    try {
      result = task();
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    } catch (...) {
      ok = false;
      error = "unknown error";
    }
    lock.lock();
    Job& j = jobs_.at(id);
    set_state(j, ok ? JobState::done : JobState::failed);
    j.result = std::move(result);
    j.error = std::move(error);
    changed_.notify_all();
  }
}

void JobQueue::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
    // Jobs still waiting never run; they fail instead of vanishing.
    for (auto& [id, task] : pending_) {
      Job& j = jobs_.at(id);
      set_state(j, JobState::running);
      set_state(j, JobState::failed);
      j.error = "service stopped before the job ran";
    }
    pending_.clear();
    changed_.notify_all();
  }
  threads_.clear();
}

// ------------------------------------------------------------------- config

namespace {

template <class T>
T number(std::string_view s, const char* what) {
  T v{};
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw Error(Errc::invalid_argument, std::string("bad value for ") + what);
  return v;
}

QueuePolicy policy_of(std::string_view s) {
  if (s == "reject") return QueuePolicy::reject;
  if (s == "block") return QueuePolicy::block;
  throw Error(Errc::invalid_argument, "queue policy must be 'reject' or 'block'");
}

void check(const ServiceConfig& c) {
  if (c.port < 0 || c.port > 65535) throw Error(Errc::invalid_argument, "port out of range");
  if (c.queue_size < 1) throw Error(Errc::invalid_argument, "queue size must be at least 1");
  if (c.workers < 1 || c.executors < 1) throw Error(Errc::invalid_argument, "worker counts must be at least 1");
  if (!(c.xy_gap >= 0) || !(c.merge_gap >= 0)) throw Error(Errc::invalid_argument, "gaps must be non-negative");
}

}  // namespace

ServiceConfig load_config(const fs::path& file, ServiceConfig c) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, "config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error(Errc::invalid_argument, "config must be a JSON object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "host") c.host = v.get<std::string>();
      else if (k == "port") c.port = v.get<int>();
      else if (k == "store") c.store = v.get<std::string>();
      else if (k == "queue_size") c.queue_size = v.get<std::size_t>();
      else if (k == "executors") c.executors = v.get<int>();
      else if (k == "workers") c.workers = v.get<int>();
      else if (k == "xy_gap") c.xy_gap = v.get<double>();
      else if (k == "merge_gap") c.merge_gap = v.get<double>();
      else if (k == "queue_policy") c.queue_policy = policy_of(v.get<std::string>());
      else if (k == "ui_dir") c.ui_dir = v.get<std::string>();
      else if (k == "max_upload") c.max_upload = v.get<std::size_t>();
      else throw Error(Errc::invalid_argument, "unknown config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, "config: " + std::string(e.what()));
  }
  check(c);
  return c;
}

ServiceConfig apply_env(ServiceConfig c, const std::function<const char*(const char*)>& getenv) {
  auto get = [&](const char* name) -> std::optional<std::string_view> {
    const char* v = getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string_view(v);
  };
  if (auto v = get("CCS_PORT")) c.port = number<int>(*v, "CCS_PORT");
  if (auto v = get("CCS_STORE")) c.store = std::string(*v);
  if (auto v = get("CCS_QUEUE_SIZE")) c.queue_size = number<std::size_t>(*v, "CCS_QUEUE_SIZE");
  if (auto v = get("CCS_WORKERS")) c.workers = number<int>(*v, "CCS_WORKERS");
  if (auto v = get("CCS_EXECUTORS")) c.executors = number<int>(*v, "CCS_EXECUTORS");
  if (auto v = get("CCS_XY_GAP")) c.xy_gap = number<double>(*v, "CCS_XY_GAP");
  if (auto v = get("CCS_MERGE_GAP")) c.merge_gap = number<double>(*v, "CCS_MERGE_GAP");
  if (auto v = get("CCS_QUEUE_POLICY")) c.queue_policy = policy_of(*v);
  if (auto v = get("CCS_UI_DIR")) c.ui_dir = std::string(*v);
  if (auto v = get("CCS_MAX_UPLOAD")) c.max_upload = number<std::size_t>(*v, "CCS_MAX_UPLOAD");
  check(c);
  return c;
}

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::conflict: return 409;
    case Errc::busy: return 429;
    case Errc::internal: return 500;
    default: return 400;
  }
}

// ------------------------------------------------------------------ service

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "no such resource: " + p.filename().string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
  fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::internal, "cannot write " + p.string());
  }
  fs::rename(tmp, p);
}

// Ids become file names; anything beyond [A-Za-z0-9._-] is refused.
const std::string& safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." ||
      !std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'; }))
    throw Error(Errc::invalid_argument, "bad id '" + id + "'");
  return id;
}

json parse_body(const httplib::Request& req) {
  try {
    json j = req.body.empty() ? json::object() : json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::invalid_argument, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, std::string("request body: ") + e.what());
  }
}

ForestParams forest_params(const json& j) {
  ForestParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(Errc::invalid_argument, "params must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "n_trees") p.n_trees = v.get<int>();
    else if (k == "max_depth") p.max_depth = v.get<int>();
    else if (k == "min_samples_leaf") p.min_samples_leaf = v.get<int>();
    else if (k == "features_per_split") p.features_per_split = v.get<int>();
    else if (k == "seed") p.seed = v.get<std::uint64_t>();
    else if (k == "bootstrap") p.bootstrap = v.get<bool>();
    else throw Error(Errc::invalid_argument, "unknown forest parameter '" + k + "'");
  }
  return p;
}

DatasetFilter filter_of(const json& body) {
  DatasetFilter f;
  if (body.contains("doc_ids"))
    for (const auto& d : body.at("doc_ids")) f.doc_ids.push_back(d.get<std::string>());
  return f;
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, json{{"error", code}, {"message", message}}.dump());
}

bool looks_like_pdf(std::string_view b) {
  auto p = b.find("%PDF-");
  return p != std::string_view::npos && p < 1024;
}

}  // namespace

struct Service::Impl {
  Service& svc;
  httplib::Server server;
  std::jthread thread;
  std::mutex detections_mu;

  explicit Impl(Service& s) : svc(s) {}

  fs::path dir(const char* name) const { return svc.config_.store / name; }

  ConvertOptions convert_options() const {
    ConvertOptions o;
    o.workers = svc.config_.workers;
    o.assemble.min_gap = svc.config_.xy_gap;
    o.assemble.max_merge_gap = svc.config_.merge_gap;
    return o;
  }

  std::vector<DetectionRegion> detections(const ParsedDocument& doc) {
    fs::path p = dir("detections") / (safe_id(doc.doc_id) + ".jsonl");
    std::lock_guard lock(detections_mu);
    if (!fs::exists(p)) return {};
    return import_detections(doc, parse_detection_jsonl(read_file(p)));
  }

  ForestModel model(const std::string& id) { return load_model(read_file(dir("models") / (safe_id(id) + ".ccsm"))); }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Every route maps library errors onto statuses in one place.
  static httplib::Server::Handler wrap(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "syntax", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void accepted(httplib::Response& res, const std::string& job) {
    res.set_header("Location", "/jobs/" + job);
    send_json(res, 202, json{{"job", job}, {"status", "/jobs/" + job}}.dump());
  }

  void routes();
};

void Service::Impl::routes() {
  auto& S = server;
  AnnotationStore& store = *svc.store_;
  JobQueue& jobs = *svc.jobs_;

  S.Get("/healthz", wrap([&](const auto&, auto& res) {
    send_json(res, 200, json{{"status", "ok"}, {"waiting_jobs", jobs.waiting()}}.dump());
  }));

  S.Post("/documents", wrap([&](const httplib::Request& req, httplib::Response& res) {
    std::string body = req.body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) throw Error(Errc::invalid_argument, "multipart upload needs a 'file' part");
      body = req.get_file_value("file").content;
    }
    if (body.empty()) throw Error(Errc::invalid_argument, "empty upload");
    std::string doc_id = req.has_param("doc_id") ? safe_id(req.get_param_value("doc_id")) : "";
    if (looks_like_pdf(body)) {
      const int workers = svc.config_.workers;
      auto job = jobs.submit(JobKind::parse, json{{"format", "pdf"}, {"bytes", body.size()}}.dump(),
                             [&store, body = std::move(body), doc_id, workers] {
                               pdf::ParseOptions o;
                               o.doc_id = doc_id;
                               o.workers = workers;
                               auto id = store.put_document(pdf::parse_pdf(body, o).document);
                               return "/documents/" + id;
                             });
      return accepted(res, job);
    }
    ParsedDocument doc = deserialize_document(body);
    if (!doc_id.empty()) doc.doc_id = doc_id;
    safe_id(doc.doc_id);
    auto job = jobs.submit(JobKind::parse, json{{"format", "ccs.json"}, {"doc_id", doc.doc_id}}.dump(),
                           [&store, doc = std::move(doc)] { return "/documents/" + store.put_document(doc); });
    accepted(res, job);
  }));

  S.Get("/documents", wrap([&](const auto&, auto& res) { send_json(res, 200, json(store.document_ids()).dump()); }));

  S.Get(R"(/documents/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, serialize_document(store.document(req.matches[1])));
  }));

  S.Get(R"(/documents/([^/]+)/pages/(\d+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    ParsedDocument doc = store.document(req.matches[1]);
    const int n = number<int>(req.matches[2].str(), "page");
    if (n < 1 || n > static_cast<int>(doc.pages.size()))
      throw Error(Errc::not_found, "document '" + doc.doc_id + "' has no page " + std::to_string(n));
    json page = to_json(doc.pages[static_cast<std::size_t>(n - 1)]);
    page["doc_id"] = doc.doc_id;
    page["total_pages"] = doc.total_pages;
    send_json(res, 200, page.dump());
  }));

  S.Get("/labelsets", wrap([&](const auto&, auto& res) {
    json out = json::array();
    for (const auto& ls : store.label_sets()) out.push_back(json::parse(label_set_json(ls)));
    send_json(res, 200, out.dump());
  }));

  S.Get(R"(/labelsets/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, label_set_json(store.label_set(req.matches[1])));
  }));

  S.Put("/labelsets", wrap([&](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    std::optional<int> expected;
    if (body.contains("expected_version") && !body["expected_version"].is_null())
      expected = body["expected_version"].get<int>();
    LabelSet ls = store.put_label_set(label_set_from_json(req.body), expected);
    send_json(res, 200, label_set_json(ls));
  }));

  auto annotations_json = [&store](const std::string& doc, int page) {
    PageAnnotations pa = store.page_annotations(doc, page);
    json cells = json::array();
    for (const auto& [id, r] : pa.cells)
      cells.push_back({{"cell", r.cell},
                       {"label", r.label},
                       {"annotator", r.annotator},
                       {"ts", r.ts},
                       {"label_set", r.label_set},
                       {"label_set_version", r.label_set_version}});
    return json{{"doc_id", doc}, {"page", page}, {"complete", pa.complete}, {"cells", std::move(cells)}};
  };

  S.Get(R"(/annotations/([^/]+)/(\d+))", wrap([&, annotations_json](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, annotations_json(req.matches[1], number<int>(req.matches[2].str(), "page")).dump());
  }));

  S.Put(R"(/annotations/([^/]+)/(\d+))", wrap([&, annotations_json](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const std::string doc = req.matches[1];
    const int page = number<int>(req.matches[2].str(), "page");
    std::vector<CellAnnotation> cells;
    for (const auto& c : body.at("cells")) cells.push_back({c.at("cell").get<int>(), c.at("label").get<std::string>()});
    const std::size_t n = store.upsert(doc, page, cells, body.at("annotator").get<std::string>(),
                                       body.at("label_set").get<std::string>(), body.at("label_set_version").get<int>());
    json out = annotations_json(doc, page);
    out["accepted"] = n;
    send_json(res, 200, out.dump());
  }));

  S.Post("/detections/import", wrap([&](const httplib::Request& req, httplib::Response& res) {
    auto records = parse_detection_jsonl(req.body);
    std::map<std::string, std::vector<DetectionRecord>> by_doc;
    for (auto& r : records) by_doc[r.doc_id].push_back(std::move(r));
    // Validate everything before touching the store.
    std::map<std::string, std::vector<DetectionRegion>> regions;
    for (const auto& [doc_id, recs] : by_doc) regions[doc_id] = import_detections(store.document(doc_id), recs);
    json counts = json::object();
    std::lock_guard lock(detections_mu);
    for (const auto& [doc_id, regs] : regions) {
      write_file(dir("detections") / (safe_id(doc_id) + ".jsonl"), detection_jsonl(doc_id, regs));
      counts[doc_id] = regs.size();
    }
    send_json(res, 200, json{{"imported", records.size()}, {"documents", counts}}.dump());
  }));

  S.Post("/models/train", wrap([&](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const std::string ls = body.value("label_set", std::string("prb"));
    ForestParams params = forest_params(body.value("params", json()));
    Dataset data = store.export_dataset(filter_of(body), ls);
    const int workers = svc.config_.workers;
    const fs::path models = dir("models");
    auto job = jobs.submit(JobKind::train, body.dump(), [data = std::move(data), params, workers, models] {
      std::string bytes = save_model(train_documents(data.documents, data.annotations, data.label_names, params, {}, workers));
      std::string id = content_digest(bytes).substr(0, 16);
      write_file(models / (id + ".ccsm"), bytes);
      return "/models/" + id;
    });
    accepted(res, job);
  }));

  S.Get(R"(/models/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (req.get_param_value("format") == "binary") {
      res.set_content(read_file(dir("models") / (safe_id(id) + ".ccsm")), "application/octet-stream");
      return;
    }
    ForestModel m = model(id);
    json params{{"n_trees", m.params.n_trees},     {"max_depth", m.params.max_depth},
                {"min_samples_leaf", m.params.min_samples_leaf}, {"features_per_split", m.params.features_per_split},
                {"seed", m.params.seed},           {"bootstrap", m.params.bootstrap}};
    send_json(res, 200,
              json{{"id", id},
                   {"labels", m.labels},
                   {"features", m.schema.names},
                   {"schema_version", m.schema.version},
                   {"trees", m.trees.size()},
                   {"rows", m.n_rows},
                   {"params", params}}
                  .dump());
  }));

  S.Post(R"(/models/([^/]+)/predict/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    const std::string model_id = safe_id(req.matches[1]), doc_id = safe_id(req.matches[2]);
    ForestModel m = model(model_id);
    ParsedDocument doc = store.document(doc_id);
    const fs::path out = dir("predictions") / model_id / (doc_id + ".json");
    auto job = jobs.submit(JobKind::predict, json{{"model", model_id}, {"doc_id", doc_id}}.dump(),
                           [this, m = std::move(m), doc = std::move(doc), out, model_id, doc_id] {
                             auto preds = predict_document(m, doc, detect_document(doc, detections(doc)));
                             json pages = json::array();
                             for (std::size_t p = 0; p < preds.size(); ++p) {
                               json cells = json::array();
                               for (std::size_t c = 0; c < preds[p].size(); ++c)
                                 cells.push_back({{"cell", c}, {"label", preds[p][c].label},
                                                  {"confidence", preds[p][c].confidence}});
                               pages.push_back({{"page", p + 1}, {"cells", std::move(cells)}});
                             }
                             write_file(out, json{{"doc_id", doc_id}, {"model", model_id}, {"pages", pages}}.dump());
                             return "/models/" + model_id + "/predictions/" + doc_id;
                           });
    accepted(res, job);
  }));

  S.Get(R"(/models/([^/]+)/predictions/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200,
              read_file(dir("predictions") / safe_id(req.matches[1]) / (safe_id(req.matches[2]) + ".json")));
  }));

  S.Post("/convert", wrap([&](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const std::string doc_id = safe_id(body.at("doc_id").get<std::string>());
    const std::string model_id = safe_id(body.at("model").get<std::string>());
    ForestModel m = model(model_id);
    ParsedDocument doc = store.document(doc_id);
    ConvertOptions o = convert_options();
    const fs::path out = dir("outputs");
    auto job = jobs.submit(JobKind::convert, body.dump(), [this, m = std::move(m), doc = std::move(doc), o, out] {
      Conversion c = convert_document(doc, m, o, detections(doc));
      if (!c.ok()) {
        std::string msg = c.error;
        for (const auto& f : c.page_failures) msg += (msg.empty() ? "" : "; ") + f.message;
        throw Error(Errc::internal, msg);
      }
      write_file(out / (doc.doc_id + ".structured.json"), export_structured(c.structured, "json"));
      write_file(out / (doc.doc_id + ".md"), export_structured(c.structured, "markdown"));
      return "/outputs/" + doc.doc_id;
    });
    accepted(res, job);
  }));

  S.Get(R"(/outputs/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = safe_id(req.matches[1]);
    if (req.get_param_value("format") == "markdown" || req.get_param_value("format") == "md")
      res.set_content(read_file(dir("outputs") / (id + ".md")), "text/markdown");
    else
      send_json(res, 200, read_file(dir("outputs") / (id + ".structured.json")));
  }));

  S.Post("/evaluate", wrap([&](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    CrossValidationOptions o;
    o.k = body.value("k", 10);
    o.seed = body.value("seed", std::uint64_t{42});
    o.forest = forest_params(body.value("params", json()));
    o.workers = svc.config_.workers;
    if (o.k < 2) throw Error(Errc::invalid_argument, "k must be at least 2");
    Dataset data = store.export_dataset(filter_of(body), body.value("label_set", std::string("prb")));
    const fs::path reports = dir("reports");
    auto job = jobs.submit(JobKind::evaluate, body.dump(), [data = std::move(data), o, reports] {
      std::string report = report_json(cross_validate(data.documents, data.annotations, data.label_names, o));
      std::string id = content_digest(report).substr(0, 16);
      write_file(reports / (id + ".json"), report);
      return "/reports/" + id;
    });
    accepted(res, job);
  }));

  S.Get(R"(/reports/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, read_file(dir("reports") / (safe_id(req.matches[1]) + ".json")));
  }));

  S.Get(R"(/jobs/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    auto j = jobs.get(req.matches[1]);
    if (!j) throw Error(Errc::not_found, "unknown job '" + req.matches[1].str() + "'");
    send_json(res, j->state == JobState::failed ? 500 : 200, job_json(*j));
  }));

  S.Get(R"(/stats/annotators/([^/]+))", wrap([&](const httplib::Request& req, httplib::Response& res) {
    TimeWindow w;
    if (req.has_param("from")) w.from = parse_timestamp(req.get_param_value("from"));
    if (req.has_param("to")) w.to = parse_timestamp(req.get_param_value("to"));
    SessionStats s = store.session_stats(req.matches[1], w);
    send_json(res, 200,
              json{{"annotator", s.annotator},
                   {"pages_completed", s.pages_completed},
                   {"elapsed_minutes", s.elapsed_minutes},
                   {"pages_per_minute", s.pages_per_minute}}
                  .dump());
  }));

  if (!svc.config_.ui_dir.empty()) {
    if (!server.set_mount_point("/ui", svc.config_.ui_dir.string()))
      throw Error(Errc::not_found, "ui directory " + svc.config_.ui_dir.string() + " does not exist");
  }

  server.set_payload_max_length(svc.config_.max_upload);
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const char* code = res.status == 413 ? "too_large" : res.status == 404 ? "not_found" : "error";
      send_error(res, res.status, code, httplib::status_message(res.status));
    }
  });
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  check(config_);
  fs::create_directories(config_.store);
  store_ = std::make_unique<AnnotationStore>(config_.store);
  jobs_ = std::make_unique<JobQueue>(config_.queue_size, config_.executors, config_.queue_policy);
  impl_ = std::make_unique<Impl>(*this);
  impl_->routes();
}

Service::~Service() {
  stop();
  jobs_->shutdown();
}

int Service::start() {
  int port = config_.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(config_.host);
  } else if (!impl_->server.bind_to_port(config_.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(Errc::internal, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  impl_->thread = std::jthread([this] { impl_->server.listen_after_bind(); });
  return port;
}

void Service::run() {
  if (!impl_->server.listen(config_.host, config_.port))
    throw Error(Errc::internal, "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
}

void Service::stop() {
  if (impl_) {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
  }
}

}  // namespace ccs
