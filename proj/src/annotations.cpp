#include "ccs/annotations.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "ccs/json_io.hpp"

namespace ccs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) throw Error(Errc::internal, "write failed: " + p.string());
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void write_atomic(const fs::path& p, std::string_view data, bool sync) {
  fs::path tmp = p;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(Errc::internal, "cannot create " + tmp.string());
  write_all(fd, data, tmp);
  if (sync) ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, p);
}

bool is_hex_color(const std::string& c) {
  if (c.size() != 7 || c[0] != '#') return false;
  return std::all_of(c.begin() + 1, c.end(), [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)); });
}

json record_json(const AnnotationRecord& r) {
  return {{"doc", r.doc_id},       {"page", r.page},          {"cell", r.cell},
          {"label", r.label},      {"annotator", r.annotator}, {"ts", r.ts},
          {"labelset", r.label_set}, {"version", r.label_set_version}};
}

AnnotationRecord record_from_json(const json& j) {
  return {j.at("doc").get<std::string>(),   j.at("page").get<int>(),        j.at("cell").get<int>(),
          j.at("label").get<std::string>(), j.at("annotator").get<std::string>(), j.at("ts").get<std::string>(),
          j.value("labelset", std::string()), j.value("version", 0)};
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

bool LabelSet::contains(std::string_view label) const {
  return std::any_of(labels.begin(), labels.end(), [&](const Label& l) { return l.name == label; });
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.name);
  return out;
}

void validate_label_set(const LabelSet& ls) {
  if (ls.name.empty() || ls.name.find_first_of("/\\.") != std::string::npos)
    throw Error(Errc::invalid_argument, "label set name '" + ls.name + "' is not allowed");
  if (ls.labels.empty()) throw Error(Errc::invalid_argument, "label set '" + ls.name + "' has no labels");
  std::set<std::string> names, colors;
  for (const auto& l : ls.labels) {
    if (l.name.empty()) throw Error(Errc::invalid_argument, "empty label name");
    if (!names.insert(l.name).second) throw Error(Errc::invalid_argument, "duplicate label '" + l.name + "'");
    if (!is_hex_color(l.color)) throw Error(Errc::invalid_argument, "label '" + l.name + "': bad colour " + l.color);
    if (!colors.insert(lower(l.color)).second)
      throw Error(Errc::invalid_argument, "label '" + l.name + "' reuses colour " + l.color);
  }
}

LabelSet default_label_set() {
  return {"default",
          {{"Title", "#ff0000"},
           {"Abstract", "#800080"},
           {"Authors", "#008000"},
           {"Subtitle", "#8b0000"},
           {"Text", "#ffff00"},
           {"Table", "#ffa500"},
           {"Figure", "#fffff0"}},
          1};
}

LabelSet prb_label_set() {
  return {"prb",
          {{"Title", "#ff0000"},
           {"Author", "#008000"},
           {"Subtitle", "#8b0000"},
           {"Text", "#ffff00"},
           {"Picture", "#fffff0"},
           {"Table", "#ffa500"}},
          1};
}

std::string label_set_json(const LabelSet& ls) {
  json labels = json::array();
  for (const auto& l : ls.labels) labels.push_back({{"name", l.name}, {"color", l.color}});
  return json{{"name", ls.name}, {"version", ls.version}, {"labels", std::move(labels)}}.dump();
}

LabelSet label_set_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    LabelSet ls;
    ls.name = j.at("name").get<std::string>();
    ls.version = j.value("version", 1);
    for (const auto& l : j.at("labels")) ls.labels.push_back({l.at("name").get<std::string>(), l.at("color").get<std::string>()});
    return ls;
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, std::string("label set: ") + e.what());
  }
}

std::string format_timestamp(TimePoint t) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  long frac = static_cast<long>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

TimePoint parse_timestamp(std::string_view s) {
  std::tm tm{};
  int ms = 0;
  std::string str(s);
  int consumed = 0;
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &consumed) != 6)
    throw Error(Errc::invalid_argument, "bad timestamp '" + str + "'");
  std::string_view rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == '.') {
    std::size_t i = 1;
    int digits = 0;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) {
      if (digits < 3) ms = ms * 10 + (rest[i] - '0');
      ++digits;
      ++i;
    }
    for (; digits < 3; ++digits) ms *= 10;
    rest = rest.substr(i);
  }
  if (rest != "Z") throw Error(Errc::invalid_argument, "bad timestamp '" + str + "'");
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::time_t t = timegm(&tm);
  return TimePoint(std::chrono::seconds(t)) + std::chrono::milliseconds(ms);
}

std::string dataset_json(const Dataset& d) {
  json docs = json::array();
  for (std::size_t i = 0; i < d.documents.size(); ++i) {
    json labels = json::array();
    for (const auto& [ref, label] : d.annotations[i]) labels.push_back({ref.page, ref.cell, label});
    docs.push_back({{"document", to_json(d.documents[i])}, {"labels", std::move(labels)}});
  }
  return json{{"label_names", d.label_names}, {"documents", std::move(docs)}}.dump();
}

struct BatchEvent {
  int page = 0;
  std::string annotator;
  std::string ts;
  bool completed = false;  // the batch made the page fully annotated
};

struct AnnotationStore::DocState {
  mutable std::shared_mutex mu;
  ParsedDocument doc;
  fs::path dir;
  std::map<std::pair<int, int>, std::vector<AnnotationRecord>> history;
  std::vector<BatchEvent> events;
  std::uint64_t seq = 0;           // last applied batch
  std::uint64_t snapshot_seq = 0;  // batches folded into the snapshot
  std::uintmax_t log_size = 0;     // bytes of committed log
  bool log_dirty = false;          // tail beyond log_size must be cut

  const Page* page(int n) const {
    for (const auto& p : doc.pages)
      if (p.number == n) return &p;
    return nullptr;
  }

  bool complete(int n) const {
    const Page* p = page(n);
    if (!p) return false;
    return std::all_of(p->cells.begin(), p->cells.end(),
                       [&](const Cell& c) { return history.count({n, c.id}) > 0; });
  }

  void apply(const std::vector<AnnotationRecord>& batch, std::uint64_t s) {
    const int pg = batch.front().page;
    const bool before = complete(pg);
    for (const auto& r : batch) history[{r.page, r.cell}].push_back(r);
    events.push_back({pg, batch.front().annotator, batch.front().ts, !before && complete(pg)});
    seq = s;
  }

  void load_snapshot() {
    fs::path p = dir / "snapshot.json";
    if (!fs::exists(p)) return;
    json j = json::parse(read_file(p));
    for (const auto& r : j.at("history")) {
      AnnotationRecord rec = record_from_json(r);
      history[{rec.page, rec.cell}].push_back(rec);
    }
    for (const auto& e : j.at("events"))
      events.push_back({e.at("page").get<int>(), e.at("annotator").get<std::string>(), e.at("ts").get<std::string>(),
                        e.at("completed").get<bool>()});
    seq = snapshot_seq = j.at("seq").get<std::uint64_t>();
  }

  // Replays committed batches; an uncommitted or torn tail is cut off.
  void replay_log() {
    fs::path p = dir / "annotations.jsonl";
    if (!fs::exists(p)) return;
    std::string text = read_file(p);
    std::vector<AnnotationRecord> pending;
    std::size_t pos = 0, good = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) break;
      json j = json::parse(std::string_view(text).substr(pos, nl - pos), nullptr, false);
      pos = nl + 1;
      if (j.is_discarded() || !j.is_object()) break;
      if (j.contains("commit")) {
        auto s = j.at("commit").get<std::uint64_t>();
        if (pending.empty() || j.at("records").get<std::size_t>() != pending.size()) break;
        if (s > seq) apply(pending, s);
        pending.clear();
        good = pos;
      } else {
        pending.push_back(record_from_json(j));
      }
    }
    log_size = good;
    if (good != text.size()) fs::resize_file(p, good);
  }
};

AnnotationStore::AnnotationStore(fs::path root, StoreOptions options)
    : root_(std::move(root)), options_(std::move(options)) {
  fs::create_directories(root_ / "documents");
  fs::create_directories(root_ / "labelsets");
  load_all();
}

AnnotationStore::~AnnotationStore() = default;

fs::path AnnotationStore::doc_dir(const std::string& source_hash) const { return root_ / "documents" / source_hash; }

void AnnotationStore::load_all() {
  for (const auto& e : fs::directory_iterator(root_ / "labelsets")) {
    if (e.path().extension() != ".json") continue;
    LabelSet ls = label_set_from_json(read_file(e.path()));
    label_sets_[ls.name] = ls;
  }
  for (const LabelSet& preset : {default_label_set(), prb_label_set()})
    if (!label_sets_.count(preset.name)) {
      write_atomic(root_ / "labelsets" / (preset.name + ".json"), label_set_json(preset), options_.fsync);
      label_sets_[preset.name] = preset;
    }
  for (const auto& e : fs::directory_iterator(root_ / "documents")) {
    fs::path docfile = e.path() / "document.ccs.json";
    if (!fs::exists(docfile)) continue;
    auto st = std::make_unique<DocState>();
    st->doc = deserialize_document(read_file(docfile));
    st->dir = e.path();
    st->load_snapshot();
    st->replay_log();
    docs_[st->doc.doc_id] = std::move(st);
  }
}

AnnotationStore::DocState& AnnotationStore::state(const std::string& doc_id) const {
  std::lock_guard lk(registry_mu_);
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw Error(Errc::not_found, "unknown document '" + doc_id + "'");
  return *it->second;
}

std::string AnnotationStore::put_document(const ParsedDocument& doc) {
  if (auto v = validate_document(doc); !v.empty())
    throw Error(Errc::invalid_argument, "document violates " + v.front().invariant + " at " + v.front().locus);
  if (doc.doc_id.empty() || doc.doc_id.find_first_of("/\\") != std::string::npos || doc.doc_id[0] == '.')
    throw Error(Errc::invalid_argument, "document id '" + doc.doc_id + "' is not allowed");
  const std::string bytes = serialize_document(doc);
  std::string key = doc.source_hash.empty() ? content_digest(bytes) : doc.source_hash;
  std::lock_guard lk(registry_mu_);
  if (auto it = docs_.find(doc.doc_id); it != docs_.end()) {
    if (serialize_document(it->second->doc) != bytes)
      throw Error(Errc::conflict, "document '" + doc.doc_id + "' already exists with different content");
    return doc.doc_id;
  }
  fs::path dir = doc_dir(key);
  if (fs::exists(dir / "document.ccs.json")) {
    // Same source stored under another id.
    key += "-" + content_digest(doc.doc_id).substr(0, 8);
    dir = doc_dir(key);
  }
  fs::create_directories(dir);
  write_atomic(dir / "document.ccs.json", bytes, options_.fsync);
  auto st = std::make_unique<DocState>();
  st->doc = doc;
  st->dir = dir;
  docs_[doc.doc_id] = std::move(st);
  return doc.doc_id;
}

bool AnnotationStore::has_document(const std::string& doc_id) const {
  std::lock_guard lk(registry_mu_);
  return docs_.count(doc_id) > 0;
}

ParsedDocument AnnotationStore::document(const std::string& doc_id) const {
  DocState& st = state(doc_id);
  std::shared_lock lk(st.mu);
  return st.doc;
}

std::vector<std::string> AnnotationStore::document_ids() const {
  std::lock_guard lk(registry_mu_);
  std::vector<std::string> ids;
  for (const auto& [id, st] : docs_) ids.push_back(id);
  return ids;
}

std::vector<LabelSet> AnnotationStore::label_sets() const {
  std::lock_guard lk(registry_mu_);
  std::vector<LabelSet> out;
  for (const auto& [name, ls] : label_sets_) out.push_back(ls);
  return out;
}

LabelSet AnnotationStore::label_set(const std::string& name) const {
  std::lock_guard lk(registry_mu_);
  auto it = label_sets_.find(name);
  if (it == label_sets_.end()) throw Error(Errc::not_found, "unknown label set '" + name + "'");
  return it->second;
}

LabelSet AnnotationStore::put_label_set(const LabelSet& ls, std::optional<int> expected_version) {
  validate_label_set(ls);
  std::lock_guard lk(registry_mu_);
  LabelSet next = ls;
  auto it = label_sets_.find(ls.name);
  if (it == label_sets_.end()) {
    next.version = 1;
  } else {
    if (!expected_version || *expected_version != it->second.version)
      throw Error(Errc::conflict, "label set '" + ls.name + "' is at version " + std::to_string(it->second.version));
    next.version = it->second.version + 1;
  }
  write_atomic(root_ / "labelsets" / (ls.name + ".json"), label_set_json(next), options_.fsync);
  label_sets_[ls.name] = next;
  return next;
}

void AnnotationStore::inject_crash_after(std::size_t bytes) { crash_after_ = bytes; }

void AnnotationStore::append_batch(DocState& st, const std::vector<AnnotationRecord>& batch) {
  std::string data;
  for (const auto& r : batch) data += record_json(r).dump() + "\n";
  const std::uint64_t s = st.seq + 1;
  data += json{{"commit", s}, {"page", batch.front().page}, {"records", batch.size()}}.dump() + "\n";

  fs::path p = st.dir / "annotations.jsonl";
  if (st.log_dirty && fs::exists(p)) fs::resize_file(p, st.log_size);
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(Errc::internal, "cannot open " + p.string());
  if (crash_after_) {
    std::size_t n = std::min(*crash_after_, data.size());
    crash_after_.reset();
    write_all(fd, std::string_view(data).substr(0, n), p);
    ::close(fd);
    st.log_dirty = true;
    throw Error(Errc::internal, "injected crash after " + std::to_string(n) + " bytes");
  }
  write_all(fd, data, p);
  if (options_.fsync) ::fsync(fd);
  ::close(fd);
  st.log_size += data.size();
  st.log_dirty = false;
  st.apply(batch, s);
}

std::size_t AnnotationStore::upsert(const std::string& doc_id, int page, std::span<const CellAnnotation> cells,
                                    const std::string& annotator, const std::string& label_set,
                                    int label_set_version) {
  std::vector<AnnotationRecord> records;
  for (const auto& c : cells)
    records.push_back({doc_id, page, c.cell, c.label, annotator, "", label_set, label_set_version});
  return upsert_annotations(records);
}

std::size_t AnnotationStore::upsert_annotations(std::span<const AnnotationRecord> records) {
  // Group by (doc, page) in order of first appearance.
  std::vector<std::pair<std::string, int>> order;
  std::map<std::pair<std::string, int>, std::vector<AnnotationRecord>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.doc_id, r.page);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r);
  }
  // Validate everything before writing anything. Label sets are read first
  // so no document lock is held while taking the registry lock.
  std::map<std::string, LabelSet> sets;
  for (const auto& r : records)
    if (!sets.count(r.label_set)) sets.emplace(r.label_set, label_set(r.label_set));
  for (const auto& key : order) {
    DocState& st = state(key.first);
    std::shared_lock lk(st.mu);
    const Page* p = st.page(key.second);
    if (!p) throw Error(Errc::not_found, "document '" + key.first + "' has no page " + std::to_string(key.second));
    for (const auto& r : groups[key]) {
      if (r.annotator.empty()) throw Error(Errc::invalid_argument, "annotator id is required");
      const LabelSet& ls = sets.at(r.label_set);
      if (r.label_set_version != ls.version)
        throw Error(Errc::conflict, "label set '" + ls.name + "' is at version " + std::to_string(ls.version) +
                                        ", request used " + std::to_string(r.label_set_version));
      if (!ls.contains(r.label)) throw Error(Errc::not_found, "label '" + r.label + "' is not in '" + ls.name + "'");
      if (std::none_of(p->cells.begin(), p->cells.end(), [&](const Cell& c) { return c.id == r.cell; }))
        throw Error(Errc::not_found, "page " + std::to_string(r.page) + " has no cell " + std::to_string(r.cell));
    }
  }
  std::size_t accepted = 0;
  for (const auto& key : order) {
    DocState& st = state(key.first);
    std::unique_lock lk(st.mu);
    auto batch = groups[key];
    const std::string ts = format_timestamp(options_.clock());
    for (auto& r : batch)
      if (r.ts.empty()) r.ts = ts;
    append_batch(st, batch);
    accepted += batch.size();
  }
  return accepted;
}

PageAnnotations AnnotationStore::page_annotations(const std::string& doc_id, int page) const {
  DocState& st = state(doc_id);
  std::shared_lock lk(st.mu);
  const Page* p = st.page(page);
  if (!p) throw Error(Errc::not_found, "document '" + doc_id + "' has no page " + std::to_string(page));
  PageAnnotations out;
  for (const Cell& c : p->cells)
    if (auto it = st.history.find({page, c.id}); it != st.history.end()) out.cells[c.id] = it->second.back();
  out.complete = st.complete(page);
  return out;
}

std::vector<AnnotationRecord> AnnotationStore::history(const std::string& doc_id, int page, int cell) const {
  DocState& st = state(doc_id);
  std::shared_lock lk(st.mu);
  auto it = st.history.find({page, cell});
  if (it == st.history.end()) return {};
  return it->second;
}

SessionStats AnnotationStore::session_stats(const std::string& annotator, const TimeWindow& window) const {
  std::vector<DocState*> states;
  {
    std::lock_guard lk(registry_mu_);
    for (const auto& [id, st] : docs_) states.push_back(st.get());
  }
  std::vector<std::pair<TimePoint, bool>> events;
  for (DocState* st : states) {
    std::shared_lock dl(st->mu);
    for (const auto& e : st->events)
      if (e.annotator == annotator) events.emplace_back(parse_timestamp(e.ts), e.completed);
  }
  if (events.empty()) throw Error(Errc::not_found, "unknown annotator '" + annotator + "'");
  SessionStats s;
  s.annotator = annotator;
  std::optional<TimePoint> first, last;
  for (const auto& [t, completed] : events) {
    if (window.from && t < *window.from) continue;
    if (window.to && t > *window.to) continue;
    if (completed) ++s.pages_completed;
    if (!first || t < *first) first = t;
    if (!last || t > *last) last = t;
  }
  TimePoint from = window.from ? *window.from : first.value_or(TimePoint{});
  TimePoint to = window.to ? *window.to : last.value_or(TimePoint{});
  s.elapsed_minutes = std::max(0.0, std::chrono::duration<double, std::ratio<60>>(to - from).count());
  s.pages_per_minute = s.elapsed_minutes > 0 ? static_cast<double>(s.pages_completed) / s.elapsed_minutes : 0.0;
  return s;
}

Dataset AnnotationStore::export_dataset(const DatasetFilter& filter, const std::string& label_set_name) const {
  const LabelSet ls = label_set(label_set_name);
  std::vector<std::string> ids = filter.doc_ids.empty() ? document_ids() : filter.doc_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Dataset out;
  out.label_names = ls.names();
  for (const auto& id : ids) {
    if (!has_document(id)) continue;
    DocState& st = state(id);
    std::shared_lock lk(st.mu);
    ParsedDocument doc = st.doc;
    doc.pages.clear();
    CellLabels labels;
    for (const Page& p : st.doc.pages) {
      bool full = !p.cells.empty();
      for (const Cell& c : p.cells) {
        auto it = st.history.find({p.number, c.id});
        if (it == st.history.end() || !ls.contains(it->second.back().label)) {
          full = false;
          break;
        }
      }
      if (!full) continue;
      for (const Cell& c : p.cells) labels[{p.number, c.id}] = st.history.at({p.number, c.id}).back().label;
      doc.pages.push_back(p);
    }
    if (doc.pages.empty()) continue;
    out.documents.push_back(std::move(doc));
    out.annotations.push_back(std::move(labels));
  }
  if (out.documents.empty()) throw Error(Errc::empty_selection, "empty selection: no fully annotated pages match");
  return out;
}

void AnnotationStore::compact(const std::string& doc_id) {
  DocState& st = state(doc_id);
  std::unique_lock lk(st.mu);
  // Records are grouped per cell; only the order within a cell matters.
  json hist = json::array();
  for (const auto& [key, recs] : st.history)
    for (const auto& r : recs) hist.push_back(record_json(r));
  json events = json::array();
  for (const auto& e : st.events)
    events.push_back({{"page", e.page}, {"annotator", e.annotator}, {"ts", e.ts}, {"completed", e.completed}});
  json snap{{"seq", st.seq}, {"history", std::move(hist)}, {"events", std::move(events)}};
  write_atomic(st.dir / "snapshot.json", snap.dump(), options_.fsync);
  st.snapshot_seq = st.seq;
  fs::path log = st.dir / "annotations.jsonl";
  if (fs::exists(log)) fs::resize_file(log, 0);
  st.log_size = 0;
  st.log_dirty = false;
}

}  // namespace ccs
