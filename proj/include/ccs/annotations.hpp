#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "ccs/doc_model.hpp"
#include "ccs/features.hpp"

namespace ccs {

struct LabelSet {
  std::string name;
  std::vector<Label> labels;
  int version = 1;

  bool contains(std::string_view label) const;
  std::vector<std::string> names() const;
  bool operator==(const LabelSet&) const = default;
};

/// Unique names, distinct "#rrggbb" colours, at least one label.
void validate_label_set(const LabelSet& ls);
/// Title, Abstract, Authors, Subtitle, Text, Table, Figure.
LabelSet default_label_set();
/// Title, Author, Subtitle, Text, Picture, Table.
LabelSet prb_label_set();

std::string label_set_json(const LabelSet& ls);
LabelSet label_set_from_json(std::string_view text);

struct AnnotationRecord {
  std::string doc_id;
  int page = 0;
  int cell = 0;
  std::string label;
  std::string annotator;
  std::string ts;  // ISO-8601, UTC
  std::string label_set;
  int label_set_version = 0;

  bool operator==(const AnnotationRecord&) const = default;
};

struct CellAnnotation {
  int cell = 0;
  std::string label;
};

struct PageAnnotations {
  std::map<int, AnnotationRecord> cells;  // current record per cell id
  bool complete = false;
};

struct SessionStats {
  std::string annotator;
  std::size_t pages_completed = 0;
  double elapsed_minutes = 0;
  double pages_per_minute = 0;
};

using TimePoint = std::chrono::system_clock::time_point;
std::string format_timestamp(TimePoint t);
/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff]Z". Throws invalid_argument otherwise.
TimePoint parse_timestamp(std::string_view s);

struct TimeWindow {
  std::optional<TimePoint> from, to;
};

struct DatasetFilter {
  std::vector<std::string> doc_ids;  // empty: every document
};

struct Dataset {
  std::vector<ParsedDocument> documents;  // only fully annotated pages
  std::vector<CellLabels> annotations;    // aligned with documents
  std::vector<std::string> label_names;
};

/// Canonical bytes of an exported dataset.
std::string dataset_json(const Dataset& d);

struct StoreOptions {
  std::function<TimePoint()> clock = [] { return std::chrono::system_clock::now(); };
  bool fsync = true;
};

/// File-backed store of documents, label sets and annotations.
///
///   <root>/documents/<source_hash>/document.ccs.json
///   <root>/documents/<source_hash>/annotations.jsonl   committed page batches
///   <root>/documents/<source_hash>/snapshot.json       compacted state
///   <root>/labelsets/<name>.json
///
/// Writes to one document are serialised by that document's lock; readers
/// share it.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path root, StoreOptions options = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  const std::filesystem::path& root() const { return root_; }

  /// Idempotent for identical documents; returns the doc id.
  std::string put_document(const ParsedDocument& doc);
  bool has_document(const std::string& doc_id) const;
  ParsedDocument document(const std::string& doc_id) const;
  std::vector<std::string> document_ids() const;

  std::vector<LabelSet> label_sets() const;
  LabelSet label_set(const std::string& name) const;
  /// Creates a set or replaces it. Replacing requires `expected_version` to
  /// equal the stored version (Errc::conflict otherwise); the result carries
  /// the next version.
  LabelSet put_label_set(const LabelSet& ls, std::optional<int> expected_version);

  /// Applies each page's records all-or-nothing after validating the whole
  /// batch: unknown cells or labels are not_found, a stale label-set version
  /// is a conflict. Returns the number of records accepted.
  std::size_t upsert(const std::string& doc_id, int page, std::span<const CellAnnotation> cells,
                     const std::string& annotator, const std::string& label_set, int label_set_version);
  std::size_t upsert_annotations(std::span<const AnnotationRecord> records);

  PageAnnotations page_annotations(const std::string& doc_id, int page) const;
  std::vector<AnnotationRecord> history(const std::string& doc_id, int page, int cell) const;

  SessionStats session_stats(const std::string& annotator, const TimeWindow& window = {}) const;

  Dataset export_dataset(const DatasetFilter& filter, const std::string& label_set) const;

  /// Folds the log into the snapshot.
  void compact(const std::string& doc_id);

  /// The next log append writes only `bytes` bytes and then fails as if the
  /// process had died. For crash tests.
  void inject_crash_after(std::size_t bytes);

  struct DocState;

 private:
  DocState& state(const std::string& doc_id) const;
  std::filesystem::path doc_dir(const std::string& source_hash) const;
  void load_all();
  void append_batch(DocState& st, const std::vector<AnnotationRecord>& batch);

  std::filesystem::path root_;
  StoreOptions options_;
  mutable std::mutex registry_mu_;  // guards docs_ and label_sets_
  std::map<std::string, std::unique_ptr<DocState>> docs_;
  std::map<std::string, LabelSet> label_sets_;
  std::optional<std::size_t> crash_after_;
};

}  // namespace ccs
