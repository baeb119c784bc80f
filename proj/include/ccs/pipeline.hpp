#pragma once

#include <atomic>
#include <filesystem>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <span>
#include <vector>

#include "ccs/assemble.hpp"
#include "ccs/error.hpp"
#include "ccs/detect.hpp"
#include "ccs/forest.hpp"
#include "ccs/pdf_parse.hpp"

namespace ccs {

struct TaskFailure {
  std::size_t index = 0;
  std::string message;
};

template <class T>
struct PoolResult {
  std::vector<std::optional<T>> results;  // by task index; empty where the task failed
  std::vector<TaskFailure> failures;      // ascending index

  bool ok() const { return failures.empty(); }
};

/// Runs task(0..n-1) on `workers` threads pulling indices from a shared
/// counter. Results are stored by index, so the outcome does not depend on
/// scheduling. A throwing task is recorded and the others still run.
template <class T>
PoolResult<T> run_pool(std::size_t n, int workers, const std::function<T(std::size_t)>& task) {
  if (workers < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  PoolResult<T> out;
  out.results.resize(n);
  std::vector<std::string> errors(n);
  std::vector<char> failed(n, 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out.results[i].emplace(task(i));
      } catch (const std::exception& e) {
        failed[i] = 1;
        errors[i] = e.what();
      } catch (...) {
        failed[i] = 1;
        errors[i] = "unknown error";
      }
    }
  };
  const auto threads = static_cast<std::size_t>(workers) < n ? static_cast<std::size_t>(workers) : n;
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (failed[i]) out.failures.push_back({i, errors[i]});
  return out;
}

struct ConvertOptions {
  pdf::MergeOptions merge;
  DetectOptions detect;
  AssembleOptions assemble;
  int workers = 1;
};

struct PageOutput {
  Page page;
  std::vector<DetectionRegion> regions;
  std::vector<CellPrediction> predictions;  // by cell id
  std::vector<std::string> warnings;
};

struct Conversion {
  ParsedDocument document;
  DocumentPredictions predictions;
  CellLabels labels;
  StructuredDocument structured;
  std::vector<pdf::ParseWarning> warnings;
  std::string error;                       // document-level failure (load)
  std::vector<TaskFailure> page_failures;  // index = 0-based page, message names the page

  /// On failure `document` and `predictions` keep the pages that succeeded
  /// and `structured` stays empty.
  bool ok() const { return error.empty() && page_failures.empty(); }
};

/// Predicts every cell of one page. `total_pages` feeds the page-position
/// features; `imported` overrides the heuristic detector when non-empty.
PageOutput classify_page(const Page& page, const std::string& doc_id, int total_pages, const ForestModel& model,
                         std::span<const DetectionRegion> imported, const DetectOptions& detect);

CellLabels labels_of(const ParsedDocument& doc, const DocumentPredictions& predictions);

/// Parse, detect, predict and assemble with pages as the unit of parallel
/// work. A failing page is reported in page_failures; the rest still run.
Conversion convert_pdf(std::string_view pdf_bytes, const ForestModel& model, const ConvertOptions& options,
                       std::span<const DetectionRegion> imported = {});
Conversion convert_document(const ParsedDocument& doc, const ForestModel& model, const ConvertOptions& options,
                            std::span<const DetectionRegion> imported = {});

/// Converts many PDFs, spreading all of their pages over one pool.
std::vector<Conversion> convert_corpus(std::span<const std::string> pdfs, const ForestModel& model,
                                       const ConvertOptions& options);

/// Trains on every annotated cell of `docs`, using the heuristic detector
/// for the overlap features. Throws empty_selection when nothing is labelled.
ForestModel train_documents(std::span<const ParsedDocument> docs, std::span<const CellLabels> annotations,
                            std::span<const std::string> label_names, const ForestParams& params,
                            const DetectOptions& detect = {}, int workers = 1);

/// {"doc_id": ..., "labels": [{"page", "cell", "label"}, ...]}, sorted.
std::string cell_labels_json(const std::string& doc_id, const CellLabels& labels);
CellLabels cell_labels_from_json(std::string_view text);

/// A directory of `<id>.ccs.json` documents with optional `<id>.labels.json`
/// and `<id>.pdf` siblings, read in file-name order.
struct CorpusDir {
  std::vector<ParsedDocument> documents;
  std::vector<CellLabels> annotations;  // empty map where no labels file exists
  std::vector<std::string> pdfs;        // bytes; empty where no pdf exists
};
CorpusDir read_corpus_dir(const std::filesystem::path& dir);
/// Writes the synthetic corpus in the layout read_corpus_dir expects.
void write_corpus_dir(const std::filesystem::path& dir, std::span<const ParsedDocument> docs,
                      std::span<const CellLabels> labels, std::span<const std::string> pdfs);

struct ThroughputSample {
  int workers = 0;
  std::size_t pages = 0;
  double seconds = 0;
  double pages_per_second = 0;
};

/// End-to-end pages/sec per worker count. Needs at least `min_pages` pages.
std::vector<ThroughputSample> benchmark_throughput(std::span<const std::string> pdfs, const ForestModel& model,
                                                   std::span<const int> worker_counts,
                                                   const ConvertOptions& options = {}, std::size_t min_pages = 200);

std::string throughput_csv(std::span<const ThroughputSample> samples);

}  // namespace ccs
