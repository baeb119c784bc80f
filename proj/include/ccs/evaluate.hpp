#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccs/detect.hpp"
#include "ccs/features.hpp"
#include "ccs/forest.hpp"

namespace ccs {

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint64_t>> counts;  // [true][predicted]

  explicit ConfusionMatrix(std::vector<std::string> labels = {});
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> predicted,
                          std::span<const std::string> label_names);
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::span<const std::string> label_names);

/// Percentage with two decimals, held exactly as hundredths of a percent.
struct Percent {
  std::int64_t hundredths = 0;

  /// 100 * num / den rounded half-up to two decimals.
  static Percent ratio(std::uint64_t num, std::uint64_t den);
  double value() const { return static_cast<double>(hundredths) / 100.0; }
  std::string str() const;
  bool operator==(const Percent&) const = default;
};

struct LabelMetrics {
  std::string label;
  std::optional<Percent> recall;     // absent when the row is empty
  std::optional<Percent> precision;  // absent when the column is empty
};

std::vector<LabelMetrics> recall_precision(const ConfusionMatrix& m);

struct PublishedMetrics {
  ConfusionMatrix matrix;
  std::vector<Percent> recall, precision;  // as printed
};

/// Confusion counts and printed Recall/Precision rows of the Physical Review B
/// evaluation in the CCS paper.
const PublishedMetrics& published_prb_metrics();

struct Discrepancy {
  std::string label;
  std::string metric;  // "recall" or "precision"
  Percent computed, published;
};

/// Entries whose computed value differs from the printed one by more than
/// `tolerance` hundredths.
std::vector<Discrepancy> compare_metrics(std::span<const LabelMetrics> computed, const PublishedMetrics& published,
                                         std::int64_t tolerance = 1);

/// Item positions per fold: a seeded Fisher-Yates shuffle dealt round-robin,
/// so fold sizes differ by at most one. Throws invalid_argument for k < 2 or
/// k > n_items.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n_items, int k, std::uint64_t seed);

struct PageKey {
  std::size_t doc = 0;  // index into the corpus
  int page = 0;
  bool operator==(const PageKey&) const = default;
};

struct FoldResult {
  std::vector<PageKey> test_pages;
  ConfusionMatrix matrix;
};

struct EvalReport {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> labels;
  std::vector<FoldResult> folds;
  ConfusionMatrix aggregate;
  std::vector<LabelMetrics> metrics;
};

struct CrossValidationOptions {
  int k = 10;
  std::uint64_t seed = 42;  // fold assignment
  ForestParams forest;
  DetectOptions detect;
  int workers = 1;
};

/// Folds by page. Every cell of every page must be annotated with one of
/// `label_names`.
EvalReport cross_validate(std::span<const ParsedDocument> corpus, std::span<const CellLabels> annotations,
                          std::span<const std::string> label_names, const CrossValidationOptions& options);

std::string report_json(const EvalReport& report);
/// Confusion matrix with Recall and Precision rows, laid out like the paper.
std::string render_table(const ConfusionMatrix& m, std::span<const LabelMetrics> metrics);

}  // namespace ccs
