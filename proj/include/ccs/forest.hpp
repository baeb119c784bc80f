#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccs/features.hpp"

namespace ccs {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 20;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0: ceil(sqrt(n_features))
  std::uint64_t seed = 0;
  bool bootstrap = true;

  bool operator==(const ForestParams&) const = default;
};

/// Internal when feature >= 0 (value <= threshold goes left), otherwise a
/// leaf holding one count per label.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  std::uint32_t left = 0, right = 0;
  std::vector<std::uint32_t> counts;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Preorder node array; node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;
  bool operator==(const Tree&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  FeatureSchema schema;
  std::vector<std::string> labels;
  ForestParams params;
  std::uint64_t n_rows = 0;
  std::int64_t timestamp = 0;  // seconds since the epoch; 0 keeps files reproducible

  bool operator==(const ForestModel&) const = default;
};

struct TrainData {
  std::span<const double> x;  // row-major
  std::size_t n_rows = 0;
  std::span<const int> y;
};

/// Throws invalid_argument for an empty matrix, misaligned labels, labels out
/// of range or bad hyperparameters. `workers` only affects speed.
ForestModel train(TrainData data, const FeatureSchema& schema, std::span<const std::string> labels,
                  const ForestParams& params, int workers = 1);
ForestModel train(const FeatureMatrix& m, const ForestParams& params, int workers = 1);

/// Grows one tree on `rows` (indices into data, duplicates allowed).
Tree grow_tree(TrainData data, std::size_t n_features, std::size_t n_labels, std::span<const std::uint32_t> rows,
               const ForestParams& params, std::uint64_t seed);

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;
};

/// Throws schema_mismatch when the vector length differs from the schema.
Prediction predict(const ForestModel& model, std::span<const double> vector);

struct CellPrediction {
  std::string label;
  double confidence = 0;
};

/// Page index -> cell id -> prediction.
using DocumentPredictions = std::vector<std::vector<CellPrediction>>;

/// Throws schema_mismatch when the model was trained against another
/// feature schema version.
DocumentPredictions predict_document(const ForestModel& model, const ParsedDocument& doc,
                                     const PageRegions& regions);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string save_model(const ForestModel& model);
/// Throws version for an unknown format version and checksum for truncated
/// or corrupted bytes.
ForestModel load_model(std::string_view bytes);

/// Human-readable dump of the trees.
std::string model_debug_json(const ForestModel& model);

/// Gini impurity of a count histogram.
double gini(std::span<const std::uint32_t> counts);

}  // namespace ccs
