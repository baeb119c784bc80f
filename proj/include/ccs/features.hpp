#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccs/detect.hpp"
#include "ccs/doc_model.hpp"

namespace ccs {

inline constexpr const char* kFeatureSchemaVersion = "ccs-features/1";

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<std::string> detection_classes;
  std::string version = kFeatureSchemaVersion;

  std::size_t size() const { return names.size(); }
  bool operator==(const FeatureSchema&) const = default;
};

/// page_number, inverse_page_number, cell/page sizes, position, neighbour
/// distances, one-hot style, then one column per detection class.
FeatureSchema make_feature_schema(std::span<const std::string> detection_classes = default_detection_classes());

struct CellRef {
  int page = 0;
  int cell = 0;
  bool operator==(const CellRef&) const = default;
  auto operator<=>(const CellRef&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::string doc_id;
  CellRef ref;
};

struct NeighborDistances {
  double left = 0, right = 0, top = 0, bottom = 0;
  bool operator==(const NeighborDistances&) const = default;
};

/// Edge-to-edge distance to the closest cell strictly on each side whose
/// orthogonal interval overlaps the cell's; `sentinel` where there is none.
/// The cell itself (same id) is skipped.
NeighborDistances nearest_neighbor_distances(const Cell& cell, std::span<const Cell> cells, double sentinel);

/// Same result for every cell of a page at once, via sorted sweeps.
std::vector<NeighborDistances> page_neighbor_distances(const Page& page);

/// Throws invalid_argument when the cell is not on the page or the page is
/// not part of the document.
FeatureVector extract_features(const ParsedDocument& doc, const Page& page, const Cell& cell,
                               std::span<const DetectionRegion> regions, const FeatureSchema& schema);

struct FeatureMatrix {
  FeatureSchema schema;
  std::size_t n_rows = 0;
  std::vector<double> values;  // row-major, n_rows x schema.size()
  std::vector<CellRef> refs;
  std::vector<int> labels;  // indices into label_names; empty when unlabeled
  std::vector<std::string> label_names;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * schema.size(), schema.size()};
  }
};

/// (page, cell) -> label name.
using CellLabels = std::map<CellRef, std::string>;

/// One row per cell, page-major then cell id. With `labels`, only labelled
/// cells are kept and every label must be one of `label_names`.
FeatureMatrix build_matrix(const ParsedDocument& doc, const PageRegions& regions,
                           const FeatureSchema& schema = make_feature_schema(),
                           const CellLabels* labels = nullptr,
                           std::span<const std::string> label_names = {});

/// Header = schema names (+ "label" when labelled), one line per row.
std::string feature_csv(const FeatureMatrix& m);

}  // namespace ccs
