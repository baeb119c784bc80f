#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccs/doc_model.hpp"

namespace ccs {

struct DetectionRegion {
  int page = 1;
  std::string cls;
  BBox bbox;
  double confidence = 0;

  bool operator==(const DetectionRegion&) const = default;
};

inline const std::vector<std::string>& default_detection_classes() {
  static const std::vector<std::string> classes{"table", "figure"};
  return classes;
}

struct DetectOptions {
  double column_tolerance = 5;  // x0 linkage for table columns
  double row_tolerance = 3;     // baseline linkage for table rows
  double row_gap = 3;           // max baseline gap between table rows, in font sizes
  std::size_t min_table_cells = 6;
  double min_band_height = 120;
  double table_confidence = 0.5;
  double figure_confidence = 0.3;
};

/// Grid-like cell groups become "table" regions; tall empty horizontal bands
/// between text blocks become "figure" regions. Pages with at most one cell
/// yield a single figure region covering the page.
std::vector<DetectionRegion> heuristic_detect(const Page& page, const DetectOptions& options = {});

/// Per class (in `classes` order): max over that class's regions of the
/// fraction of the cell's area inside the region, times its confidence.
std::vector<double> overlap_features(const Cell& cell, std::span<const DetectionRegion> regions,
                                     std::span<const std::string> classes = default_detection_classes());

struct DetectionRecord {
  std::string doc_id;
  int page = 0;
  std::string cls;
  BBox bbox;
  double confidence = 0;
};

/// One JSON object per line; blank lines are ignored. Errors name the line.
std::vector<DetectionRecord> parse_detection_jsonl(std::string_view text);
std::string detection_jsonl(std::string_view doc_id, std::span<const DetectionRegion> regions);

/// Validates records against the document and returns them as regions.
/// Throws not_found for pages the document does not have and
/// invalid_argument for foreign doc ids, unknown classes, confidences outside
/// [0,1] or boxes outside the page.
std::vector<DetectionRegion> import_detections(const ParsedDocument& doc, std::span<const DetectionRecord> records,
                                               std::span<const std::string> classes = default_detection_classes());

using PageRegions = std::map<int, std::vector<DetectionRegion>>;

/// Regions for every page: imported ones where a page has any, the
/// heuristic elsewhere.
PageRegions detect_document(const ParsedDocument& doc, std::span<const DetectionRegion> imported = {},
                            const DetectOptions& options = {});

}  // namespace ccs
