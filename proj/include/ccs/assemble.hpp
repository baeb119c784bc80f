#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccs/doc_model.hpp"
#include "ccs/features.hpp"

namespace ccs {

struct AssembleOptions {
  double min_gap = 12;        // XY-cut: narrower whitespace never splits
  double max_merge_gap = 24;  // Table/Picture cells further apart stay separate
};

/// Node of an XY-cut tree. `cells` holds input positions: all of them for a
/// leaf, none for an inner node.
struct XYNode {
  enum class Cut { none, vertical, horizontal };
  Cut cut = Cut::none;
  double at = 0;  // x of a vertical cut, y of a horizontal one
  std::vector<std::size_t> cells;
  std::vector<XYNode> children;  // left then right, or top then bottom
};

/// Recursive XY-cut. A node is split at the widest whitespace gap wider than
/// `min_gap` in the x projection; failing that, in the y projection.
XYNode xy_cut(std::span<const Cell> cells, double min_gap = 12);

/// Cell ids in reading order: XY-cut leaves in tree order, each leaf sorted by
/// descending y0, then ascending x0.
std::vector<int> reading_order(std::span<const Cell> cells, double min_gap = 12);

/// Walks pages in order and each page in reading order, merging consecutive
/// cells of one label on one page into an element. Throws invalid_argument
/// for an unlabelled cell.
StructuredDocument assemble(const ParsedDocument& doc, const CellLabels& labels, const AssembleOptions& options = {});

/// "json" (canonical) or "markdown"; anything else is invalid_argument.
std::string export_structured(const StructuredDocument& sd, std::string_view format);

}  // namespace ccs
