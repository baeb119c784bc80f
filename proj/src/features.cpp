#include "ccs/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace ccs {

namespace {

bool overlaps(double a0, double a1, double b0, double b1) { return a0 < b1 && b0 < a1; }

std::vector<double> feature_values(const ParsedDocument& doc, const Page& page, const Cell& cell,
                                   const NeighborDistances& d, std::span<const DetectionRegion> regions,
                                   const FeatureSchema& schema) {
  const BBox& b = cell.bbox;
  std::vector<double> v{static_cast<double>(page.number),
                        static_cast<double>(doc.total_pages - page.number),
                        b.width(),
                        b.height(),
                        page.width,
                        page.height,
                        b.x0,
                        b.y0,
                        b.x1,
                        b.y1,
                        d.left,
                        d.right,
                        d.top,
                        d.bottom,
                        cell.style == TextStyle::normal ? 1.0 : 0.0,
                        cell.style == TextStyle::italic ? 1.0 : 0.0,
                        cell.style == TextStyle::bold ? 1.0 : 0.0};
  auto det = overlap_features(cell, regions, schema.detection_classes);
  v.insert(v.end(), det.begin(), det.end());
  for (auto& x : v)
    if (!std::isfinite(x)) x = 0;
  return v;
}

std::span<const DetectionRegion> regions_of(const PageRegions& regions, int page) {
  auto it = regions.find(page);
  if (it == regions.end()) return {};
  return it->second;
}

}  // namespace

FeatureSchema make_feature_schema(std::span<const std::string> detection_classes) {
  FeatureSchema s;
  s.names = {"page_number", "inverse_page_number", "cell_width", "cell_height", "page_width", "page_height",
             "x0",          "y0",                  "x1",         "y1",          "d_left",     "d_right",
             "d_top",       "d_bottom",            "style_normal", "style_italic", "style_bold"};
  for (const auto& c : detection_classes) {
    s.names.push_back("det_" + c);
    s.detection_classes.push_back(c);
  }
  return s;
}

NeighborDistances nearest_neighbor_distances(const Cell& cell, std::span<const Cell> cells, double sentinel) {
  NeighborDistances d{sentinel, sentinel, sentinel, sentinel};
  const BBox& c = cell.bbox;
  for (const auto& o : cells) {
    if (o.id == cell.id) continue;
    const BBox& b = o.bbox;
    if (overlaps(b.y0, b.y1, c.y0, c.y1)) {
      if (b.x1 <= c.x0) d.left = std::min(d.left, c.x0 - b.x1);
      if (b.x0 >= c.x1) d.right = std::min(d.right, b.x0 - c.x1);
    }
    if (overlaps(b.x0, b.x1, c.x0, c.x1)) {
      if (b.y0 >= c.y1) d.top = std::min(d.top, b.y0 - c.y1);
      if (b.y1 <= c.y0) d.bottom = std::min(d.bottom, c.y0 - b.y1);
    }
  }
  return d;
}

std::vector<NeighborDistances> page_neighbor_distances(const Page& page) {
  const auto& cells = page.cells;
  const std::size_t n = cells.size();
  const double sentinel = page.width + page.height;
  std::vector<NeighborDistances> out(n, NeighborDistances{sentinel, sentinel, sentinel, sentinel});

  // For each side, candidates sorted by the facing edge. Walking outward from
  // the cell, the first orthogonally overlapping candidate is the nearest.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto sorted_by = [&](auto key) {
    std::vector<std::size_t> v = idx;
    std::stable_sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    std::vector<double> keys(n);
    for (std::size_t k = 0; k < n; ++k) keys[k] = key(v[k]);
    return std::pair{v, keys};
  };
  auto [by_x1, x1s] = sorted_by([&](std::size_t i) { return cells[i].bbox.x1; });
  auto [by_x0, x0s] = sorted_by([&](std::size_t i) { return cells[i].bbox.x0; });
  auto [by_y1, y1s] = sorted_by([&](std::size_t i) { return cells[i].bbox.y1; });
  auto [by_y0, y0s] = sorted_by([&](std::size_t i) { return cells[i].bbox.y0; });

  for (std::size_t i = 0; i < n; ++i) {
    const BBox& c = cells[i].bbox;
    // left: other.x1 <= c.x0, scan descending x1
    for (auto k = std::upper_bound(x1s.begin(), x1s.end(), c.x0) - x1s.begin(); k-- > 0;) {
      const BBox& b = cells[by_x1[static_cast<std::size_t>(k)]].bbox;
      if (by_x1[static_cast<std::size_t>(k)] != i && overlaps(b.y0, b.y1, c.y0, c.y1)) {
        out[i].left = c.x0 - b.x1;
        break;
      }
    }
    for (auto k = std::lower_bound(x0s.begin(), x0s.end(), c.x1) - x0s.begin(); k < static_cast<long>(n); ++k) {
      const BBox& b = cells[by_x0[static_cast<std::size_t>(k)]].bbox;
      if (by_x0[static_cast<std::size_t>(k)] != i && overlaps(b.y0, b.y1, c.y0, c.y1)) {
        out[i].right = b.x0 - c.x1;
        break;
      }
    }
    for (auto k = std::lower_bound(y0s.begin(), y0s.end(), c.y1) - y0s.begin(); k < static_cast<long>(n); ++k) {
      const BBox& b = cells[by_y0[static_cast<std::size_t>(k)]].bbox;
      if (by_y0[static_cast<std::size_t>(k)] != i && overlaps(b.x0, b.x1, c.x0, c.x1)) {
        out[i].top = b.y0 - c.y1;
        break;
      }
    }
    for (auto k = std::upper_bound(y1s.begin(), y1s.end(), c.y0) - y1s.begin(); k-- > 0;) {
      const BBox& b = cells[by_y1[static_cast<std::size_t>(k)]].bbox;
      if (by_y1[static_cast<std::size_t>(k)] != i && overlaps(b.x0, b.x1, c.x0, c.x1)) {
        out[i].bottom = c.y0 - b.y1;
        break;
      }
    }
  }
  return out;
}

FeatureVector extract_features(const ParsedDocument& doc, const Page& page, const Cell& cell,
                               std::span<const DetectionRegion> regions, const FeatureSchema& schema) {
  if (page.number < 1 || page.number > static_cast<int>(doc.pages.size()) ||
      doc.pages[static_cast<std::size_t>(page.number - 1)].cells.size() != page.cells.size())
    throw Error(Errc::invalid_argument, "page " + std::to_string(page.number) + " is not part of document " + doc.doc_id);
  if (cell.id < 0 || cell.id >= static_cast<int>(page.cells.size()) ||
      !(page.cells[static_cast<std::size_t>(cell.id)] == cell))
    throw Error(Errc::invalid_argument,
                "cell " + std::to_string(cell.id) + " is not on page " + std::to_string(page.number));
  auto d = nearest_neighbor_distances(cell, page.cells, page.width + page.height);
  return {feature_values(doc, page, cell, d, regions, schema), doc.doc_id, {page.number, cell.id}};
}

FeatureMatrix build_matrix(const ParsedDocument& doc, const PageRegions& regions, const FeatureSchema& schema,
                           const CellLabels* labels, std::span<const std::string> label_names) {
  FeatureMatrix m;
  m.schema = schema;
  m.label_names.assign(label_names.begin(), label_names.end());
  if (labels) {
    for (const auto& [ref, name] : *labels) {
      if (ref.page < 1 || ref.page > static_cast<int>(doc.pages.size()) || ref.cell < 0 ||
          ref.cell >= static_cast<int>(doc.pages[static_cast<std::size_t>(ref.page - 1)].cells.size()))
        throw Error(Errc::not_found, "annotation for missing cell " + std::to_string(ref.cell) + " on page " +
                                         std::to_string(ref.page));
      if (std::find(label_names.begin(), label_names.end(), name) == label_names.end())
        throw Error(Errc::not_found, "unknown label '" + name + "'");
    }
  }
  for (const auto& page : doc.pages) {
    auto dist = page_neighbor_distances(page);
    auto regs = regions_of(regions, page.number);
    for (const auto& cell : page.cells) {
      CellRef ref{page.number, cell.id};
      const std::string* label = nullptr;
      if (labels) {
        auto it = labels->find(ref);
        if (it == labels->end()) continue;
        label = &it->second;
      }
      auto v = feature_values(doc, page, cell, dist[static_cast<std::size_t>(cell.id)], regs, schema);
      m.values.insert(m.values.end(), v.begin(), v.end());
      m.refs.push_back(ref);
      if (label)
        m.labels.push_back(static_cast<int>(std::find(label_names.begin(), label_names.end(), *label) -
                                            label_names.begin()));
      ++m.n_rows;
    }
  }
  return m;
}

std::string feature_csv(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.schema.names.size(); ++i) out += (i ? "," : "") + m.schema.names[i];
  const bool labelled = !m.labels.empty();
  if (labelled) out += ",label";
  out += "\n";
  char buf[32];
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    auto row = m.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      auto res = std::to_chars(buf, buf + sizeof buf, row[i]);
      out.append(buf, res.ptr);
    }
    if (labelled) out += "," + m.label_names[static_cast<std::size_t>(m.labels[r])];
    out += "\n";
  }
  return out;
}

}  // namespace ccs
