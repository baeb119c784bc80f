#include "ccs/detect.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "ccs/json_io.hpp"

namespace ccs {

namespace {

/// Single-linkage clustering of scalar keys: sorted neighbours closer than
/// `tol` share a cluster. Returns a cluster index per input.
std::vector<int> cluster_1d(const std::vector<double>& keys, double tol) {
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });
  std::vector<int> out(keys.size(), 0);
  int c = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && keys[order[k]] - keys[order[k - 1]] > tol) ++c;
    out[order[k]] = c;
  }
  return out;
}

struct Row {
  double baseline = 0;  // max y0 of the row's cells
  double font_size = 0;
  std::vector<std::size_t> cells;
  std::set<int> columns;
};

void detect_tables(const Page& page, const DetectOptions& opt, std::vector<DetectionRegion>& out) {
  const auto& cells = page.cells;
  std::vector<double> xs, ys;
  for (const auto& c : cells) {
    xs.push_back(c.bbox.x0);
    ys.push_back(c.bbox.y0);
  }
  std::vector<int> col = cluster_1d(xs, opt.column_tolerance);
  std::vector<int> row_of = cluster_1d(ys, opt.row_tolerance);
  int n_rows = row_of.empty() ? 0 : *std::max_element(row_of.begin(), row_of.end()) + 1;
  std::vector<Row> rows(static_cast<std::size_t>(n_rows));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    Row& r = rows[static_cast<std::size_t>(row_of[i])];
    r.baseline = r.cells.empty() ? cells[i].bbox.y0 : std::max(r.baseline, cells[i].bbox.y0);
    r.font_size = std::max(r.font_size, cells[i].font_size);
    r.cells.push_back(i);
    r.columns.insert(col[i]);
  }
  // Cluster ids ascend with y, so walk them backwards: top of page first.
  std::vector<const Row*> block;
  auto flush = [&] {
    std::set<int> columns;
    std::size_t n = 0;
    for (const Row* r : block) {
      columns.insert(r->columns.begin(), r->columns.end());
      n += r->cells.size();
    }
    if (block.size() >= 2 && columns.size() >= 2 && n >= opt.min_table_cells) {
      BBox box = cells[block.front()->cells.front()].bbox;
      for (const Row* r : block)
        for (std::size_t i : r->cells) box = united(box, cells[i].bbox);
      out.push_back({page.number, "table", box, opt.table_confidence});
    }
    block.clear();
  };
  for (int k = n_rows - 1; k >= 0; --k) {
    const Row& r = rows[static_cast<std::size_t>(k)];
    if (r.columns.size() < 2) {
      flush();
      continue;
    }
    if (!block.empty()) {
      const Row& prev = *block.back();
      double fs = std::max(prev.font_size, r.font_size);
      if (prev.baseline - r.baseline > opt.row_gap * fs) flush();
    }
    block.push_back(&r);
  }
  flush();
}

void detect_figures(const Page& page, const DetectOptions& opt, std::vector<DetectionRegion>& out) {
  const auto& cells = page.cells;
  if (cells.size() <= 1) {
    out.push_back({page.number, "figure", page.rect(), opt.figure_confidence});
    return;
  }
  // Vertical coverage blocks, top first.
  struct Block {
    double y0, y1;
    std::size_t count;
  };
  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cells[a].bbox.y1 != cells[b].bbox.y1) return cells[a].bbox.y1 > cells[b].bbox.y1;
    return a < b;
  });
  std::vector<Block> blocks;
  for (std::size_t i : order) {
    const BBox& b = cells[i].bbox;
    if (!blocks.empty() && b.y1 >= blocks.back().y0) {
      blocks.back().y0 = std::min(blocks.back().y0, b.y0);
      ++blocks.back().count;
    } else {
      blocks.push_back({b.y0, b.y1, 1});
    }
  }
  double x0 = cells[0].bbox.x0, x1 = cells[0].bbox.x1;
  for (const auto& c : cells) {
    x0 = std::min(x0, c.bbox.x0);
    x1 = std::max(x1, c.bbox.x1);
  }
  auto emit = [&](double top, double bottom) {
    out.push_back({page.number, "figure", {x0, bottom, x1, top}, opt.figure_confidence});
  };
  for (std::size_t i = 0; i + 1 < blocks.size();) {
    // A single isolated cell may sit inside a band.
    if (i + 2 < blocks.size() && blocks[i + 1].count == 1 &&
        blocks[i].y0 - blocks[i + 2].y1 >= opt.min_band_height) {
      emit(blocks[i].y0, blocks[i + 2].y1);
      i += 2;
    } else {
      if (blocks[i].y0 - blocks[i + 1].y1 >= opt.min_band_height) emit(blocks[i].y0, blocks[i + 1].y1);
      i += 1;
    }
  }
}

double fraction_inside(const BBox& cell, const BBox& region) {
  auto inter = intersection(cell, region);
  if (!inter) return 0;
  double area = cell.area();
  if (area > 0) return std::clamp(inter->area() / area, 0.0, 1.0);
  // Degenerate cell: all or nothing.
  return (cell.x0 >= region.x0 && cell.x1 <= region.x1 && cell.y0 >= region.y0 && cell.y1 <= region.y1) ? 1.0
                                                                                                          : 0.0;
}

}  // namespace

std::vector<DetectionRegion> heuristic_detect(const Page& page, const DetectOptions& options) {
  std::vector<DetectionRegion> out;
  detect_tables(page, options, out);
  detect_figures(page, options, out);
  return out;
}

std::vector<double> overlap_features(const Cell& cell, std::span<const DetectionRegion> regions,
                                     std::span<const std::string> classes) {
  std::vector<double> out(classes.size(), 0.0);
  for (const auto& r : regions) {
    auto it = std::find(classes.begin(), classes.end(), r.cls);
    if (it == classes.end()) continue;
    double conf = std::clamp(r.confidence, 0.0, 1.0);
    auto& slot = out[static_cast<std::size_t>(it - classes.begin())];
    slot = std::max(slot, fraction_inside(cell.bbox, r.bbox) * conf);
  }
  return out;
}

std::vector<DetectionRecord> parse_detection_jsonl(std::string_view text) {
  std::vector<DetectionRecord> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      DetectionRecord r;
      r.doc_id = j.value("doc_id", std::string());
      r.page = j.at("page").get<int>();
      r.cls = j.at("class").get<std::string>();
      r.bbox = bbox_from_json(j.at("bbox"));
      r.confidence = j.at("confidence").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::syntax, "detection line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string detection_jsonl(std::string_view doc_id, std::span<const DetectionRegion> regions) {
  std::string out;
  for (const auto& r : regions) {
    nlohmann::json j{{"doc_id", doc_id}, {"page", r.page}, {"class", r.cls}, {"bbox", to_json(r.bbox)},
                     {"confidence", r.confidence}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<DetectionRegion> import_detections(const ParsedDocument& doc, std::span<const DetectionRecord> records,
                                               std::span<const std::string> classes) {
  std::vector<DetectionRegion> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "detection " + std::to_string(i + 1);
    if (!r.doc_id.empty() && r.doc_id != doc.doc_id)
      throw Error(Errc::invalid_argument, where + ": doc_id '" + r.doc_id + "' does not match '" + doc.doc_id + "'");
    if (r.page < 1 || r.page > static_cast<int>(doc.pages.size()))
      throw Error(Errc::not_found, where + ": unknown page " + std::to_string(r.page));
    if (std::find(classes.begin(), classes.end(), r.cls) == classes.end())
      throw Error(Errc::invalid_argument, where + ": class '" + r.cls + "' is not a detection class");
    if (!(r.confidence >= 0 && r.confidence <= 1))
      throw Error(Errc::invalid_argument, where + ": confidence outside [0,1]");
    const Page& p = doc.pages[static_cast<std::size_t>(r.page - 1)];
    const BBox& b = r.bbox;
    if (!(b.x0 <= b.x1 && b.y0 <= b.y1 && b.x0 >= 0 && b.y0 >= 0 && b.x1 <= p.width && b.y1 <= p.height))
      throw Error(Errc::invalid_argument, where + ": bbox outside page " + std::to_string(r.page));
    out.push_back({r.page, r.cls, b, r.confidence});
  }
  return out;
}

PageRegions detect_document(const ParsedDocument& doc, std::span<const DetectionRegion> imported,
                            const DetectOptions& options) {
  PageRegions out;
  std::set<int> overridden;
  for (const auto& r : imported) {
    out[r.page].push_back(r);
    overridden.insert(r.page);
  }
  for (const auto& p : doc.pages)
    if (!overridden.count(p.number)) out[p.number] = heuristic_detect(p, options);
  return out;
}

}  // namespace ccs
