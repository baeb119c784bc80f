#include "ccs/assemble.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "ccs/json_io.hpp"

namespace ccs {

namespace {

struct Gap {
  double lo = 0, hi = 0;
  double width() const { return hi - lo; }
};

// Widest gap between the merged [a, b] projections; ties keep the lowest.
std::optional<Gap> widest_gap(std::span<const Cell> cells, const std::vector<std::size_t>& idx, bool along_x) {
  std::vector<std::pair<double, double>> iv;
  iv.reserve(idx.size());
  for (auto i : idx) {
    const BBox& b = cells[i].bbox;
    iv.emplace_back(along_x ? b.x0 : b.y0, along_x ? b.x1 : b.y1);
  }
  std::sort(iv.begin(), iv.end());
  std::optional<Gap> best;
  double end = iv.front().second;
  for (std::size_t i = 1; i < iv.size(); ++i) {
    if (iv[i].first > end && (!best || iv[i].first - end > best->width())) best = Gap{end, iv[i].first};
    end = std::max(end, iv[i].second);
  }
  return best;
}

XYNode cut(std::span<const Cell> cells, std::vector<std::size_t> idx, double min_gap) {
  XYNode node;
  if (idx.size() > 1) {
    for (bool along_x : {true, false}) {
      auto g = widest_gap(cells, idx, along_x);
      if (!g || !(g->width() > min_gap)) continue;
      node.cut = along_x ? XYNode::Cut::vertical : XYNode::Cut::horizontal;
      node.at = (g->lo + g->hi) / 2;
      std::vector<std::size_t> low, high;
      for (auto i : idx) {
        const BBox& b = cells[i].bbox;
        ((along_x ? b.x1 : b.y1) <= g->lo ? low : high).push_back(i);
      }
      // Reading goes left to right, and top to bottom.
      if (along_x) {
        node.children.push_back(cut(cells, std::move(low), min_gap));
        node.children.push_back(cut(cells, std::move(high), min_gap));
      } else {
        node.children.push_back(cut(cells, std::move(high), min_gap));
        node.children.push_back(cut(cells, std::move(low), min_gap));
      }
      return node;
    }
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const Cell &ca = cells[a], &cb = cells[b];
    if (ca.bbox.y0 != cb.bbox.y0) return ca.bbox.y0 > cb.bbox.y0;
    if (ca.bbox.x0 != cb.bbox.x0) return ca.bbox.x0 < cb.bbox.x0;
    return ca.id < cb.id;
  });
  node.cells = std::move(idx);
  return node;
}

void leaves(const XYNode& n, std::span<const Cell> cells, std::vector<int>& out) {
  for (auto i : n.cells) out.push_back(cells[i].id);
  for (const auto& c : n.children) leaves(c, cells, out);
}

double box_gap(const BBox& a, const BBox& b) {
  double dx = std::max({0.0, a.x0 - b.x1, b.x0 - a.x1});
  double dy = std::max({0.0, a.y0 - b.y1, b.y0 - a.y1});
  return std::max(dx, dy);
}

std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, quantize(v));
  return std::string(buf, r.ptr);
}

}  // namespace

XYNode xy_cut(std::span<const Cell> cells, double min_gap) {
  std::vector<std::size_t> idx(cells.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (idx.empty()) return {};
  return cut(cells, std::move(idx), min_gap);
}

std::vector<int> reading_order(std::span<const Cell> cells, double min_gap) {
  std::vector<int> out;
  out.reserve(cells.size());
  leaves(xy_cut(cells, min_gap), cells, out);
  return out;
}

StructuredDocument assemble(const ParsedDocument& doc, const CellLabels& labels, const AssembleOptions& options) {
  StructuredDocument sd;
  sd.doc_id = doc.doc_id;
  for (const Page& page : doc.pages) {
    std::map<int, const Cell*> by_id;
    for (const Cell& c : page.cells) by_id[c.id] = &c;
    bool open = false;
    for (int id : reading_order(page.cells, options.min_gap)) {
      const Cell& c = *by_id.at(id);
      auto it = labels.find({page.number, id});
      if (it == labels.end())
        throw Error(Errc::invalid_argument,
                    "page " + std::to_string(page.number) + ", cell " + std::to_string(id) + " has no label");
      const std::string& label = it->second;
      bool merge = open && sd.elements.back().label == label;
      if (merge && (label == "Table" || label == "Picture" || label == "Figure"))
        merge = box_gap(sd.elements.back().bbox, c.bbox) <= options.max_merge_gap;
      if (merge) {
        StructuredElement& e = sd.elements.back();
        if (!c.text.empty()) e.text += (e.text.empty() ? "" : " ") + c.text;
        e.bbox = united(e.bbox, c.bbox);
        e.source_cell_ids.push_back(id);
      } else {
        sd.elements.push_back(StructuredElement{label, c.text, page.number, c.bbox, {id}});
        open = true;
      }
    }
  }
  return sd;
}

std::string export_structured(const StructuredDocument& sd, std::string_view format) {
  if (format == "json") return to_json(sd).dump();
  if (format != "markdown" && format != "md")
    throw Error(Errc::invalid_argument, "unknown export format '" + std::string(format) + "'");
  std::string out;
  for (const auto& e : sd.elements) {
    if (!out.empty()) out += "\n";
    if (e.label == "Title")
      out += "# " + e.text;
    else if (e.label == "Subtitle")
      out += "## " + e.text;
    else if (e.label == "Table" || e.label == "Picture" || e.label == "Figure")
      out += "[" + e.label + ": page " + std::to_string(e.page) + ", bbox " + num(e.bbox.x0) + " " + num(e.bbox.y0) +
             " " + num(e.bbox.x1) + " " + num(e.bbox.y1) + "]";
    else
      out += e.text;
    out += "\n";
  }
  return out;
}

}  // namespace ccs
