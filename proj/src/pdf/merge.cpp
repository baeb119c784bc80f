#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ccs/pdf_parse.hpp"

namespace ccs::pdf {

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool mergeable(const GlyphRun& a, const GlyphRun& b, const MergeOptions& opt) {
  if (a.rotated || b.rotated || a.style != b.style) return false;
  double fs = std::max(a.font_size, b.font_size);
  if (std::fabs(a.bbox.y0 - b.bbox.y0) > opt.baseline_tolerance * fs) return false;
  double gap = std::max(a.bbox.x0, b.bbox.x0) - std::min(a.bbox.x1, b.bbox.x1);
  return gap <= opt.gap_tolerance * fs;
}

bool ends_with_space(const std::string& s) { return !s.empty() && (s.back() == ' ' || s.back() == '\t'); }

}  // namespace

std::vector<Cell> merge_glyph_runs(std::span<const GlyphRun> runs, const Page& page,
                                   const MergeOptions& opt, std::vector<std::string>* warnings) {
  // Usable runs only: finite, positive size, some visible text.
  std::vector<const GlyphRun*> usable;
  usable.reserve(runs.size());
  double max_fs = 0;
  for (const auto& r : runs) {
    if (!(r.font_size > 0) || !std::isfinite(r.bbox.x0) || !std::isfinite(r.bbox.x1) ||
        !std::isfinite(r.bbox.y0) || !std::isfinite(r.bbox.y1) || !std::isfinite(r.font_size))
      continue;
    if (r.rotated && warnings) warnings->push_back("rotated text '" + r.text + "' kept with its axis-aligned box");
    usable.push_back(&r);
    max_fs = std::max(max_fs, r.font_size);
  }

  // Candidate pairs come from a baseline sweep; the relation itself is
  // symmetric, so components do not depend on input order.
  std::vector<std::size_t> by_y(usable.size());
  std::iota(by_y.begin(), by_y.end(), 0);
  std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) {
    return usable[a]->bbox.y0 < usable[b]->bbox.y0;
  });
  DisjointSet sets(usable.size());
  const double window = opt.baseline_tolerance * max_fs;
  for (std::size_t i = 0; i < by_y.size(); ++i) {
    const GlyphRun& a = *usable[by_y[i]];
    for (std::size_t j = i + 1; j < by_y.size(); ++j) {
      const GlyphRun& b = *usable[by_y[j]];
      if (b.bbox.y0 - a.bbox.y0 > window) break;
      if (mergeable(a, b, opt)) sets.unite(by_y[i], by_y[j]);
    }
  }

  std::vector<std::vector<const GlyphRun*>> groups(usable.size());
  for (std::size_t i = 0; i < usable.size(); ++i) groups[sets.find(i)].push_back(usable[i]);

  const BBox page_rect = page.rect();
  std::vector<Cell> cells;
  for (auto& g : groups) {
    if (g.empty()) continue;
    std::sort(g.begin(), g.end(), [](const GlyphRun* a, const GlyphRun* b) {
      if (a->bbox.x0 != b->bbox.x0) return a->bbox.x0 < b->bbox.x0;
      if (a->bbox.y0 != b->bbox.y0) return a->bbox.y0 < b->bbox.y0;
      return a->text < b->text;
    });
    Cell cell;
    cell.bbox = g.front()->bbox;
    cell.style = g.front()->style;
    double prev_x1 = g.front()->bbox.x0;
    bool first = true;
    for (const GlyphRun* r : g) {
      cell.bbox = united(cell.bbox, r->bbox);
      cell.font_size = std::max(cell.font_size, r->font_size);
      if (!first && r->bbox.x0 - prev_x1 > opt.word_space * r->font_size && !ends_with_space(cell.text) &&
          !(r->text.size() && r->text.front() == ' '))
        cell.text.push_back(' ');
      cell.text += r->text;
      prev_x1 = std::max(prev_x1, r->bbox.x1);
      first = false;
    }
    std::string trimmed(trim(cell.text));
    if (trimmed.empty()) continue;
    cell.text = std::move(trimmed);

    auto clipped = intersection(cell.bbox, page_rect);
    if (!clipped || (clipped->area() <= 0 && cell.bbox.area() > 0)) {
      if (warnings) warnings->push_back("text '" + cell.text + "' lies outside the page; dropped");
      continue;
    }
    if (!(*clipped == cell.bbox)) {
      if (warnings) warnings->push_back("text '" + cell.text + "' clamped to the page");
      cell.bbox = *clipped;
    }
    cell.bbox = {quantize(cell.bbox.x0), quantize(cell.bbox.y0), quantize(cell.bbox.x1), quantize(cell.bbox.y1)};
    cell.font_size = quantize(cell.font_size);
    if (!(cell.font_size > 0)) continue;
    cells.push_back(std::move(cell));
  }

  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return std::tie(b.bbox.y1, a.bbox.x0, b.bbox.y0, a.bbox.x1, a.text, a.style, a.font_size) <
           std::tie(a.bbox.y1, b.bbox.x0, a.bbox.y0, b.bbox.x1, b.text, b.style, b.font_size);
  });
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].id = static_cast<int>(i);
  return cells;
}

}  // namespace ccs::pdf
