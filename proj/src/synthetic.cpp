#include "ccs/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <tuple>

#include "ccs/pdf_parse.hpp"
#include "ccs/random.hpp"

namespace ccs {

namespace {

constexpr const char* kWords[] = {
    "spin",     "lattice", "phonon",  "band",    "gap",      "energy",  "field",    "magnetic", "density",
    "state",    "model",   "quantum", "orbital", "coupling", "phase",   "order",    "charge",   "electron",
    "transport", "we",     "the",     "of",      "and",      "in",      "is",       "with",     "at",
    "results",  "show",    "strong",  "weak",    "thermal",  "surface", "symmetry", "crystal",  "wave",
    "measured", "low",     "high",    "temperature"};
constexpr const char* kNames[] = {"A. Smith", "B. Chen",   "C. Novak", "D. Okafor", "E. Rossi",
                                  "F. Tanaka", "G. Meyer", "H. Kumar", "I. Larsen", "J. Silva"};

double round2(double v) { return std::round(v * 100) / 100; }

class Layout {
 public:
  Layout(const TemplateSpec& s, SplitMix64& rng) : s_(s), rng_(rng) {
    col_w_ = (s.page_width - 2 * s.margin - s.column_gap) / 2;
  }

  void page(bool first) {
    page_ = PdfPageSpec{s_.page_width, s_.page_height, {}, {}};
    labels_.clear();
    double top = s_.page_height - s_.margin;
    if (first) top = front_matter();
    for (int c = 0; c < 2; ++c) column(s_.margin + c * (col_w_ + s_.column_gap), top);
  }

  PdfPageSpec take_page() { return std::move(page_); }
  std::vector<std::string> take_labels() { return std::move(labels_); }

 private:
  double char_w(double fs) const { return 0.6 * fs; }
  double jit() { return s_.jitter > 0 ? rng_.uniform(-s_.jitter, s_.jitter) : 0.0; }
  int range(int lo, int hi) { return lo + static_cast<int>(rng_.below(static_cast<std::uint64_t>(hi - lo + 1))); }

  void put(double x, double y, std::string text, double fs, TextStyle style, const char* label) {
    page_.snippets.push_back(PdfSnippet{round2(x), round2(y), std::move(text), fs, style});
    labels_.emplace_back(label);
  }

  std::string words(std::size_t max_chars, bool capital = false) {
    std::string out;
    for (;;) {
      std::string w = kWords[rng_.below(std::size(kWords))];
      std::size_t need = out.size() + (out.empty() ? 0 : 1) + w.size();
      if (need > max_chars) break;
      if (!out.empty()) out += ' ';
      out += w;
    }
    if (out.empty()) out = std::string(kWords[0]).substr(0, std::max<std::size_t>(1, max_chars));
    if (capital) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
  }

  std::size_t fit(double width, double fs) const {
    return static_cast<std::size_t>(std::max(1.0, std::floor((width - 2 * s_.jitter) / char_w(fs))));
  }

  // Lines centred in a band, top first, never leaving it.
  void band_lines(const PageBand& band, double fs, int max_lines, const char* label, bool names) {
    const double lo = band.lo * s_.page_height, hi = band.hi * s_.page_height;
    const double body = s_.page_width - 2 * s_.margin;
    double y = hi - fs - s_.jitter;
    int n = range(1, max_lines);
    for (int i = 0; i < n && y >= lo + s_.jitter; ++i, y -= 1.2 * fs) {
      std::string text;
      if (names) {
        int k = range(2, 4);
        for (int j = 0; j < k; ++j) text += (j ? ", " : "") + std::string(kNames[rng_.below(std::size(kNames))]);
      } else {
        text = words(static_cast<std::size_t>(fit(body, fs) * 0.8), true);
      }
      double w = courier_width(text, fs);
      double yy = std::clamp(y + jit() * 0.3, lo, hi - fs);
      put(s_.margin + (body - w) / 2 + jit(), yy, text, fs, TextStyle::bold, label);
    }
  }

  double front_matter() {
    band_lines(s_.title_band, s_.title_size, 2, "Title", false);
    // Author lines use the normal face.
    std::size_t before = page_.snippets.size();
    band_lines(s_.author_band, s_.author_size, 2, "Author", true);
    for (std::size_t i = before; i < page_.snippets.size(); ++i) page_.snippets[i].style = TextStyle::normal;

    const double body = s_.page_width - 2 * s_.margin;
    double y = s_.author_band.lo * s_.page_height - 2 * s_.abstract_size - s_.jitter;
    const double dx = jit();
    int n = range(3, 7);
    for (int i = 0; i < n; ++i, y -= 1.25 * s_.abstract_size) {
      std::size_t chars = fit(body, s_.abstract_size);
      if (i == n - 1) chars = chars / 2 + rng_.below(chars / 2);
      put(s_.margin + dx, y, words(chars, i == 0), s_.abstract_size, TextStyle::normal, "Text");
    }
    return y - 2 * s_.text_size;
  }

  void column(double x0, double top) {
    const double bottom = s_.margin;
    double y = top;
    int guard = 0;
    while (y - s_.text_size > bottom && guard++ < 200) {
      const double r = rng_.unit();
      double used;
      if (r < s_.subtitle_probability)
        used = subtitle(x0, y);
      else if (r < s_.subtitle_probability + s_.figure_probability)
        used = figure(x0, y, bottom);
      else if (r < s_.subtitle_probability + s_.figure_probability + s_.table_probability)
        used = table(x0, y, bottom);
      else
        used = 0;
      if (used <= 0) used = paragraph(x0, y, bottom);
      if (used <= 0) break;
      y -= used;
    }
  }

  double subtitle(double x0, double y) {
    const double fs = s_.subtitle_size;
    std::string t = std::to_string(++section_) + " " + words(fit(col_w_, fs) / 2, true);
    put(x0 + jit() * 0.5, y - fs, t, fs, TextStyle::bold, "Subtitle");
    return 1.8 * fs;
  }

  // Returns the height consumed, 0 when nothing fits.
  double paragraph(double x0, double y, double bottom) {
    const double fs = s_.text_size, pitch = 1.2 * fs;
    const std::size_t chars = fit(col_w_, fs);
    int n = range(3, 9);
    const double dx = jit() * 0.5;
    double yy = y - fs;
    int placed = 0;
    for (int i = 0; i < n && yy >= bottom; ++i, yy -= pitch, ++placed) {
      std::size_t len = chars - rng_.below(4);
      if (i == n - 1) len = len / 3 + rng_.below(len / 2);
      const double x = x0 + dx + (i == 0 ? 2 * char_w(fs) : 0);
      if (i == 0) len -= 2;
      if (rng_.unit() < s_.inline_style_probability && len >= 20) {
        // normal | styled | normal, one blank glyph between spans
        std::size_t a = 4 + rng_.below(len / 3), b = 4 + rng_.below(len / 3);
        std::string s1 = words(a), s2 = words(b), s3 = words(len - s1.size() - s2.size() - 2);
        TextStyle st = rng_.below(2) ? TextStyle::italic : TextStyle::bold;
        double cx = x;
        put(cx, yy, s1, fs, TextStyle::normal, "Text");
        cx += courier_width(s1, fs) + char_w(fs);
        put(cx, yy, s2, fs, st, "Text");
        cx += courier_width(s2, fs) + char_w(fs);
        put(cx, yy, s3, fs, TextStyle::normal, "Text");
      } else {
        put(x, yy, words(len), fs, TextStyle::normal, "Text");
      }
    }
    if (placed == 0) return 0;
    return placed * pitch + 0.6 * fs;
  }

  double caption(double x0, double y, const std::string& lead) {
    const double fs = s_.caption_size;
    int n = range(1, 2);
    for (int i = 0; i < n; ++i) {
      std::string t = words(fit(col_w_, fs) - (i == 0 ? lead.size() + 1 : 0) - rng_.below(6));
      put(x0, y - fs - i * 1.2 * fs, i == 0 ? lead + " " + t : t, fs, TextStyle::normal, "Text");
    }
    return n * 1.2 * fs;
  }

  double figure(double x0, double y, double bottom) {
    const double h = rng_.uniform(120, 200);
    const double cap = 2 * 1.2 * s_.caption_size;
    if (y - h - cap - 8 < bottom) return 0;
    const double dx = jit();
    const double bx0 = x0 + dx, by1 = y - 4, by0 = by1 - h, bx1 = x0 + col_w_ - s_.jitter;
    char rect[160];
    std::snprintf(rect, sizeof rect, "q 0.5 w %.2f %.2f %.2f %.2f re S Q\n", bx0, by0, bx1 - bx0, h);
    page_.extra_content += rect;

    const double fs = s_.picture_size;
    int left = range(1, 4), under = range(std::max(1, 3 - left), 8 - left);
    for (int i = 0; i < left; ++i) {
      double ty = by0 + 20 + (h - 30) * (left == 1 ? 0.5 : static_cast<double>(i) / (left - 1));
      put(bx0 + 2, ty, tick(i), fs, TextStyle::normal, "Picture");
    }
    const double span = bx1 - bx0 - 40;
    for (int i = 0; i < under; ++i) {
      double tx = bx0 + 30 + span * (under == 1 ? 0.5 : static_cast<double>(i) / under);
      put(tx, by0 + 3, tick(i + 3), fs, TextStyle::normal, "Picture");
    }
    double used = 4 + h + 4;
    used += caption(x0 + dx, y - used, "Fig. " + std::to_string(++figures_) + ".");
    return used + 8;
  }

  std::string tick(int i) {
    static const char* forms[] = {"%d", "%d.%d", "0.%d", "%d0", "1e%d"};
    char buf[16];
    int a = static_cast<int>(rng_.below(10)), b = static_cast<int>(rng_.below(10));
    std::snprintf(buf, sizeof buf, forms[(static_cast<std::size_t>(i) + rng_.below(5)) % 5], a, b);
    return buf;
  }

  double table(double x0, double y, double bottom) {
    const int cols = range(2, 4), rows = range(3, 8);
    const double fs = s_.table_size, pitch = 1.4 * fs;
    const double need = 2 * 1.2 * s_.caption_size + 4 + rows * pitch + 8;
    if (y - need < bottom) return 0;
    const double dx = jit();
    double used = caption(x0 + dx, y, "Table " + std::to_string(++tables_) + ".") + 4;
    const double colw = col_w_ / cols;
    const std::size_t max_chars = std::max<std::size_t>(2, fit(colw - 8, fs));
    for (int r = 0; r < rows; ++r) {
      const double ty = y - used - fs - r * pitch;
      for (int c = 0; c < cols; ++c) {
        std::string t;
        std::size_t len = 2 + rng_.below(std::min<std::size_t>(max_chars - 1, 7));
        if (r == 0 || (c == 0 && rng_.below(2))) {
          t = words(len, true);
        } else {
          for (std::size_t k = 0; k < len; ++k) t += static_cast<char>('0' + rng_.below(10));
          if (len > 3) t[len / 2] = '.';
        }
        put(x0 + dx + c * colw, ty, t, fs, TextStyle::normal, "Table");
      }
    }
    return used + rows * pitch + 8;
  }

  const TemplateSpec& s_;
  SplitMix64& rng_;
  double col_w_ = 0;
  int section_ = 0, figures_ = 0, tables_ = 0;
  PdfPageSpec page_;
  std::vector<std::string> labels_;
};

std::int64_t key(double v) { return std::llround(v * 100); }

}  // namespace

void validate_template(const TemplateSpec& s) {
  auto fail = [](const std::string& m) { throw Error(Errc::invalid_argument, "template: " + m); };
  if (!(s.page_width > 0 && s.page_height > 0)) fail("page size must be positive");
  if (!(s.margin > 0) || !(s.column_gap > 0)) fail("margin and column gap must be positive");
  if (!(s.jitter >= 0) || 2 * s.jitter >= s.column_gap) fail("jitter must be below half the column gap");
  for (double fs : {s.title_size, s.author_size, s.abstract_size, s.subtitle_size, s.text_size, s.caption_size,
                    s.picture_size, s.table_size})
    if (!(fs > 0)) fail("font sizes must be positive");
  const double col_w = (s.page_width - 2 * s.margin - s.column_gap) / 2;
  if (col_w < 40 * 0.6 * s.text_size) fail("columns are too narrow");
  for (const PageBand* b : {&s.title_band, &s.author_band})
    if (!(b->lo >= 0 && b->hi <= 1 && b->lo < b->hi)) fail("bands must lie inside the page with lo < hi");
  if (s.title_band.lo < s.author_band.hi && s.author_band.lo < s.title_band.hi) fail("title and author bands overlap");
  if ((s.title_band.hi - s.title_band.lo) * s.page_height < s.title_size + 2 * s.jitter) fail("title band too small");
  if ((s.author_band.hi - s.author_band.lo) * s.page_height < s.author_size + 2 * s.jitter)
    fail("author band too small");
  for (double p : {s.subtitle_probability, s.figure_probability, s.table_probability, s.inline_style_probability})
    if (!(p >= 0 && p <= 1)) fail("probabilities must lie in [0,1]");
  if (s.subtitle_probability + s.figure_probability + s.table_probability > 1) fail("block probabilities exceed 1");
  if (s.min_doc_pages < 1 || s.max_doc_pages < s.min_doc_pages) fail("bad document page range");
}

const std::vector<std::string>& synthetic_label_names() {
  static const std::vector<std::string> names{"Title", "Author", "Subtitle", "Text", "Picture", "Table"};
  return names;
}

std::size_t SyntheticCorpus::page_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.pages.size();
  return n;
}

SyntheticCorpus generate_synthetic_corpus(const TemplateSpec& spec, int n_pages, std::uint64_t seed) {
  validate_template(spec);
  if (n_pages < 0) throw Error(Errc::invalid_argument, "page count must not be negative");
  SplitMix64 rng(seed);
  SyntheticCorpus out;
  int remaining = n_pages;
  while (remaining > 0) {
    int pages = spec.min_doc_pages +
                static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_doc_pages - spec.min_doc_pages + 1)));
    pages = std::min(pages, remaining);
    remaining -= pages;

    Layout layout(spec, rng);
    std::vector<PdfPageSpec> specs;
    std::vector<std::vector<std::string>> labels;
    for (int p = 1; p <= pages; ++p) {
      layout.page(p == 1);
      specs.push_back(layout.take_page());
      labels.push_back(layout.take_labels());
    }
    std::string pdf = write_pdf(specs, PdfWriteOptions{true, false, false, Positioning::td});
    ParsedDocument doc = pdf::parse_pdf(pdf).document;

    CellLabels ann;
    for (std::size_t p = 0; p < specs.size(); ++p) {
      std::map<std::tuple<std::int64_t, std::int64_t, std::string>, std::string> expect;
      for (std::size_t i = 0; i < specs[p].snippets.size(); ++i) {
        const PdfSnippet& s = specs[p].snippets[i];
        expect[{key(s.x), key(s.y), s.text}] = labels[p][i];
      }
      const Page& page = doc.pages.at(p);
      if (page.cells.size() != specs[p].snippets.size())
        throw Error(Errc::internal, "synthetic page " + std::to_string(p + 1) + ": " +
                                        std::to_string(specs[p].snippets.size()) + " snippets became " +
                                        std::to_string(page.cells.size()) + " cells");
      for (const Cell& c : page.cells) {
        auto it = expect.find({key(c.bbox.x0), key(c.bbox.y0), c.text});
        if (it == expect.end())
          throw Error(Errc::internal, "synthetic page " + std::to_string(p + 1) + ": cell '" + c.text +
                                          "' matches no snippet");
        ann[{page.number, c.id}] = it->second;
      }
    }
    out.documents.push_back(std::move(doc));
    out.annotations.push_back(std::move(ann));
    out.pdfs.push_back(std::move(pdf));
    out.layouts.push_back(std::move(specs));
    out.snippet_labels.push_back(std::move(labels));
  }
  return out;
}

}  // namespace ccs
