#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ccs/evaluate.hpp"
#include "ccs/random.hpp"
#include "ccs/synthetic.hpp"

using namespace ccs;

namespace {

// Half-up rounding of 100*num/den to hundredths by long division.
std::int64_t hundredths_oracle(std::uint64_t num, std::uint64_t den) {
  unsigned __int128 scaled = static_cast<unsigned __int128>(num) * 10000;
  auto q = static_cast<std::int64_t>(scaled / den);
  unsigned __int128 rem = scaled % den;
  if (rem * 2 >= den) ++q;
  return q;
}

struct PaperTable {
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<double> recall, precision;
};

std::vector<std::string> latex_cells(std::string line) {
  if (auto p = line.find("\\\\"); p != std::string::npos) line.resize(p);
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, '&')) {
    auto b = cell.find_first_not_of(" \t"), e = cell.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

// Reads the confusion table of the paper source when it is available.
std::optional<PaperTable> read_paper_table() {
  std::ifstream in(CCS_SOURCE_DIR "/paper.md");
  if (!in) return std::nullopt;
  PaperTable t;
  const std::set<std::string> names{"Title", "Author", "Subtitle", "Text", "Picture", "Table"};
  std::string line;
  while (std::getline(in, line)) {
    auto cells = latex_cells(line);
    if (cells.size() < 8) continue;
    const std::string& head = cells[1];
    if (!names.count(head) && head != "Recall" && head != "Precision") continue;
    std::vector<double> nums;
    for (std::size_t i = 2; i < 8; ++i) nums.push_back(std::stod(cells[i]));
    if (names.count(head)) {
      t.labels.push_back(head);
      t.counts.emplace_back(nums.begin(), nums.end());
    } else if (head == "Recall") {
      t.recall = nums;
    } else if (head == "Precision") {
      t.precision = nums;
    }
  }
  if (t.labels.size() != 6) return std::nullopt;
  return t;
}

ParsedDocument size_coded_doc(const std::string& id, int pages, SplitMix64& rng, CellLabels& labels) {
  // Label is fully determined by cell height: Big = 20pt, Small = 8pt.
  ParsedDocument d;
  d.doc_id = id;
  d.source_hash = std::string(64, 'a');
  d.total_pages = pages;
  for (int p = 1; p <= pages; ++p) {
    Page page{p, 612, 792, {}};
    std::vector<Cell> cells;
    for (int i = 0; i < 12; ++i) {
      bool big = rng.below(3) == 0;
      double h = big ? 20 : 8;
      double x = std::round(rng.uniform(40, 400));
      double y = 700 - 50 * i;
      cells.push_back(Cell{0, {x, y, x + 80, y + h}, big ? "big" : "small", TextStyle::normal, h});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.bbox.y0 > b.bbox.y0; });
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cells[i].id = static_cast<int>(i);
      labels[{p, cells[i].id}] = cells[i].bbox.height() > 10 ? "Big" : "Small";
    }
    page.cells = std::move(cells);
    d.pages.push_back(std::move(page));
  }
  return d;
}

}  // namespace

TEST_CASE("percent rounding is half-up to hundredths") {
  CHECK(Percent::ratio(75, 77).str() == "97.40");
  CHECK(Percent::ratio(670, 671).str() == "99.85");
  CHECK(Percent::ratio(1, 1).str() == "100.00");
  CHECK(Percent::ratio(0, 3).str() == "0.00");
  CHECK(Percent::ratio(1, 80000).hundredths == 0);  // 0.00125 -> 0.00
  CHECK(Percent::ratio(1, 20000).hundredths == 1);  // exactly 0.005 rounds up
  CHECK_THROWS_AS(Percent::ratio(1, 0), Error);
  SplitMix64 rng(3);
  for (int i = 0; i < 20000; ++i) {
    std::uint64_t den = 1 + rng.below(1000000);
    std::uint64_t num = rng.below(den + 1);
    CHECK(Percent::ratio(num, den).hundredths == hundredths_oracle(num, den));
  }
}

TEST_CASE("confusion tallies") {
  std::vector<std::string> names{"a", "b", "c"};
  SUBCASE("perfect predictions are diagonal") {
    std::vector<std::string> t{"a", "b", "c", "c"};
    ConfusionMatrix m = confusion(std::span<const std::string>(t), t, names);
    CHECK(m.counts == std::vector<std::vector<std::uint64_t>>{{1, 0, 0}, {0, 1, 0}, {0, 0, 2}});
    CHECK(m.total() == 4);
  }
  SUBCASE("empty input") {
    std::vector<std::string> none;
    ConfusionMatrix m = confusion(std::span<const std::string>(none), none, names);
    CHECK(m.total() == 0);
    CHECK(m.counts.size() == 3);
  }
  SUBCASE("errors") {
    std::vector<std::string> t{"a", "z"}, p{"a", "a"}, short_p{"a"};
    CHECK_THROWS_AS(confusion(std::span<const std::string>(t), p, names), Error);
    CHECK_THROWS_AS(confusion(std::span<const std::string>(p), short_p, names), Error);
  }
  SUBCASE("published counts re-tallied from label vectors") {
    const auto& pub = published_prb_metrics();
    std::vector<std::string> t, p;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::uint64_t c = 0; c < pub.matrix.counts[i][j]; ++c) {
          t.push_back(pub.matrix.labels[i]);
          p.push_back(pub.matrix.labels[j]);
        }
    // Order must not matter.
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(5);
    rng.shuffle(order);
    std::vector<std::string> ts, ps;
    for (auto i : order) {
      ts.push_back(t[i]);
      ps.push_back(p[i]);
    }
    ConfusionMatrix m = confusion(std::span<const std::string>(ts), ps, pub.matrix.labels);
    CHECK(m == pub.matrix);
    CHECK(m.total() == 65235);
  }
}

TEST_CASE("published metrics agree with the paper source") {
  const auto& pub = published_prb_metrics();
  auto paper = read_paper_table();
  if (!paper) {
    MESSAGE("paper source not present; using built-in values only");
    return;
  }
  CHECK(paper->labels == pub.matrix.labels);
  CHECK(paper->counts == pub.matrix.counts);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::llround(paper->recall[i] * 100) == pub.recall[i].hundredths);
    CHECK(std::llround(paper->precision[i] * 100) == pub.precision[i].hundredths);
  }
}

TEST_CASE("recall and precision of the published matrix") {
  const auto& pub = published_prb_metrics();
  auto metrics = recall_precision(pub.matrix);
  REQUIRE(metrics.size() == 6);
  const auto& m = pub.matrix.counts;
  for (std::size_t i = 0; i < 6; ++i) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      row += m[i][j];
      col += m[j][i];
    }
    CHECK(metrics[i].recall->hundredths == hundredths_oracle(m[i][i], row));
    CHECK(metrics[i].precision->hundredths == hundredths_oracle(m[i][i], col));
  }
  CHECK(metrics[0].recall->str() == "100.00");
  CHECK(metrics[0].precision->str() == "97.40");
  CHECK(metrics[1].recall->str() == "99.85");

  auto diffs = compare_metrics(metrics, pub);
  REQUIRE(diffs.size() == 1);
  CHECK(diffs[0].label == "Picture");
  CHECK(diffs[0].metric == "recall");
  CHECK(diffs[0].computed.str() == "99.29");
  CHECK(diffs[0].published.str() == "99.24");

  std::string table = render_table(pub.matrix, metrics);
  CHECK(table.find("56460") != std::string::npos);
  CHECK(table.find("99.29") != std::string::npos);
  CHECK(table.find("Precision") != std::string::npos);
}

TEST_CASE("empty rows and columns give absent metrics") {
  ConfusionMatrix m({"a", "b"});
  m.counts = {{3, 0}, {0, 0}};
  auto r = recall_precision(m);
  CHECK(r[0].recall->str() == "100.00");
  CHECK_FALSE(r[1].recall.has_value());
  CHECK_FALSE(r[1].precision.has_value());
  CHECK(render_table(m, r).find('-') != std::string::npos);
}

TEST_CASE("k-fold split") {
  auto folds = kfold_split(400, 10, 42);
  REQUIRE(folds.size() == 10);
  std::vector<int> seen(400, 0);
  for (const auto& f : folds) {
    CHECK(f.size() == 40);
    for (auto i : f) ++seen[i];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  CHECK(kfold_split(400, 10, 42) == folds);
  CHECK(kfold_split(400, 10, 43) != folds);

  for (const auto& f : kfold_split(10, 10, 1)) CHECK(f.size() == 1);
  for (std::size_t n = 2; n < 60; ++n)
    for (int k = 2; k <= static_cast<int>(std::min<std::size_t>(n, 12)); ++k) {
      auto fs = kfold_split(n, k, n * 31 + static_cast<std::size_t>(k));
      std::size_t lo = n, hi = 0, total = 0;
      for (const auto& f : fs) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        total += f.size();
      }
      CHECK(hi - lo <= 1);
      CHECK(total == n);
    }
  CHECK_THROWS_AS(kfold_split(5, 10, 0), Error);
  CHECK_THROWS_AS(kfold_split(5, 1, 0), Error);
}

TEST_CASE("synthetic corpus") {
  TemplateSpec spec;
  SUBCASE("zero pages") { CHECK(generate_synthetic_corpus(spec, 0, 1).documents.empty()); }
  SUBCASE("invalid templates") {
    TemplateSpec bad = spec;
    bad.author_band = {0.88, 0.93};
    CHECK_THROWS_AS(generate_synthetic_corpus(bad, 5, 1), Error);
    bad = spec;
    bad.text_size = 0;
    CHECK_THROWS_AS(generate_synthetic_corpus(bad, 5, 1), Error);
    bad = spec;
    bad.min_doc_pages = 3;
    bad.max_doc_pages = 2;
    CHECK_THROWS_AS(validate_template(bad), Error);
  }
  SUBCASE("layout and labels") {
    SyntheticCorpus c = generate_synthetic_corpus(spec, 30, 7);
    CHECK(c.page_count() == 30);
    std::map<std::string, std::size_t> freq;
    for (std::size_t d = 0; d < c.documents.size(); ++d) {
      const ParsedDocument& doc = c.documents[d];
      CHECK(doc.pages.size() >= 1);
      CHECK(doc.pages.size() <= 10);
      CHECK(validate_document(doc).empty());
      for (const Page& p : doc.pages) {
        const auto& snippets = c.layouts[d][static_cast<std::size_t>(p.number - 1)].snippets;
        REQUIRE(p.cells.size() == snippets.size());
        for (const Cell& cell : p.cells) {
          const std::string& label = c.annotations[d].at({p.number, cell.id});
          ++freq[label];
          if (label == "Title") {
            CHECK(p.number == 1);
            CHECK(cell.bbox.y0 >= 0.9 * p.height);
          }
          // Every cell sits on exactly one placed snippet.
          int hits = 0;
          for (const auto& s : snippets) {
            BBox e = snippet_bbox(s);
            if (std::fabs(e.x0 - cell.bbox.x0) <= 0.5 && std::fabs(e.y0 - cell.bbox.y0) <= 0.5 &&
                std::fabs(e.x1 - cell.bbox.x1) <= 0.5 && std::fabs(e.y1 - cell.bbox.y1) <= 0.5)
              ++hits;
          }
          CHECK(hits == 1);
        }
      }
    }
    for (const auto& l : synthetic_label_names()) CHECK(freq[l] > 0);
    for (const auto& [l, n] : freq)
      if (l != "Text") CHECK(freq["Text"] > 5 * n);
  }
  SUBCASE("deterministic") {
    auto a = generate_synthetic_corpus(spec, 12, 99), b = generate_synthetic_corpus(spec, 12, 99);
    CHECK(a.pdfs == b.pdfs);
    CHECK(a.annotations == b.annotations);
    CHECK(generate_synthetic_corpus(spec, 12, 100).pdfs != a.pdfs);
  }
}

TEST_CASE("cross-validation") {
  SUBCASE("a separating feature gives perfect scores") {
    SplitMix64 rng(11);
    std::vector<ParsedDocument> docs;
    std::vector<CellLabels> labels(3);
    for (int d = 0; d < 3; ++d) docs.push_back(size_coded_doc("d" + std::to_string(d), 4, rng, labels[d]));
    std::vector<std::string> names{"Big", "Small"};
    CrossValidationOptions opt;
    opt.k = 4;
    opt.forest.n_trees = 10;
    EvalReport r = cross_validate(docs, labels, names, opt);
    CHECK(r.folds.size() == 4);
    CHECK(r.aggregate.total() == 3 * 4 * 12);
    for (const auto& m : r.metrics) {
      CHECK(m.recall->str() == "100.00");
      CHECK(m.precision->str() == "100.00");
    }
    ConfusionMatrix sum(r.labels);
    for (const auto& f : r.folds) sum += f.matrix;
    CHECK(sum == r.aggregate);
  }
  SUBCASE("two pages, two folds") {
    SplitMix64 rng(12);
    std::vector<CellLabels> labels(1);
    std::vector<ParsedDocument> docs{size_coded_doc("x", 2, rng, labels[0])};
    std::vector<std::string> names{"Big", "Small"};
    CrossValidationOptions opt;
    opt.k = 2;
    opt.forest.n_trees = 5;
    EvalReport r = cross_validate(docs, labels, names, opt);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].test_pages.size() == 1);
    CHECK(r.folds[1].test_pages.size() == 1);
    CHECK_FALSE(r.folds[0].test_pages[0] == r.folds[1].test_pages[0]);
  }
  SUBCASE("unannotated cells are rejected") {
    SplitMix64 rng(13);
    std::vector<CellLabels> labels(1);
    std::vector<ParsedDocument> docs{size_coded_doc("x", 3, rng, labels[0])};
    labels[0].erase(labels[0].begin());
    std::vector<std::string> names{"Big", "Small"};
    CHECK_THROWS_AS(cross_validate(docs, labels, names, CrossValidationOptions{}), Error);
  }
  SUBCASE("synthetic corpus, folds partition the pages and runs repeat exactly") {
    SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, 24, 5);
    CrossValidationOptions opt;
    opt.k = 4;
    opt.forest.n_trees = 15;
    opt.forest.seed = 3;
    EvalReport r = cross_validate(c.documents, c.annotations, synthetic_label_names(), opt);
    std::set<std::pair<std::size_t, int>> pages;
    for (const auto& f : r.folds)
      for (const auto& p : f.test_pages) CHECK(pages.insert({p.doc, p.page}).second);
    CHECK(pages.size() == 24);
    for (const auto& m : r.metrics)
      if (m.label == "Text" || m.label == "Table" || m.label == "Picture") CHECK(m.recall->hundredths >= 9700);
    opt.workers = 4;
    CHECK(report_json(cross_validate(c.documents, c.annotations, synthetic_label_names(), opt)) == report_json(r));
  }
}
