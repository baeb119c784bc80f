#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "cart_oracle.hpp"
#include "ccs/annotations.hpp"
#include "ccs/assemble.hpp"
#include "ccs/evaluate.hpp"
#include "ccs/forest.hpp"
#include "ccs/pdf_parse.hpp"
#include "ccs/pdf_writer.hpp"
#include "ccs/pipeline.hpp"
#include "ccs/random.hpp"
#include "ccs/synthetic.hpp"

using namespace ccs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr std::int64_t kTableTolerance = 1;  // hundredths of a percent
constexpr double kTableBudgetSeconds = 1.0;
constexpr double kCvMinimum = 97.00;
constexpr double kCvBudgetSeconds = 300.0;
constexpr double kBboxTolerance = 0.5;
constexpr int kParserDocuments = 64;
constexpr int kDefaultFuzzSeconds = 600;
constexpr int kOracleDatasets = 100;
constexpr double kMinSpeedup4 = 2.8;
constexpr std::size_t kScalingPages = 200;
constexpr int kAssemblyDocuments = 1000;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

Outcome fail(std::string why) { return {Status::fail, std::move(why)}; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 2) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

int hardware_workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> n{0};
    path = fs::temp_directory_path() / ("ccs-accept-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// ---- table1

// Percentage rounded half-up to hundredths, in hundredths, by integer arithmetic.
std::int64_t hundredths(std::uint64_t num, std::uint64_t den) { return static_cast<std::int64_t>((20000 * num + den) / (2 * den)); }

Outcome check_table1() {
  const auto t0 = Clock::now();
  const PublishedMetrics& pub = published_prb_metrics();
  const auto metrics = recall_precision(pub.matrix);
  const auto flagged = compare_metrics(metrics, pub, kTableTolerance);
  const double elapsed = seconds_since(t0);

  const auto& m = pub.matrix;
  const std::size_t n = m.labels.size();
  std::vector<std::string> off;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += m.counts[i][j];
      col += m.counts[j][i];
    }
    const std::int64_t r = hundredths(m.counts[i][i], row), p = hundredths(m.counts[i][i], col);
    if (!metrics[i].recall || std::llround(metrics[i].recall->value() * 100) != r)
      return fail("recall_precision disagrees with integer recall for " + m.labels[i]);
    if (!metrics[i].precision || std::llround(metrics[i].precision->value() * 100) != p)
      return fail("recall_precision disagrees with integer precision for " + m.labels[i]);
    const std::int64_t pr = std::llround(pub.recall[i].value() * 100), pp = std::llround(pub.precision[i].value() * 100);
    if (std::llabs(r - pr) > kTableTolerance) off.push_back(m.labels[i] + " recall " + fixed(r / 100.0) + " vs " + fixed(pr / 100.0));
    if (std::llabs(p - pp) > kTableTolerance) off.push_back(m.labels[i] + " precision " + fixed(p / 100.0) + " vs " + fixed(pp / 100.0));
  }
  if (off.size() != 1 || off[0] != "Picture recall 99.29 vs 99.24")
    return fail("unexpected mismatches: " + std::to_string(off.size()));
  if (flagged.size() != 1 || flagged[0].label != "Picture" || flagged[0].metric != "recall" ||
      std::llround(flagged[0].computed.value() * 100) != 9929 || std::llround(flagged[0].published.value() * 100) != 9924)
    return fail("compare_metrics did not flag exactly Picture recall");
  if (elapsed >= kTableBudgetSeconds) return fail("took " + fixed(elapsed, 3) + "s");
  return {Status::pass, std::to_string(2 * n) + " values, flagged " + off[0] + ", " + fixed(elapsed, 4) + "s"};
}

// ---- cv

Outcome check_cv() {
  const auto t0 = Clock::now();
  SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, 400, 42);
  CrossValidationOptions o;
  o.k = 10;
  o.seed = 42;
  o.forest.n_trees = 100;
  o.workers = hardware_workers();
  EvalReport r = cross_validate(c.documents, c.annotations, synthetic_label_names(), o);
  const double elapsed = seconds_since(t0);
  std::cout << render_table(r.aggregate, r.metrics);
  std::string low;
  for (const auto& m : r.metrics) {
    if (!m.recall || m.recall->value() < kCvMinimum) low += " " + m.label + " recall";
    if (!m.precision || m.precision->value() < kCvMinimum) low += " " + m.label + " precision";
  }
  if (r.metrics.size() != 6) return fail("expected 6 labels, got " + std::to_string(r.metrics.size()));
  if (!low.empty()) return fail("below " + fixed(kCvMinimum) + ":" + low);
  if (elapsed >= kCvBudgetSeconds) return fail("took " + fixed(elapsed, 1) + "s");
  return {Status::pass, std::to_string(c.page_count()) + " pages, 10 folds, " + std::to_string(o.workers) + " workers, " +
                            fixed(elapsed, 1) + "s"};
}

// ---- parser

std::string random_word(SplitMix64& rng) {
  std::string w;
  const auto len = 1 + rng.below(8);
  for (std::uint64_t i = 0; i < len; ++i) w += static_cast<char>(33 + rng.below(94));
  return w;
}

std::vector<PdfPageSpec> random_layout(SplitMix64& rng, int doc) {
  std::vector<PdfPageSpec> pages(1 + rng.below(3));
  int serial = 0;
  for (auto& page : pages) {
    page.width = 400 + std::round(rng.uniform(0, 300));
    page.height = 500 + std::round(rng.uniform(0, 400));
    double y = page.height - 30 - std::round(rng.uniform(0, 20) * 4) / 4;
    while (true) {
      const double fs = 6 + std::round(rng.uniform(0, 18) * 2) / 2;
      if (y - fs < 10) break;
      double x = 10 + std::round(rng.uniform(0, 60) * 4) / 4;
      const int per_row = 1 + static_cast<int>(rng.below(2));
      for (int k = 0; k < per_row; ++k) {
        PdfSnippet s;
        s.x = x;
        s.y = y;
        s.font_size = fs;
        s.style = static_cast<TextStyle>(rng.below(3));
        s.text = "d" + std::to_string(doc) + "s" + std::to_string(serial);
        for (auto words = rng.below(5); words > 0; --words) s.text += " " + random_word(rng);
        const double w = courier_width(s.text, fs);
        if (x + w > page.width - 10) break;
        ++serial;
        page.snippets.push_back(s);
        x += w + 3 * fs + std::round(rng.uniform(0, 40));
      }
      y -= fs * (1.6 + rng.uniform(0, 2));
    }
  }
  return pages;
}

std::string round_trip_problem(const std::vector<PdfPageSpec>& pages, const PdfWriteOptions& opt) {
  pdf::ParseResult r = pdf::parse_pdf(write_pdf(pages, opt));
  if (r.document.pages.size() != pages.size()) return "page count";
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const auto& cells = r.document.pages[p].cells;
    if (cells.size() != pages[p].snippets.size())
      return "page " + std::to_string(p + 1) + ": " + std::to_string(cells.size()) + " cells for " +
             std::to_string(pages[p].snippets.size()) + " snippets";
    std::set<int> used;
    for (const auto& s : pages[p].snippets) {
      const BBox want = snippet_bbox(s);
      int hits = 0;
      for (const Cell& c : cells) {
        if (c.text != s.text) continue;
        if (std::fabs(c.bbox.x0 - want.x0) > kBboxTolerance || std::fabs(c.bbox.y0 - want.y0) > kBboxTolerance ||
            std::fabs(c.bbox.x1 - want.x1) > kBboxTolerance || std::fabs(c.bbox.y1 - want.y1) > kBboxTolerance)
          return "bbox of '" + s.text + "'";
        ++hits;
        used.insert(c.id);
      }
      if (hits != 1) return "'" + s.text + "' matched " + std::to_string(hits) + " cells";
    }
    if (used.size() != cells.size()) return "cells shared between snippets";
  }
  return {};
}

// Inputs the fuzzer starts from.
const std::vector<std::string>& content_seeds() {
  static const std::vector<std::string> seeds{
      "BT /F1 12 Tf 72 700 Td (Hello world) Tj 0 -14 Td (second) Tj ET",
      "BT /F2 10 Tf 1 0 0 1 100 500 Tm [(A) -250 (B) 120 (C)] TJ T* (x) ' 2 1 (y) \" ET",
      "q 0.5 0 0 0.5 10 10 cm BT /F1 8 Tf 3 Tc 2 Tw 90 Tz 12 TL 1 Ts 0 Tr (abc) Tj ET Q",
      "q 1 0 0 1 50 50 cm /Fm1 Do Q BT /F1 9 Tf 10 10 TD <414243> Tj ET",
      "BT /F3 11 Tf 0 1 -1 0 300 300 Tm (rotated) Tj ET /Fm2 Do",
      "BI /W 2 /H 2 /BPC 8 /CS /G ID \x01\x02\x03\x04 EI BT /F1 5 Tf (after image) Tj ET",
      "BT /F2 14 Tf 20 20 Td <00410042> Tj [<0043> -500 <0044>] TJ ET % comment\n",
  };
  return seeds;
}

pdf::Resources fuzz_resources() {
  using namespace pdf;
  Resources r;
  r.fonts.emplace("F1", FontInfo::fallback());
  FontInfo composite = FontInfo::fallback();
  composite.composite = true;
  composite.to_unicode = {{0x41, "A"}, {0x42, "B"}, {0x43, "\xC3\xA9"}, {0x44, "fi"}};
  r.fonts.emplace("F2", composite);
  FontInfo widths = FontInfo::fallback();
  widths.first_char = 32;
  widths.widths.assign(95, 600);
  widths.style = TextStyle::bold;
  r.fonts.emplace("F3", widths);
  auto inner = std::make_shared<FormXObject>();
  inner->content = "BT /F1 10 Tf 5 5 Td (form text) Tj ET";
  inner->matrix = {2, 0, 0, 2, 7, 9};
  r.forms.emplace("Fm1", inner);
  auto self = std::make_shared<FormXObject>();
  self->content = "BT /F1 6 Tf (loop) Tj ET /Fm2 Do";
  r.forms.emplace("Fm2", self);
  return r;
}

const char* const kTokens[] = {"BT", "ET", "Tf", "Td", "TD", "Tm", "T*", "Tj", "TJ", "'", "\"", "cm", "q", "Q", "Do",
                               "Tc", "Tw", "Tz", "TL", "Ts", "Tr", "BI", "ID", "EI", "/F1", "/F2", "/F3", "/Fm1",
                               "/Fm2", "/Missing", "(", ")", "<", ">", "<<", ">>", "[", "]", "\\", "1e308", "-1e308",
                               "0", "-0", "nan", "inf", "1.#INF", "99999999999999999999", ".", "-", "+", "%", "\n",
                               "endstream", "obj", "endobj", "R", "stream", "xref", "trailer", "/Length 999999"};

std::string mutate(std::string s, SplitMix64& rng, const std::vector<std::string>& pool) {
  const auto rounds = 1 + rng.below(6);
  for (std::uint64_t i = 0; i < rounds; ++i) {
    const std::size_t at = s.empty() ? 0 : rng.below(s.size() + 1);
    switch (rng.below(8)) {
      case 0:
        if (!s.empty()) s[std::min(at, s.size() - 1)] ^= static_cast<char>(1u << rng.below(8));
        break;
      case 1:
        s.insert(at, 1, static_cast<char>(rng.below(256)));
        break;
      case 2:
        s.erase(at, rng.below(32));
        break;
      case 3:
        s.insert(at, std::string(" ") + kTokens[rng.below(std::size(kTokens))] + " ");
        break;
      case 4: {
        const std::size_t from = s.empty() ? 0 : rng.below(s.size());
        s.insert(at, s.substr(from, rng.below(64)));
        break;
      }
      case 5:
        s.resize(at);
        break;
      case 6: {
        const char* open[] = {"[", "<<", "(", "q ", "BT "};
        std::string deep;
        const auto depth = rng.below(3) == 0 ? 20000 + rng.below(40000) : 1 + rng.below(300);
        const char* tok = open[rng.below(std::size(open))];
        for (std::uint64_t d = 0; d < depth; ++d) deep += tok;
        s.insert(at, deep);
        break;
      }
      default: {
        const std::string& other = pool[rng.below(pool.size())];
        const std::size_t from = other.empty() ? 0 : rng.below(other.size());
        s.insert(at, other.substr(from, rng.below(256)));
        break;
      }
    }
  }
  return s;
}

std::vector<std::string> pdf_seeds() {
  std::vector<std::string> out;
  SplitMix64 rng(77);
  for (int i = 0; i < 6; ++i) {
    auto pages = random_layout(rng, 1000 + i);
    PdfWriteOptions o{(i & 1) != 0, (i & 2) != 0, i % 3 == 0, static_cast<Positioning>(i % 3)};
    out.push_back(write_pdf(pages, o));
  }
  out.push_back(generate_synthetic_corpus(TemplateSpec{}, 2, 3).pdfs.front());
  return out;
}

struct FuzzStats {
  std::uint64_t content_runs = 0, pdf_runs = 0, errors = 0;
  std::vector<std::string> crashes;
  double slowest = 0;
  std::string slowest_input;
};

void record_crash(FuzzStats& st, const std::string& input, const std::string& what) {
  const std::string file = "fuzz-failure-" + std::to_string(st.crashes.size()) + ".bin";
  std::ofstream(file, std::ios::binary) << input;
  st.crashes.push_back(what + " (input saved to " + file + ")");
}

template <class F>
void fuzz_one(FuzzStats& st, const std::string& input, F&& fn) {
  const auto t0 = Clock::now();
  try {
    fn();
  } catch (const Error&) {
    ++st.errors;
  } catch (const std::exception& e) {
    record_crash(st, input, std::string("non-ccs exception: ") + e.what());
  } catch (...) {
    record_crash(st, input, "unknown exception");
  }
  if (const double dt = seconds_since(t0); dt > st.slowest) {
    st.slowest = dt;
    st.slowest_input = input;
  }
}

FuzzStats fuzz(double seconds) {
  FuzzStats st;
  SplitMix64 rng(20261016);
  const pdf::Resources res = fuzz_resources();
  const auto& cseeds = content_seeds();
  const auto pseeds = pdf_seeds();
  std::vector<std::string> pool(cseeds);
  pool.insert(pool.end(), pseeds.begin(), pseeds.end());
  const auto t0 = Clock::now();
  std::uint64_t i = 0;
  while (seconds_since(t0) < seconds && st.crashes.size() < 5) {
    if (i++ % 4 != 3) {
      const std::string input = mutate(cseeds[rng.below(cseeds.size())], rng, pool);
      fuzz_one(st, input, [&] {
        std::vector<std::string> warnings;
        (void)pdf::interpret_content(input, res, &warnings);
      });
      ++st.content_runs;
    } else {
      const std::string input = mutate(pseeds[rng.below(pseeds.size())], rng, pool);
      fuzz_one(st, input, [&] { (void)pdf::parse_pdf(input); });
      ++st.pdf_runs;
    }
  }
  return st;
}

Outcome check_parser() {
  SplitMix64 rng(4242);
  std::size_t snippets = 0;
  for (int d = 0; d < kParserDocuments; ++d) {
    const auto pages = random_layout(rng, d);
    PdfWriteOptions o{(d & 1) != 0, (d & 2) != 0, (d & 4) != 0, static_cast<Positioning>(d % 3)};
    for (const auto& p : pages) snippets += p.snippets.size();
    try {
      const std::string why = round_trip_problem(pages, o);
      if (!why.empty()) return fail("document " + std::to_string(d) + ": " + why);
    } catch (const std::exception& e) {
      return fail("document " + std::to_string(d) + " threw: " + e.what());
    }
  }
  double seconds = kDefaultFuzzSeconds;
  if (const char* env = std::getenv("CCS_FUZZ_SECONDS")) seconds = std::atof(env);
  FuzzStats st = fuzz(seconds);
  std::string detail = std::to_string(kParserDocuments) + " PDFs, " + std::to_string(snippets) + " snippets; fuzz " +
                       fixed(seconds, 0) + "s: " + std::to_string(st.content_runs) + " content streams, " +
                       std::to_string(st.pdf_runs) + " files, " + std::to_string(st.errors) + " ccs errors, slowest " +
                       fixed(st.slowest, 3) + "s";
  if (st.slowest > 1) std::ofstream("fuzz-slowest.bin", std::ios::binary) << st.slowest_input;
  if (!st.crashes.empty()) return fail(detail + "; first crash: " + st.crashes.front());
  return {Status::pass, detail};
}

// ---- forest

Outcome check_forest() {
  std::uint64_t queries = 0;
  for (std::uint64_t seed = 0; seed < kOracleDatasets; ++seed) {
    const oracle::Dataset d = oracle::random_dataset(seed);
    const int depth = 1 + static_cast<int>(seed % 7) * 3;
    const int leaf = 1 + static_cast<int>(seed % 3);
    const auto ref = oracle::build(d, depth, static_cast<std::size_t>(leaf));
    std::vector<double> x;
    for (const auto& row : d.x) x.insert(x.end(), row.begin(), row.end());
    FeatureSchema schema;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < d.n_features; ++i) schema.names.push_back("f" + std::to_string(i));
    for (std::size_t i = 0; i < d.n_labels; ++i) labels.push_back("L" + std::to_string(i));
    ForestParams p;
    p.n_trees = 1;
    p.bootstrap = false;
    p.max_depth = depth;
    p.min_samples_leaf = leaf;
    p.features_per_split = static_cast<int>(d.n_features);
    const ForestModel m = train(TrainData{x, d.x.size(), d.y}, schema, labels, p);
    SplitMix64 rng(seed + 1000);
    std::vector<std::vector<double>> probes = d.x;
    for (int q = 0; q < 50; ++q) {
      std::vector<double> v;
      for (std::size_t k = 0; k < d.n_features; ++k) v.push_back(rng.uniform(-60, 60));
      probes.push_back(std::move(v));
    }
    for (const auto& v : probes) {
      ++queries;
      if (predict(m, v).label != oracle::predict(*ref, v))
        return fail("dataset " + std::to_string(seed) + " disagrees with the exhaustive CART");
    }
  }
  return {Status::pass, std::to_string(kOracleDatasets) + " datasets, " + std::to_string(queries) + " predictions identical"};
}

// ---- determinism

Outcome check_determinism() {
  SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, 120, 42);
  const auto& names = synthetic_label_names();
  ForestParams p;
  p.n_trees = 30;
  p.seed = 7;
  auto model_bytes = [&](int workers) { return save_model(train_documents(c.documents, c.annotations, names, p, {}, workers)); };
  const std::string m1 = model_bytes(1), m1b = model_bytes(1), m4 = model_bytes(4);
  if (m1 != m1b) return fail("model bytes differ between two runs");
  if (m1 != m4) return fail("model bytes differ between 1 and 4 workers");

  auto report = [&](int workers) {
    CrossValidationOptions o;
    o.k = 5;
    o.seed = 42;
    o.forest.n_trees = 20;
    o.workers = workers;
    return report_json(cross_validate(c.documents, c.annotations, names, o));
  };
  const std::string r1 = report(1), r1b = report(1), r4 = report(4);
  if (r1 != r1b) return fail("eval report differs between two runs");
  if (r1 != r4) return fail("eval report differs between 1 and 4 workers");

  const ForestModel model = load_model(m1);
  auto outputs = [&](int workers) {
    ConvertOptions o;
    o.workers = workers;
    std::vector<std::string> out;
    for (const auto& conv : convert_corpus(c.pdfs, model, o)) {
      if (!conv.ok()) throw Error(Errc::internal, "conversion failed: " + conv.error);
      out.push_back(export_structured(conv.structured, "json"));
      out.push_back(export_structured(conv.structured, "markdown"));
    }
    return out;
  };
  const auto o1 = outputs(1), o1b = outputs(1), o4 = outputs(4);
  if (o1 != o1b) return fail("structured outputs differ between two runs");
  if (o1 != o4) return fail("structured outputs differ between 1 and 4 workers");
  return {Status::pass, "model " + content_digest(m1).substr(0, 16) + ", report " + content_digest(r1).substr(0, 16) +
                            ", " + std::to_string(o1.size() / 2) + " structured documents"};
}

// ---- scaling

Outcome check_scaling() {
  SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, static_cast<int>(kScalingPages) + 20, 42);
  ForestParams p;
  p.n_trees = 30;
  const ForestModel model = train_documents(c.documents, c.annotations, synthetic_label_names(), p, {}, hardware_workers());
  const auto samples = benchmark_throughput(c.pdfs, model, std::vector<int>{1, 2, 4}, {}, kScalingPages);
  std::cout << throughput_csv(samples);
  const double s2 = samples[1].pages_per_second / samples[0].pages_per_second;
  const double s4 = samples[2].pages_per_second / samples[0].pages_per_second;
  const std::string detail = std::to_string(samples[0].pages) + " pages, speedup(2)=" + fixed(s2) + "x, speedup(4)=" +
                             fixed(s4) + "x";
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 4) return {Status::skip, "needs 4 cores, hardware_concurrency=" + std::to_string(hw) + "; measured " + detail};
  if (s2 < 1.0 || s4 < s2) return fail("throughput decreased: " + detail);
  if (s4 < kMinSpeedup4) return fail(detail);
  return {Status::pass, detail};
}

// ---- assembly

Outcome check_assembly() {
  SplitMix64 rng(1000);
  const std::vector<std::string> names{"Title", "Author", "Abstract", "Text", "Table", "Picture"};
  std::size_t cells_seen = 0;
  for (int t = 0; t < kAssemblyDocuments; ++t) {
    ParsedDocument doc;
    doc.doc_id = "r" + std::to_string(t);
    doc.total_pages = static_cast<int>(rng.below(5));
    CellLabels labels;
    std::map<std::pair<int, int>, int> seen;
    for (int p = 1; p <= doc.total_pages; ++p) {
      Page page{p, 612, 792, {}};
      const auto n = rng.below(40);
      for (std::uint64_t i = 0; i < n; ++i) {
        const double x = std::round(rng.uniform(0, 560)), y = std::round(rng.uniform(0, 770));
        const double w = std::round(rng.uniform(0, 120)), h = std::round(rng.uniform(0, 20));
        page.cells.push_back(Cell{static_cast<int>(i), {x, y, std::min(612.0, x + w), std::min(792.0, y + h)},
                                  "c" + std::to_string(i), TextStyle::normal, 10});
        labels[{p, static_cast<int>(i)}] = names[rng.below(names.size())];
        seen[{p, static_cast<int>(i)}] = 0;
      }
      const double gap = rng.below(3) == 0 ? 12 : rng.uniform(1, 30);
      std::vector<int> order = reading_order(page.cells, gap);
      std::sort(order.begin(), order.end());
      for (std::size_t i = 0; i < order.size(); ++i)
        if (order.size() != n || order[i] != static_cast<int>(i))
          return fail("reading_order is not a permutation in document " + std::to_string(t));
      doc.pages.push_back(std::move(page));
    }
    AssembleOptions opt{rng.uniform(1, 30), rng.uniform(0, 60)};
    for (const auto& e : assemble(doc, labels, opt).elements)
      for (int id : e.source_cell_ids) {
        auto it = seen.find({e.page, id});
        if (it == seen.end()) return fail("unknown cell in document " + std::to_string(t));
        ++it->second;
      }
    for (const auto& [key, count] : seen)
      if (count != 1)
        return fail("cell " + std::to_string(key.second) + " of page " + std::to_string(key.first) + " in document " +
                    std::to_string(t) + " appears " + std::to_string(count) + " times");
    cells_seen += seen.size();
  }
  return {Status::pass, std::to_string(kAssemblyDocuments) + " documents, " + std::to_string(cells_seen) + " cells"};
}

// ---- annotations

StoreOptions store_options() {
  StoreOptions o;
  o.fsync = false;
  auto ms = std::make_shared<std::atomic<long long>>(1'700'000'000'000LL);
  o.clock = [ms] { return TimePoint(std::chrono::milliseconds(ms->fetch_add(1000))); };
  return o;
}

Outcome check_annotations() {
  TempDir dir("crash");
  ParsedDocument doc;
  doc.doc_id = "d1";
  doc.source_hash = content_digest("d1");
  doc.total_pages = 1;
  Page page{1, 612, 792, {}};
  const int n_cells = 12;
  for (int c = 0; c < n_cells; ++c) {
    const double y = 700 - 20.0 * c;
    page.cells.push_back(Cell{c, {72, y, 300, y + 10}, "cell " + std::to_string(c), TextStyle::normal, 10});
  }
  doc.pages.push_back(page);
  auto page_labels = [&](const std::string& label) {
    std::vector<CellAnnotation> out;
    for (int c = 0; c < n_cells; ++c) out.push_back({c, label});
    return out;
  };
  {
    AnnotationStore store(dir.path, store_options());
    store.put_document(doc);
    store.upsert("d1", 1, page_labels("Text"), "u1", "prb", 1);
  }
  const fs::path log = dir.path / "documents" / doc.source_hash / "annotations.jsonl";
  const auto batch = fs::file_size(log);
  const fs::path saved = dir.path / "saved.jsonl";
  fs::copy_file(log, saved);
  const auto before = AnnotationStore(dir.path, store_options()).page_annotations("d1", 1).cells;
  std::size_t cuts = 0, old_state = 0, new_state = 0;
  for (std::size_t cut = 0; cut <= 2 * batch + 40; ++cut, ++cuts) {
    fs::copy_file(saved, log, fs::copy_options::overwrite_existing);
    {
      AnnotationStore store(dir.path, store_options());
      store.inject_crash_after(cut);
      try {
        store.upsert("d1", 1, page_labels("Table"), "u2", "prb", 1);
      } catch (const Error& e) {
        if (e.code() != Errc::internal) return fail("crash surfaced as " + std::string(to_string(e.code())));
      }
    }
    const auto now = AnnotationStore(dir.path, store_options()).page_annotations("d1", 1).cells;
    const bool is_old = now == before;
    const bool is_new = now.size() == static_cast<std::size_t>(n_cells) &&
                        std::all_of(now.begin(), now.end(), [](const auto& kv) {
                          return kv.second.annotator == "u2" && kv.second.label == "Table";
                        });
    if (is_old == is_new) return fail("partial page version after a crash at byte " + std::to_string(cut));
    ++(is_old ? old_state : new_state);
  }
  if (old_state == 0 || new_state == 0) return fail("crash injection never hit one of the two outcomes");

  TempDir fp("fixed-point");
  SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, 12, 4);
  std::string dataset1, model1;
  {
    AnnotationStore store(fp.path, store_options());
    for (std::size_t i = 0; i < c.documents.size(); ++i) {
      store.put_document(c.documents[i]);
      std::map<int, std::vector<CellAnnotation>> pages;
      for (const auto& [ref, label] : c.annotations[i]) pages[ref.page].push_back({ref.cell, label});
      for (const auto& [p, cells] : pages) store.upsert(c.documents[i].doc_id, p, cells, "u", "prb", 1);
    }
    Dataset d = store.export_dataset({}, "prb");
    dataset1 = dataset_json(d);
    ForestParams p;
    p.n_trees = 10;
    model1 = save_model(train_documents(d.documents, d.annotations, d.label_names, p));
  }
  AnnotationStore reopened(fp.path, store_options());
  Dataset d2 = reopened.export_dataset({}, "prb");
  ForestParams p;
  p.n_trees = 10;
  if (dataset_json(d2) != dataset1) return fail("second export differs");
  if (save_model(train_documents(d2.documents, d2.annotations, d2.label_names, p)) != model1)
    return fail("model trained on the second export differs");
  return {Status::pass, std::to_string(cuts) + " crash points (" + std::to_string(old_state) + " old, " +
                            std::to_string(new_state) + " new); export fixed point over " +
                            std::to_string(c.page_count()) + " pages"};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"table1", check_table1},   {"cv", check_cv},           {"parser", check_parser},
    {"forest", check_forest},   {"determinism", check_determinism}, {"scaling", check_scaling},
    {"assembly", check_assembly}, {"annotations", check_annotations},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; one PASS/FAIL/SKIP line per criterion"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("--only", only, "Run just these criteria");
  app.add_flag("--list", list, "Print the criterion names");
  CLI11_PARSE(app, argc, argv);
  if (list) {
    for (const auto& c : kCriteria) std::cout << c.name << "\n";
    return 0;
  }
  for (const auto& name : only)
    if (std::none_of(std::begin(kCriteria), std::end(kCriteria), [&](const Criterion& c) { return name == c.name; })) {
      std::cerr << "unknown criterion: " << name << "\n";
      return 2;
    }
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("threw: ") + e.what());
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << tag << " " << c.name << " [" << fixed(seconds_since(t0), 1) << "s] " << o.detail << std::endl;
    failed += o.status == Status::fail;
  }
  return failed == 0 ? 0 : 1;
}
