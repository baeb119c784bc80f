#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>
#include <unistd.h>

#include "ccs/pipeline.hpp"
#include "ccs/synthetic.hpp"

using namespace ccs;

namespace {

struct Fixture {
  SyntheticCorpus corpus;
  ForestModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.corpus = generate_synthetic_corpus(TemplateSpec{}, 100, 5);
    ForestParams p;
    p.n_trees = 12;
    p.seed = 9;
    x.model = train_documents(x.corpus.documents, x.corpus.annotations, synthetic_label_names(), p);
    return x;
  }();
  return f;
}

}  // namespace

TEST_CASE("run_pool keeps results by index and isolates failures") {
  std::function<int(std::size_t)> sq = [](std::size_t i) {
    if (i == 7) throw Error(Errc::internal, "seven");
    return static_cast<int>(i * i);
  };
  for (int w : {1, 3, 16}) {
    auto r = run_pool(20, w, sq);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].index == 7);
    CHECK(std::string(r.failures[0].message).find("seven") != std::string::npos);
    for (std::size_t i = 0; i < 20; ++i)
      if (i != 7) CHECK(*r.results[i] == static_cast<int>(i * i));
    CHECK_FALSE(r.results[7].has_value());
  }
  CHECK_THROWS_AS(run_pool(3, 0, sq), Error);
  CHECK(run_pool(0, 2, sq).results.empty());
}

TEST_CASE("page-parallel conversion matches the whole-document path") {
  const Fixture& f = fixture();
  for (std::size_t d = 0; d < 3; ++d) {
    const ParsedDocument& doc = f.corpus.documents[d];
    Conversion c = convert_document(doc, f.model, {});
    REQUIRE(c.ok());
    CHECK(c.document == doc);
    DocumentPredictions whole = predict_document(f.model, doc, detect_document(doc));
    REQUIRE(whole.size() == c.predictions.size());
    for (std::size_t p = 0; p < whole.size(); ++p) {
      REQUIRE(whole[p].size() == c.predictions[p].size());
      for (std::size_t k = 0; k < whole[p].size(); ++k) {
        CHECK(whole[p][k].label == c.predictions[p][k].label);
        CHECK(whole[p][k].confidence == c.predictions[p][k].confidence);
      }
    }
    CHECK(c.structured == assemble(doc, labels_of(doc, whole)));

    Conversion from_pdf = convert_pdf(f.corpus.pdfs[d], f.model, ConvertOptions{{}, {}, {}, 3});
    REQUIRE(from_pdf.ok());
    CHECK(from_pdf.document == pdf::parse_pdf(f.corpus.pdfs[d]).document);
    CHECK(from_pdf.structured.elements == c.structured.elements);
  }
}

TEST_CASE("corpus conversion is identical at 1 and 4 workers") {
  const Fixture& f = fixture();
  REQUIRE(f.corpus.page_count() >= 100);
  ConvertOptions one, four;
  four.workers = 4;
  auto a = convert_corpus(f.corpus.pdfs, f.model, one);
  auto b = convert_corpus(f.corpus.pdfs, f.model, four);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].ok());
    CHECK(export_structured(a[i].structured, "json") == export_structured(b[i].structured, "json"));
    CHECK(export_structured(a[i].structured, "markdown") == export_structured(b[i].structured, "markdown"));
  }
  one.workers = 0;
  CHECK_THROWS_AS(convert_corpus(f.corpus.pdfs, f.model, one), Error);
}

TEST_CASE("a poisoned page fails the job and keeps the other pages") {
  const Fixture& f = fixture();
  ParsedDocument doc;
  doc.doc_id = "poisoned";
  for (const auto& d : f.corpus.documents)
    for (const auto& p : d.pages)
      if (doc.pages.size() < 10) {
        doc.pages.push_back(p);
        doc.pages.back().number = static_cast<int>(doc.pages.size());
      }
  doc.total_pages = 10;
  REQUIRE(doc.pages[3].cells.size() > 1);
  std::swap(doc.pages[3].cells[1].bbox.x0, doc.pages[3].cells[1].bbox.x1);
  doc.pages[3].cells[1].bbox.x1 = doc.pages[3].cells[1].bbox.x0 - 5;

  for (int w : {1, 4}) {
    Conversion c = convert_document(doc, f.model, ConvertOptions{{}, {}, {}, w});
    CHECK_FALSE(c.ok());
    REQUIRE(c.page_failures.size() == 1);
    CHECK(c.page_failures[0].index == 3);
    CHECK(c.page_failures[0].message.find("page 4") != std::string::npos);
    CHECK(c.document.pages.size() == 9);
    CHECK(c.predictions.size() == 9);
    CHECK(c.structured.elements.empty());
    std::set<int> kept;
    for (const auto& p : c.document.pages) kept.insert(p.number);
    CHECK(kept.count(4) == 0);
  }

  ParsedDocument gap = doc;
  gap.pages[2].number = 9;
  CHECK_THROWS_AS(convert_document(gap, f.model, {}), Error);
}

TEST_CASE("broken pdf bytes fail one corpus entry") {
  const Fixture& f = fixture();
  std::vector<std::string> pdfs{f.corpus.pdfs[0], "not a pdf", f.corpus.pdfs[1]};
  auto out = convert_corpus(pdfs, f.model, ConvertOptions{{}, {}, {}, 2});
  CHECK(out[0].ok());
  CHECK_FALSE(out[1].ok());
  CHECK_FALSE(out[1].error.empty());
  CHECK(out[2].ok());
  CHECK_THROWS_AS(convert_pdf("not a pdf", f.model, {}), Error);
}

TEST_CASE("throughput benchmark") {
  const Fixture& f = fixture();
  std::vector<std::string> few(f.corpus.pdfs.begin(), f.corpus.pdfs.begin() + 2);
  const std::vector<int> w1{1};
  CHECK_THROWS_AS(benchmark_throughput(few, f.model, w1), Error);
  CHECK_THROWS_AS(benchmark_throughput(few, f.model, std::vector<int>{0}, {}, 1), Error);
  auto samples = benchmark_throughput(few, f.model, w1, {}, 1);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].workers == 1);
  CHECK(samples[0].pages == f.corpus.documents[0].pages.size() + f.corpus.documents[1].pages.size());
  CHECK(samples[0].pages_per_second > 0);
  CHECK(samples[0].pages_per_second == doctest::Approx(samples[0].pages / samples[0].seconds));
  const std::string csv = throughput_csv(samples);
  CHECK(csv.rfind("workers,pages,seconds,pages_per_sec\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("corpus directories round trip") {
  const Fixture& f = fixture();
  const auto dir = std::filesystem::temp_directory_path() / ("ccs-corpus-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  const std::size_t n = 4;
  write_corpus_dir(dir, std::span(f.corpus.documents).first(n), std::span(f.corpus.annotations).first(n),
                   std::span(f.corpus.pdfs).first(n));
  CorpusDir back = read_corpus_dir(dir);
  REQUIRE(back.documents.size() == n);
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < n; ++i) at[f.corpus.documents[i].doc_id] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = at.at(back.documents[i].doc_id);
    CHECK(back.documents[i] == f.corpus.documents[k]);
    CHECK(back.annotations[i] == f.corpus.annotations[k]);
    CHECK(back.pdfs[i] == f.corpus.pdfs[k]);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_corpus_dir(dir), Error);
  CHECK_THROWS_AS(cell_labels_from_json(R"({"labels":[{"page":1,"cell":0,"label":"A"},{"page":1,"cell":0,"label":"B"}]})"),
                  Error);
  CHECK_THROWS_AS(cell_labels_from_json("{"), Error);
}
