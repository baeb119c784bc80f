#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ccs/annotations.hpp"
#include "ccs/forest.hpp"
#include "ccs/synthetic.hpp"

using namespace ccs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> n{0};
    path = fs::temp_directory_path() / ("ccs-ann-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Clock that advances a fixed step per call.
struct FakeClock {
  std::shared_ptr<std::atomic<long long>> ms = std::make_shared<std::atomic<long long>>(1'700'000'000'000LL);
  long long step = 1000;
  TimePoint operator()() const { return TimePoint(std::chrono::milliseconds(ms->fetch_add(step))); }
};

StoreOptions fast_options(FakeClock clock = {}) {
  StoreOptions o;
  o.clock = clock;
  o.fsync = false;
  return o;
}

ParsedDocument small_doc(const std::string& id, int pages, int cells_per_page) {
  ParsedDocument d;
  d.doc_id = id;
  d.source_hash = content_digest(id);
  d.total_pages = pages;
  for (int p = 1; p <= pages; ++p) {
    Page page{p, 612, 792, {}};
    for (int c = 0; c < cells_per_page; ++c) {
      double y = 700 - 20.0 * c;
      page.cells.push_back(Cell{c, {72, y, 200 + 10.0 * (c % 3), y + 10}, "cell " + std::to_string(c),
                                c % 4 == 0 ? TextStyle::bold : TextStyle::normal, 10});
    }
    d.pages.push_back(std::move(page));
  }
  return d;
}

std::vector<CellAnnotation> full_page(int cells, const std::string& label = "Text") {
  std::vector<CellAnnotation> out;
  for (int c = 0; c < cells; ++c) out.push_back({c, c == 0 ? "Title" : label});
  return out;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::internal;
}

}  // namespace

TEST_CASE("timestamps round trip") {
  TimePoint t = parse_timestamp("2026-10-16T12:34:56.789Z");
  CHECK(format_timestamp(t) == "2026-10-16T12:34:56.789Z");
  CHECK(format_timestamp(parse_timestamp("2026-01-02T03:04:05Z")) == "2026-01-02T03:04:05.000Z");
  CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
  CHECK_THROWS_AS(parse_timestamp("2026-01-02T03:04:05+01:00"), Error);
}

TEST_CASE("label sets") {
  LabelSet d = default_label_set();
  CHECK(d.names() == std::vector<std::string>{"Title", "Abstract", "Authors", "Subtitle", "Text", "Table", "Figure"});
  CHECK_NOTHROW(validate_label_set(d));
  CHECK(prb_label_set().names() == synthetic_label_names());
  CHECK_NOTHROW(validate_label_set(prb_label_set()));
  CHECK(label_set_from_json(label_set_json(d)) == d);

  LabelSet bad = d;
  bad.labels.push_back({"Title", "#123456"});
  CHECK(code_of([&] { validate_label_set(bad); }) == Errc::invalid_argument);
  bad = d;
  bad.labels.push_back({"Caption", "#FF0000"});  // same colour as Title
  CHECK(code_of([&] { validate_label_set(bad); }) == Errc::invalid_argument);
  bad = d;
  bad.labels[0].color = "red";
  CHECK(code_of([&] { validate_label_set(bad); }) == Errc::invalid_argument);

  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  CHECK(store.label_sets().size() == 2);
  LabelSet mine{"mine", {{"A", "#000001"}, {"B", "#000002"}}, 0};
  CHECK(store.put_label_set(mine, std::nullopt).version == 1);
  mine.labels.push_back({"C", "#000003"});
  CHECK(code_of([&] { store.put_label_set(mine, std::nullopt); }) == Errc::conflict);
  CHECK(store.put_label_set(mine, 1).version == 2);
  CHECK(code_of([&] { store.put_label_set(mine, 1); }) == Errc::conflict);
  CHECK(store.put_label_set(mine, 2).version == 3);
  CHECK(code_of([&] { store.label_set("nope"); }) == Errc::not_found);

  AnnotationStore reopened(dir.path, fast_options());
  CHECK(reopened.label_set("mine").version == 3);
  CHECK(reopened.label_set("mine").labels.size() == 3);
}

TEST_CASE("upserts") {
  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  store.put_document(small_doc("d1", 2, 10));
  const int v = store.label_set("prb").version;

  SUBCASE("a full page is accepted and complete") {
    CHECK(store.upsert("d1", 1, full_page(10), "u1", "prb", v) == 10);
    auto pa = store.page_annotations("d1", 1);
    CHECK(pa.complete);
    CHECK(pa.cells.size() == 10);
    CHECK(pa.cells.at(0).label == "Title");
    CHECK_FALSE(store.page_annotations("d1", 2).complete);
  }
  SUBCASE("an unknown label rejects the whole batch") {
    auto batch = full_page(10);
    batch[7].label = "Banana";
    CHECK(code_of([&] { store.upsert("d1", 1, batch, "u1", "prb", v); }) == Errc::not_found);
    CHECK(store.page_annotations("d1", 1).cells.empty());
  }
  SUBCASE("a bad record on one page keeps the other page untouched too") {
    std::vector<AnnotationRecord> recs;
    for (int c = 0; c < 10; ++c) recs.push_back({"d1", 1, c, "Text", "u1", "", "prb", v});
    recs.push_back({"d1", 2, 99, "Text", "u1", "", "prb", v});
    CHECK(code_of([&] { store.upsert_annotations(recs); }) == Errc::not_found);
    CHECK(store.page_annotations("d1", 1).cells.empty());
  }
  SUBCASE("newest write wins and history is kept") {
    store.upsert("d1", 1, full_page(10), "u1", "prb", v);
    std::vector<CellAnnotation> fix{{3, "Author"}};
    store.upsert("d1", 1, fix, "u2", "prb", v);
    CHECK(store.page_annotations("d1", 1).cells.at(3).label == "Author");
    auto h = store.history("d1", 1, 3);
    REQUIRE(h.size() == 2);
    CHECK(h[0].label == "Text");
    CHECK(h[1].annotator == "u2");
  }
  SUBCASE("stale label-set version") {
    LabelSet ls = store.label_set("prb");
    ls.labels.push_back({"Caption", "#ffc0cb"});
    store.put_label_set(ls, ls.version);
    CHECK(code_of([&] { store.upsert("d1", 1, full_page(10), "u1", "prb", v); }) == Errc::conflict);
    CHECK(store.upsert("d1", 1, full_page(10), "u1", "prb", v + 1) == 10);
    CHECK(store.page_annotations("d1", 1).cells.at(5).label_set_version <= store.label_set("prb").version);
  }
  SUBCASE("unknown document, page, cell") {
    CHECK(code_of([&] { store.upsert("zz", 1, full_page(1), "u1", "prb", v); }) == Errc::not_found);
    CHECK(code_of([&] { store.upsert("d1", 9, full_page(1), "u1", "prb", v); }) == Errc::not_found);
    std::vector<CellAnnotation> bad{{42, "Text"}};
    CHECK(code_of([&] { store.upsert("d1", 1, bad, "u1", "prb", v); }) == Errc::not_found);
  }
  SUBCASE("state survives reopening") {
    store.upsert("d1", 1, full_page(10), "u1", "prb", v);
    store.upsert("d1", 2, full_page(4), "u1", "prb", v);
    AnnotationStore again(dir.path, fast_options());
    CHECK(again.document("d1") == store.document("d1"));
    CHECK(again.page_annotations("d1", 1).cells == store.page_annotations("d1", 1).cells);
    CHECK(again.page_annotations("d1", 2).cells.size() == 4);
    CHECK(again.page_annotations("d1", 1).complete);
  }
}

TEST_CASE("crash injection never leaves a partial page") {
  TempDir dir;
  ParsedDocument doc = small_doc("d1", 1, 8);
  {
    AnnotationStore store(dir.path, fast_options());
    store.put_document(doc);
    store.upsert("d1", 1, full_page(8, "Text"), "u1", "prb", 1);
  }
  // Size of one serialised batch, to try every cut point.
  const fs::path log = dir.path / "documents" / doc.source_hash / "annotations.jsonl";
  const auto one_batch = fs::file_size(log);
  const fs::path saved = dir.path / "saved.jsonl";
  fs::copy_file(log, saved);
  const auto before = AnnotationStore(dir.path, fast_options()).page_annotations("d1", 1).cells;
  for (std::size_t cut = 0; cut < 2 * one_batch + 40; cut += 7) {
    CAPTURE(cut);
    fs::copy_file(saved, log, fs::copy_options::overwrite_existing);
    {
      AnnotationStore store(dir.path, fast_options());
      store.inject_crash_after(cut);
      try {
        store.upsert("d1", 1, full_page(8, "Table"), "u2", "prb", 1);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::internal);
      }
    }
    AnnotationStore reopened(dir.path, fast_options());
    auto now = reopened.page_annotations("d1", 1).cells;
    bool old_version = now == before;
    bool new_version = std::all_of(now.begin(), now.end(), [](const auto& kv) {
      return kv.second.annotator == "u2" && kv.second.label == (kv.first == 0 ? "Title" : "Table");
    });
    CHECK(now.size() == 8);
    CHECK(old_version != new_version);
    if (old_version) CHECK(fs::file_size(log) == one_batch);
  }
  fs::copy_file(saved, log, fs::copy_options::overwrite_existing);
  SUBCASE("the same store keeps working after a failed append") {
    AnnotationStore store(dir.path, fast_options());
    store.inject_crash_after(25);
    CHECK_THROWS_AS(store.upsert("d1", 1, full_page(8, "Table"), "u2", "prb", 1), Error);
    store.upsert("d1", 1, full_page(8, "Author"), "u3", "prb", 1);
    AnnotationStore reopened(dir.path, fast_options());
    CHECK(reopened.page_annotations("d1", 1).cells.at(5).label == "Author");
    CHECK(reopened.history("d1", 1, 5).size() == 2);
  }
}

TEST_CASE("compaction") {
  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  ParsedDocument doc = small_doc("d1", 2, 5);
  store.put_document(doc);
  store.upsert("d1", 1, full_page(5), "u1", "prb", 1);
  store.upsert("d1", 1, full_page(5, "Table"), "u1", "prb", 1);
  const fs::path log = dir.path / "documents" / doc.source_hash / "annotations.jsonl";
  const fs::path saved = dir.path / "saved.jsonl";
  fs::copy_file(log, saved);
  store.compact("d1");
  CHECK(fs::file_size(log) == 0);
  store.upsert("d1", 2, full_page(5), "u1", "prb", 1);
  {
    AnnotationStore again(dir.path, fast_options());
    CHECK(again.history("d1", 1, 2).size() == 2);
    CHECK(again.page_annotations("d1", 2).complete);
  }
  // A crash between writing the snapshot and truncating the log leaves old
  // batches behind; they must not be applied twice.
  std::string tail;
  {
    std::ifstream in(log);
    tail.assign(std::istreambuf_iterator<char>(in), {});
  }
  fs::copy_file(saved, log, fs::copy_options::overwrite_existing);
  {
    std::ofstream out(log, std::ios::app);
    out << tail;
  }
  AnnotationStore again(dir.path, fast_options());
  CHECK(again.history("d1", 1, 2).size() == 2);
  CHECK(again.page_annotations("d1", 2).complete);
}

TEST_CASE("session stats") {
  TempDir dir;
  FakeClock clock;
  clock.step = 2000;  // one page every 2 seconds
  AnnotationStore store(dir.path, fast_options(clock));
  store.put_document(small_doc("d1", 61, 3));
  TimePoint start = clock();
  for (int p = 1; p <= 60; ++p) store.upsert("d1", p, full_page(3), "u1", "prb", 1);
  SessionStats s = store.session_stats("u1", {start, start + std::chrono::minutes(2)});
  CHECK(s.pages_completed == 60);
  CHECK(s.elapsed_minutes == doctest::Approx(2.0));
  CHECK(s.pages_per_minute == doctest::Approx(30.0));

  std::vector<CellAnnotation> partial{{0, "Text"}};
  store.upsert("d1", 61, partial, "u2", "prb", 1);
  SessionStats z = store.session_stats("u2");
  CHECK(z.pages_completed == 0);
  CHECK(z.pages_per_minute == 0);
  CHECK(code_of([&] { store.session_stats("nobody"); }) == Errc::not_found);
}

TEST_CASE("dataset export") {
  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  store.put_document(small_doc("b", 2, 6));
  store.put_document(small_doc("a", 2, 6));
  CHECK(code_of([&] { store.export_dataset({}, "prb"); }) == Errc::empty_selection);
  store.upsert("a", 1, full_page(6), "u", "prb", 1);
  store.upsert("a", 2, full_page(6), "u", "prb", 1);
  store.upsert("b", 2, full_page(6), "u", "prb", 1);
  std::vector<CellAnnotation> partial{{0, "Title"}, {1, "Text"}};
  store.upsert("b", 1, partial, "u", "prb", 1);

  Dataset d = store.export_dataset({}, "prb");
  REQUIRE(d.documents.size() == 2);
  CHECK(d.documents[0].doc_id == "a");
  CHECK(d.documents[0].pages.size() == 2);
  CHECK(d.documents[1].pages.size() == 1);
  CHECK(d.documents[1].pages[0].number == 2);
  CHECK(d.annotations[1].size() == 6);
  CHECK(dataset_json(d) == dataset_json(store.export_dataset({}, "prb")));
  CHECK(store.export_dataset({{"b"}}, "prb").documents.size() == 1);
  CHECK(code_of([&] { store.export_dataset({{"missing"}}, "prb"); }) == Errc::empty_selection);
  // "Picture" is not part of the default set, so that page drops out there.
  store.upsert("b", 2, full_page(6, "Picture"), "u", "prb", 1);
  Dataset def = store.export_dataset({}, "default");
  REQUIRE(def.documents.size() == 1);
  CHECK(def.documents[0].doc_id == "a");
  CHECK(code_of([&] { store.export_dataset({{"b"}}, "default"); }) == Errc::empty_selection);
}

TEST_CASE("export, train and export again is a fixed point") {
  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  SyntheticCorpus c = generate_synthetic_corpus(TemplateSpec{}, 6, 4);
  for (std::size_t i = 0; i < c.documents.size(); ++i) {
    store.put_document(c.documents[i]);
    std::map<int, std::vector<CellAnnotation>> pages;
    for (const auto& [ref, label] : c.annotations[i]) pages[ref.page].push_back({ref.cell, label});
    for (const auto& [p, cells] : pages) store.upsert(c.documents[i].doc_id, p, cells, "u", "prb", 1);
  }
  auto model_of = [](const Dataset& d) {
    FeatureSchema schema = make_feature_schema();
    std::vector<double> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < d.documents.size(); ++i) {
      FeatureMatrix m = build_matrix(d.documents[i], detect_document(d.documents[i]), schema, &d.annotations[i],
                                     d.label_names);
      x.insert(x.end(), m.values.begin(), m.values.end());
      y.insert(y.end(), m.labels.begin(), m.labels.end());
    }
    ForestParams p;
    p.n_trees = 10;
    return save_model(train(TrainData{x, y.size(), y}, schema, d.label_names, p));
  };
  Dataset first = store.export_dataset({}, "prb");
  std::string m1 = model_of(first);
  AnnotationStore reopened(dir.path, fast_options());
  Dataset second = reopened.export_dataset({}, "prb");
  CHECK(dataset_json(first) == dataset_json(second));
  CHECK(model_of(second) == m1);
}

TEST_CASE("concurrent writers on different documents") {
  TempDir dir;
  AnnotationStore store(dir.path, fast_options());
  for (int d = 0; d < 4; ++d) store.put_document(small_doc("d" + std::to_string(d), 20, 4));
  std::vector<std::jthread> threads;
  for (int d = 0; d < 4; ++d)
    threads.emplace_back([&, d] {
      for (int p = 1; p <= 20; ++p) store.upsert("d" + std::to_string(d), p, full_page(4), "u" + std::to_string(d), "prb", 1);
    });
  std::atomic<bool> stop{false};
  std::jthread reader([&] {
    while (!stop) (void)store.page_annotations("d0", 1);
  });
  threads.clear();
  stop = true;
  reader.join();
  for (int d = 0; d < 4; ++d)
    for (int p = 1; p <= 20; ++p) CHECK(store.page_annotations("d" + std::to_string(d), p).complete);
  CHECK(store.export_dataset({}, "prb").documents.size() == 4);
}
