#include "ccs/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace ccs {

namespace {

void check_schema(const ForestModel& model) {
  if (model.schema.version != kFeatureSchemaVersion)
    throw Error(Errc::schema_mismatch, "model feature schema '" + model.schema.version + "' differs from '" +
                                           kFeatureSchemaVersion + "'");
  if (!(make_feature_schema(model.schema.detection_classes) == model.schema))
    throw Error(Errc::schema_mismatch, "model feature names do not match the current schema");
}

struct RawPage {
  Page page;
  std::vector<std::string> warnings;
};

struct Source {
  std::string doc_id;
  std::string source_hash;
  int total_pages = 0;
  std::vector<std::string> warnings;
  std::function<RawPage(int)> page;  // 0-based
  std::map<int, std::vector<DetectionRegion>> imported;
  std::string error;
};

std::string page_locus(int number, const std::string& what) { return "page " + std::to_string(number) + ": " + what; }

// Runs every page of every source through one pool and reassembles by index.
std::vector<Conversion> run_sources(std::vector<Source>& sources, const ForestModel& model,
                                    const ConvertOptions& options) {
  if (options.workers < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  check_schema(model);
  std::vector<std::pair<std::size_t, int>> tasks;
  for (std::size_t d = 0; d < sources.size(); ++d)
    if (sources[d].error.empty())
      for (int p = 0; p < sources[d].total_pages; ++p) tasks.emplace_back(d, p);

  std::function<PageOutput(std::size_t)> task = [&](std::size_t t) {
    const auto [d, p] = tasks[t];
    const Source& src = sources[d];
    RawPage raw;
    try {
      raw = src.page(p);
    } catch (const std::exception& e) {
      throw Error(Errc::internal, page_locus(p + 1, e.what()));
    }
    auto it = src.imported.find(raw.page.number);
    std::span<const DetectionRegion> imported;
    if (it != src.imported.end()) imported = it->second;
    try {
      PageOutput out = classify_page(raw.page, src.doc_id, src.total_pages, model, imported, options.detect);
      out.warnings = std::move(raw.warnings);
      return out;
    } catch (const std::exception& e) {
      throw Error(Errc::internal, page_locus(raw.page.number, e.what()));
    }
  };
  PoolResult<PageOutput> pooled = run_pool(tasks.size(), options.workers, task);

  std::vector<Conversion> out(sources.size());
  for (std::size_t d = 0; d < sources.size(); ++d) {
    out[d].document.doc_id = sources[d].doc_id;
    out[d].document.source_hash = sources[d].source_hash;
    out[d].document.total_pages = sources[d].total_pages;
    out[d].error = sources[d].error;
    for (const auto& w : sources[d].warnings) out[d].warnings.push_back({0, w});
  }
  std::size_t f = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto [d, p] = tasks[t];
    Conversion& c = out[d];
    if (!pooled.results[t]) {
      while (pooled.failures[f].index != t) ++f;
      c.page_failures.push_back({static_cast<std::size_t>(p), pooled.failures[f].message});
      continue;
    }
    PageOutput& po = *pooled.results[t];
    for (auto& w : po.warnings) c.warnings.push_back({po.page.number, std::move(w)});
    c.predictions.push_back(std::move(po.predictions));
    c.document.pages.push_back(std::move(po.page));
  }
  for (auto& c : out) {
    if (!c.ok()) continue;
    c.labels = labels_of(c.document, c.predictions);
    c.structured = assemble(c.document, c.labels, options.assemble);
  }
  return out;
}

Source pdf_source(std::string_view bytes, const ConvertOptions& options) {
  auto model = std::make_shared<pdf::PdfDocumentModel>(pdf::PdfDocumentModel::load(std::string(bytes)));
  Source s;
  s.source_hash = model->source_hash();
  s.doc_id = s.source_hash.substr(0, 16);
  s.total_pages = model->page_count();
  s.warnings = model->warnings();
  s.page = [model, merge = options.merge](int i) {
    auto r = model->parse_page(i, merge);
    return RawPage{std::move(r.page), std::move(r.warnings)};
  };
  return s;
}

void add_imported(Source& s, std::span<const DetectionRegion> imported) {
  for (const auto& r : imported) s.imported[r.page].push_back(r);
}

}  // namespace

PageOutput classify_page(const Page& page, const std::string& doc_id, int total_pages, const ForestModel& model,
                         std::span<const DetectionRegion> imported, const DetectOptions& detect) {
  ParsedDocument one{doc_id, "", {page}, 1};
  one.pages[0].number = 1;
  if (auto v = validate_document(one); !v.empty())
    throw Error(Errc::invariant, v.front().invariant + " at " + v.front().locus);
  one.pages[0].number = page.number;
  one.total_pages = total_pages;
  PageOutput out;
  out.regions = imported.empty() ? heuristic_detect(page, detect)
                                 : std::vector<DetectionRegion>(imported.begin(), imported.end());
  FeatureMatrix m = build_matrix(one, PageRegions{{page.number, out.regions}}, model.schema);
  out.predictions.resize(page.cells.size());
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    Prediction pr = predict(model, m.row(r));
    const auto label = static_cast<std::size_t>(pr.label);
    out.predictions[static_cast<std::size_t>(m.refs[r].cell)] = {model.labels[label], pr.probabilities[label]};
  }
  out.page = page;
  return out;
}

CellLabels labels_of(const ParsedDocument& doc, const DocumentPredictions& predictions) {
  if (predictions.size() != doc.pages.size())
    throw Error(Errc::invalid_argument, "predictions do not match the document's pages");
  CellLabels out;
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    const Page& page = doc.pages[p];
    if (predictions[p].size() != page.cells.size())
      throw Error(Errc::invalid_argument, page_locus(page.number, "predictions do not match the cells"));
    for (const Cell& c : page.cells)
      out[{page.number, c.id}] = predictions[p][static_cast<std::size_t>(c.id)].label;
  }
  return out;
}

Conversion convert_pdf(std::string_view pdf_bytes, const ForestModel& model, const ConvertOptions& options,
                       std::span<const DetectionRegion> imported) {
  std::vector<Source> s;
  s.push_back(pdf_source(pdf_bytes, options));
  add_imported(s.back(), imported);
  return std::move(run_sources(s, model, options).front());
}

Conversion convert_document(const ParsedDocument& doc, const ForestModel& model, const ConvertOptions& options,
                            std::span<const DetectionRegion> imported) {
  if (doc.total_pages != static_cast<int>(doc.pages.size()))
    throw Error(Errc::invariant, "total_pages does not match the page count");
  for (std::size_t i = 0; i < doc.pages.size(); ++i)
    if (doc.pages[i].number != static_cast<int>(i) + 1)
      throw Error(Errc::invariant, page_locus(doc.pages[i].number, "out of sequence"));
  std::vector<Source> s(1);
  s[0].doc_id = doc.doc_id;
  s[0].source_hash = doc.source_hash;
  s[0].total_pages = static_cast<int>(doc.pages.size());
  s[0].page = [&doc](int i) { return RawPage{doc.pages[static_cast<std::size_t>(i)], {}}; };
  add_imported(s[0], imported);
  return std::move(run_sources(s, model, options).front());
}

std::vector<Conversion> convert_corpus(std::span<const std::string> pdfs, const ForestModel& model,
                                       const ConvertOptions& options) {
  if (options.workers < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  std::function<Source(std::size_t)> load = [&](std::size_t i) { return pdf_source(pdfs[i], options); };
  PoolResult<Source> loaded = run_pool(pdfs.size(), options.workers, load);
  std::vector<Source> sources(pdfs.size());
  for (std::size_t i = 0; i < pdfs.size(); ++i)
    if (loaded.results[i]) sources[i] = std::move(*loaded.results[i]);
  for (const auto& f : loaded.failures) sources[f.index].error = f.message;
  return run_sources(sources, model, options);
}

ForestModel train_documents(std::span<const ParsedDocument> docs, std::span<const CellLabels> annotations,
                            std::span<const std::string> label_names, const ForestParams& params,
                            const DetectOptions& detect, int workers) {
  if (docs.size() != annotations.size())
    throw Error(Errc::invalid_argument, "documents and annotations are not aligned");
  const FeatureSchema schema = make_feature_schema();
  std::vector<double> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    FeatureMatrix m = build_matrix(docs[i], detect_document(docs[i], {}, detect), schema, &annotations[i], label_names);
    x.insert(x.end(), m.values.begin(), m.values.end());
    y.insert(y.end(), m.labels.begin(), m.labels.end());
  }
  if (y.empty()) throw Error(Errc::empty_selection, "empty selection: no annotated cells");
  return train(TrainData{x, y.size(), y}, schema, label_names, params, workers);
}

std::string cell_labels_json(const std::string& doc_id, const CellLabels& labels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [ref, label] : labels) arr.push_back({{"page", ref.page}, {"cell", ref.cell}, {"label", label}});
  return nlohmann::json{{"doc_id", doc_id}, {"labels", std::move(arr)}}.dump();
}

CellLabels cell_labels_from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    CellLabels out;
    for (const auto& l : j.at("labels")) {
      CellRef ref{l.at("page").get<int>(), l.at("cell").get<int>()};
      if (!out.emplace(ref, l.at("label").get<std::string>()).second)
        throw Error(Errc::invalid_argument, "duplicate label for page " + std::to_string(ref.page) + " cell " +
                                                std::to_string(ref.cell));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::syntax, std::string("labels: ") + e.what());
  }
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::internal, "cannot write " + p.string());
}

}  // namespace

CorpusDir read_corpus_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(Errc::not_found, "no such directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 9 && name.compare(name.size() - 9, 9, ".ccs.json") == 0) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  CorpusDir out;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const std::string stem = name.substr(0, name.size() - 9);
    out.documents.push_back(deserialize_document(slurp(f)));
    const fs::path labels = dir / (stem + ".labels.json"), pdf = dir / (stem + ".pdf");
    out.annotations.push_back(fs::exists(labels) ? cell_labels_from_json(slurp(labels)) : CellLabels{});
    out.pdfs.push_back(fs::exists(pdf) ? slurp(pdf) : std::string());
  }
  return out;
}

void write_corpus_dir(const std::filesystem::path& dir, std::span<const ParsedDocument> docs,
                      std::span<const CellLabels> labels, std::span<const std::string> pdfs) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string& id = docs[i].doc_id;
    spill(dir / (id + ".ccs.json"), serialize_document(docs[i]));
    if (i < labels.size()) spill(dir / (id + ".labels.json"), cell_labels_json(id, labels[i]));
    if (i < pdfs.size()) spill(dir / (id + ".pdf"), pdfs[i]);
  }
}

std::vector<ThroughputSample> benchmark_throughput(std::span<const std::string> pdfs, const ForestModel& model,
                                                   std::span<const int> worker_counts,
                                                   const ConvertOptions& options, std::size_t min_pages) {
  if (worker_counts.empty()) throw Error(Errc::invalid_argument, "no worker counts given");
  for (int w : worker_counts)
    if (w < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  std::size_t pages = 0;
  for (const auto& p : pdfs) pages += static_cast<std::size_t>(pdf::PdfDocumentModel::load(p).page_count());
  if (pages < min_pages)
    throw Error(Errc::invalid_argument, "corpus too small: " + std::to_string(pages) + " pages, need at least " +
                                            std::to_string(min_pages));
  std::vector<ThroughputSample> out;
  for (int w : worker_counts) {
    ConvertOptions o = options;
    o.workers = w;
    const auto t0 = std::chrono::steady_clock::now();
    auto results = convert_corpus(pdfs, model, o);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : results)
      if (!r.ok())
        throw Error(Errc::internal, "benchmark conversion failed: " +
                                        (r.error.empty() ? r.page_failures.front().message : r.error));
    ThroughputSample s{w, pages, secs, 0};
    s.pages_per_second = secs > 0 ? static_cast<double>(pages) / secs : 0;
    out.push_back(s);
  }
  return out;
}

std::string throughput_csv(std::span<const ThroughputSample> samples) {
  std::string out = "workers,pages,seconds,pages_per_sec\n";
  char buf[128];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.6f,%.3f\n", s.workers, s.pages, s.seconds, s.pages_per_second);
    out += buf;
  }
  return out;
}

}  // namespace ccs
