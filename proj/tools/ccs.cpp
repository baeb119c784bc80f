#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "ccs/evaluate.hpp"
#include "ccs/pipeline.hpp"
#include "ccs/service.hpp"
#include "ccs/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ccs;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& out, std::string_view bytes) {
  if (out.empty() || out == "-") {
    std::cout << bytes;
    if (!bytes.empty() && bytes.back() != '\n') std::cout << '\n';
    return;
  }
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::internal, "cannot write " + out);
}

bool is_pdf(const std::string& bytes) { return bytes.find("%PDF-") < 1024; }

ParsedDocument load_document(const std::string& path, int workers) {
  std::string bytes = slurp(path);
  if (is_pdf(bytes)) {
    pdf::ParseOptions o;
    o.workers = workers;
    return pdf::parse_pdf(bytes, o).document;
  }
  return deserialize_document(bytes);
}

// Training data: either a corpus directory or the annotation store.
struct TrainingSet {
  std::vector<ParsedDocument> docs;
  std::vector<CellLabels> labels;
  std::vector<std::string> names;
};

TrainingSet training_set(const std::string& data, const std::string& store, const std::string& labelset) {
  TrainingSet t;
  if (!store.empty()) {
    AnnotationStore s(store);
    Dataset d = s.export_dataset({}, labelset);
    t.docs = std::move(d.documents);
    t.labels = std::move(d.annotations);
    t.names = std::move(d.label_names);
    return t;
  }
  CorpusDir c = read_corpus_dir(data);
  for (std::size_t i = 0; i < c.documents.size(); ++i) {
    if (c.annotations[i].empty()) continue;
    t.docs.push_back(std::move(c.documents[i]));
    t.labels.push_back(std::move(c.annotations[i]));
  }
  t.names = labelset == "prb" ? prb_label_set().names()
            : labelset == "default" ? default_label_set().names()
                                    : label_set_from_json(slurp(labelset)).names();
  return t;
}

json job_result(httplib::Client& cli, const httplib::Result& r) {
  if (!r) throw Error(Errc::internal, "request failed: " + httplib::to_string(r.error()));
  if (r->status != 202) throw Error(Errc::internal, "server answered " + std::to_string(r->status) + ": " + r->body);
  const std::string id = json::parse(r->body)["job"];
  for (;;) {
    auto got = cli.Get("/jobs/" + id);
    if (!got) throw Error(Errc::internal, "lost the server while polling " + id);
    json j = json::parse(got->body);
    if (j["state"] == "done") return j;
    if (j["state"] == "failed") throw Error(Errc::internal, "job " + id + " failed: " + j.value("error", ""));
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus conversion: parse PDFs, train and apply cell classifiers, assemble structured documents"};
  app.require_subcommand(1);
  app.fallthrough();
  int workers = 1;
  std::uint64_t seed = 42;
  int k = 10;
  std::string model_path, labelset = "prb", server;
  app.add_option("--workers", workers, "page workers")->check(CLI::PositiveNumber);
  app.add_option("--server", server, "send the work to a running service, e.g. http://127.0.0.1:8080");

  // parse
  auto* parse = app.add_subcommand("parse", "PDF to .ccs.json");
  std::string parse_in, parse_out, parse_id;
  parse->add_option("pdf", parse_in)->required();
  parse->add_option("-o,--out", parse_out, "output file (stdout when absent)");
  parse->add_option("--doc-id", parse_id);

  // train
  auto* tr = app.add_subcommand("train", "train a cell classifier");
  std::string data_dir, store_dir, train_out;
  ForestParams fp;
  tr->add_option("--data", data_dir, "corpus directory (.ccs.json + .labels.json)");
  tr->add_option("--store", store_dir, "annotation store root");
  tr->add_option("--labelset", labelset, "prb, default or a label set JSON file");
  tr->add_option("--model,-o", model_path, "model file to write")->required();
  tr->add_option("--trees", fp.n_trees);
  tr->add_option("--max-depth", fp.max_depth);
  tr->add_option("--seed", seed);

  // predict
  auto* pr = app.add_subcommand("predict", "per-cell labels for a document");
  std::string pr_in, pr_out, detections;
  pr->add_option("document", pr_in, "PDF or .ccs.json")->required();
  pr->add_option("--model", model_path)->required();
  pr->add_option("--detections", detections, "JSONL detections overriding the heuristic");
  pr->add_option("-o,--out", pr_out);

  // convert
  auto* cv = app.add_subcommand("convert", "PDFs to structured JSON and Markdown");
  std::vector<std::string> cv_in;
  std::string cv_out = ".";
  double xy_gap = 12, merge_gap = 24;
  cv->add_option("documents", cv_in, "PDF or .ccs.json files")->required();
  cv->add_option("--model", model_path, "model file, or model id with --server")->required();
  cv->add_option("--out-dir", cv_out);
  cv->add_option("--xy-gap", xy_gap);
  cv->add_option("--merge-gap", merge_gap);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "k-fold cross-validation");
  std::string ev_out;
  ForestParams ep;
  ev->add_option("--data", data_dir);
  ev->add_option("--store", store_dir);
  ev->add_option("--labelset", labelset);
  ev->add_option("--k", k)->check(CLI::Range(2, 1000));
  ev->add_option("--seed", seed);
  ev->add_option("--trees", ep.n_trees);
  ev->add_option("-o,--out", ev_out, "report JSON");

  // bench
  auto* bn = app.add_subcommand("bench", "end-to-end pages/sec per worker count");
  std::vector<int> bench_workers{1, 2, 4};
  std::string bench_out;
  std::size_t min_pages = 200;
  bn->add_option("--data", data_dir, "directory of PDFs")->required();
  bn->add_option("--model", model_path)->required();
  bn->add_option("--worker-counts", bench_workers)->delimiter(',');
  bn->add_option("--min-pages", min_pages);
  bn->add_option("-o,--out", bench_out, "CSV file");

  // serve
  auto* sv = app.add_subcommand("serve", "run the HTTP service");
  std::string config_file;
  sv->add_option("--config", config_file, "JSON config file");

  // gen-corpus
  auto* gc = app.add_subcommand("gen-corpus", "write a deterministic synthetic corpus");
  int pages = 400;
  std::string gc_out;
  gc->add_option("--pages", pages)->check(CLI::PositiveNumber);
  gc->add_option("--seed", seed);
  gc->add_option("--out", gc_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse) {
      if (!server.empty()) {
        httplib::Client cli(server);
        cli.set_read_timeout(600, 0);
        std::string path = "/documents";
        if (!parse_id.empty()) path += "?doc_id=" + parse_id;
        json job = job_result(cli, cli.Post(path, slurp(parse_in), "application/pdf"));
        auto doc = cli.Get(job["result"].get<std::string>());
        emit(parse_out, doc->body);
        return 0;
      }
      pdf::ParseOptions o;
      o.workers = workers;
      o.doc_id = parse_id;
      pdf::ParseResult r = pdf::parse_pdf(slurp(parse_in), o);
      for (const auto& w : r.warnings) std::cerr << "warning: page " << w.page << ": " << w.message << "\n";
      emit(parse_out, serialize_document(r.document));
    } else if (*tr) {
      if (data_dir.empty() == store_dir.empty()) throw Error(Errc::invalid_argument, "give exactly one of --data, --store");
      fp.seed = seed;
      TrainingSet t = training_set(data_dir, store_dir, labelset);
      ForestModel m = train_documents(t.docs, t.labels, t.names, fp, {}, workers);
      emit(model_path, save_model(m));
      std::cerr << "trained " << m.trees.size() << " trees on " << m.n_rows << " cells\n";
    } else if (*pr) {
      ParsedDocument doc = load_document(pr_in, workers);
      ForestModel m = load_model(slurp(model_path));
      std::vector<DetectionRegion> regions;
      if (!detections.empty()) regions = import_detections(doc, parse_detection_jsonl(slurp(detections)));
      auto preds = predict_document(m, doc, detect_document(doc, regions));
      json pages = json::array();
      for (std::size_t p = 0; p < preds.size(); ++p) {
        json cells = json::array();
        for (std::size_t c = 0; c < preds[p].size(); ++c)
          cells.push_back({{"cell", c}, {"label", preds[p][c].label}, {"confidence", preds[p][c].confidence}});
        pages.push_back({{"page", p + 1}, {"cells", std::move(cells)}});
      }
      emit(pr_out, json{{"doc_id", doc.doc_id}, {"pages", pages}}.dump());
    } else if (*cv) {
      fs::create_directories(cv_out);
      if (!server.empty()) {
        httplib::Client cli(server);
        cli.set_read_timeout(600, 0);
        for (const auto& in : cv_in) {
          json up = job_result(cli, cli.Post("/documents", slurp(in), is_pdf(slurp(in)) ? "application/pdf" : "application/json"));
          const std::string id = up["result"].get<std::string>().substr(11);
          job_result(cli, cli.Post("/convert", json{{"doc_id", id}, {"model", model_path}}.dump(), "application/json"));
          emit((fs::path(cv_out) / (id + ".structured.json")).string(), cli.Get("/outputs/" + id)->body);
          emit((fs::path(cv_out) / (id + ".md")).string(), cli.Get("/outputs/" + id + "?format=md")->body);
          std::cout << id << "\n";
        }
        return 0;
      }
      ForestModel m = load_model(slurp(model_path));
      ConvertOptions o;
      o.workers = workers;
      o.assemble.min_gap = xy_gap;
      o.assemble.max_merge_gap = merge_gap;
      int failed = 0;
      for (const auto& in : cv_in) {
        std::string bytes = slurp(in);
        Conversion c = is_pdf(bytes) ? convert_pdf(bytes, m, o) : convert_document(deserialize_document(bytes), m, o);
        if (!c.ok()) {
          ++failed;
          std::cerr << in << ": " << c.error;
          for (const auto& f : c.page_failures) std::cerr << " " << f.message << ";";
          std::cerr << "\n";
          continue;
        }
        const std::string id = c.document.doc_id;
        emit((fs::path(cv_out) / (id + ".structured.json")).string(), export_structured(c.structured, "json"));
        emit((fs::path(cv_out) / (id + ".md")).string(), export_structured(c.structured, "markdown"));
        std::cout << id << "\n";
      }
      return failed ? 1 : 0;
    } else if (*ev) {
      if (data_dir.empty() == store_dir.empty()) throw Error(Errc::invalid_argument, "give exactly one of --data, --store");
      TrainingSet t = training_set(data_dir, store_dir, labelset);
      CrossValidationOptions o;
      o.k = k;
      o.seed = seed;
      o.forest = ep;
      o.workers = workers;
      EvalReport r = cross_validate(t.docs, t.labels, t.names, o);
      if (!ev_out.empty()) emit(ev_out, report_json(r));
      std::cout << render_table(r.aggregate, r.metrics);
    } else if (*bn) {
      std::vector<std::string> pdfs;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(data_dir))
        if (e.path().extension() == ".pdf") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) pdfs.push_back(slurp(f));
      auto samples = benchmark_throughput(pdfs, load_model(slurp(model_path)), bench_workers, {}, min_pages);
      emit(bench_out, throughput_csv(samples));
      if (!bench_out.empty()) std::cout << throughput_csv(samples);
    } else if (*sv) {
      ServiceConfig c;
      if (!config_file.empty()) c = load_config(config_file);
      c = apply_env(c, [](const char* n) { return std::getenv(n); });
      Service s(c);
      std::cerr << "listening on " << c.host << ":" << c.port << "\n";
      s.run();
    } else if (*gc) {
      SyntheticCorpus corpus = generate_synthetic_corpus(TemplateSpec{}, pages, seed);
      write_corpus_dir(gc_out, corpus.documents, corpus.annotations, corpus.pdfs);
      std::cout << corpus.documents.size() << " documents, " << corpus.page_count() << " pages\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return e.code() == Errc::internal ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
