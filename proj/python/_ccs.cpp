#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "ccs/assemble.hpp"
#include "ccs/evaluate.hpp"
#include "ccs/json_io.hpp"
#include "ccs/pipeline.hpp"
#include "ccs/synthetic.hpp"

namespace py = pybind11;
using namespace ccs;

namespace {

std::vector<ParsedDocument> documents_of(const std::vector<std::string>& docs) {
  std::vector<ParsedDocument> out;
  for (const auto& d : docs) out.push_back(deserialize_document(d));
  return out;
}

std::vector<CellLabels> labels_of_json(const std::vector<std::string>& labels) {
  std::vector<CellLabels> out;
  for (const auto& l : labels) out.push_back(cell_labels_from_json(l));
  return out;
}

py::object percent(const std::optional<Percent>& p) {
  if (!p) return py::none();
  return py::float_(p->value());
}

ConfusionMatrix matrix_of(const std::vector<std::vector<std::uint64_t>>& counts, const std::vector<std::string>& labels) {
  if (counts.size() != labels.size())
    throw Error(Errc::invalid_argument, "confusion matrix needs one row per label");
  ConfusionMatrix m(labels);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != labels.size())
      throw Error(Errc::invalid_argument, "confusion matrix needs one column per label");
    m.counts[i] = counts[i];
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_ccs, m) {
  m.doc() = "Corpus conversion core: PDF parsing, cell classification, assembly and evaluation";

  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "parse_pdf",
      [](py::bytes data, const std::string& doc_id, int workers) {
        std::string bytes = data;
        py::gil_scoped_release unlock;
        pdf::ParseOptions o;
        o.doc_id = doc_id;
        o.workers = workers;
        pdf::ParseResult r = pdf::parse_pdf(bytes, o);
        std::vector<std::pair<int, std::string>> warnings;
        for (auto& w : r.warnings) warnings.emplace_back(w.page, std::move(w.message));
        return std::make_pair(serialize_document(r.document), warnings);
      },
      py::arg("data"), py::arg("doc_id") = "", py::arg("workers") = 1,
      "Returns (canonical .ccs.json text, [(page, warning)]).");

  m.def(
      "validate_document",
      [](const std::string& text) {
        std::vector<std::pair<std::string, std::string>> out;
        for (auto& v : validate_document(document_from_json(nlohmann::json::parse(text))))
          out.emplace_back(std::move(v.invariant), std::move(v.locus));
        return out;
      },
      py::arg("document"));

  m.def(
      "generate_synthetic_corpus",
      [](int pages, std::uint64_t seed) {
        SyntheticCorpus c;
        {
          py::gil_scoped_release unlock;
          c = generate_synthetic_corpus(TemplateSpec{}, pages, seed);
        }
        py::list docs, labels, pdfs;
        for (std::size_t i = 0; i < c.documents.size(); ++i) {
          docs.append(serialize_document(c.documents[i]));
          labels.append(cell_labels_json(c.documents[i].doc_id, c.annotations[i]));
          pdfs.append(py::bytes(c.pdfs[i]));
        }
        py::dict out;
        out["documents"] = docs;
        out["labels"] = labels;
        out["pdfs"] = pdfs;
        out["label_names"] = synthetic_label_names();
        return out;
      },
      py::arg("pages"), py::arg("seed") = 42);

  m.def(
      "train",
      [](const std::vector<std::string>& docs, const std::vector<std::string>& labels,
         const std::vector<std::string>& label_names, int n_trees, int max_depth, std::uint64_t seed, int workers) {
        std::string bytes;
        {
          py::gil_scoped_release unlock;
          ForestParams p;
          p.n_trees = n_trees;
          p.max_depth = max_depth;
          p.seed = seed;
          bytes = save_model(train_documents(documents_of(docs), labels_of_json(labels), label_names, p, {}, workers));
        }
        return py::bytes(bytes);
      },
      py::arg("documents"), py::arg("labels"), py::arg("label_names"), py::arg("n_trees") = 100,
      py::arg("max_depth") = 20, py::arg("seed") = 0, py::arg("workers") = 1, "Returns the model file bytes.");

  m.def(
      "predict",
      [](py::bytes model, const std::string& document) {
        std::string mb = model;
        py::gil_scoped_release unlock;
        ParsedDocument doc = deserialize_document(document);
        auto preds = predict_document(load_model(mb), doc, detect_document(doc));
        std::vector<std::vector<std::pair<std::string, double>>> out(preds.size());
        for (std::size_t p = 0; p < preds.size(); ++p)
          for (auto& c : preds[p]) out[p].emplace_back(std::move(c.label), c.confidence);
        return out;
      },
      py::arg("model"), py::arg("document"), "Per page, per cell id: (label, confidence).");

  m.def(
      "convert",
      [](py::bytes model, py::object source, int workers, double xy_gap, double merge_gap) {
        std::string mb = model;
        const bool is_pdf = py::isinstance<py::bytes>(source);
        std::string src = is_pdf ? std::string(source.cast<py::bytes>()) : source.cast<std::string>();
        std::pair<std::string, std::string> out;
        {
          py::gil_scoped_release unlock;
          ConvertOptions o;
          o.workers = workers;
          o.assemble.min_gap = xy_gap;
          o.assemble.max_merge_gap = merge_gap;
          ForestModel fm = load_model(mb);
          Conversion c = is_pdf ? convert_pdf(src, fm, o) : convert_document(deserialize_document(src), fm, o);
          if (!c.ok()) {
            std::string msg = c.error;
            for (const auto& f : c.page_failures) msg += (msg.empty() ? "" : "; ") + f.message;
            throw Error(Errc::internal, msg);
          }
          out = {export_structured(c.structured, "json"), export_structured(c.structured, "markdown")};
        }
        py::dict d;
        d["json"] = out.first;
        d["markdown"] = out.second;
        return d;
      },
      py::arg("model"), py::arg("source"), py::arg("workers") = 1, py::arg("xy_gap") = 12.0,
      py::arg("merge_gap") = 24.0, "source: PDF bytes or .ccs.json text.");

  m.def(
      "reading_order",
      [](const std::vector<std::array<double, 4>>& boxes, double min_gap) {
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < boxes.size(); ++i)
          cells.push_back(Cell{static_cast<int>(i), {boxes[i][0], boxes[i][1], boxes[i][2], boxes[i][3]}, "x",
                               TextStyle::normal, 10});
        return reading_order(cells, min_gap);
      },
      py::arg("boxes"), py::arg("min_gap") = 12.0);

  m.def(
      "recall_precision",
      [](const std::vector<std::vector<std::uint64_t>>& counts, const std::vector<std::string>& labels) {
        py::list out;
        for (const auto& lm : recall_precision(matrix_of(counts, labels))) {
          py::dict d;
          d["label"] = lm.label;
          d["recall"] = percent(lm.recall);
          d["precision"] = percent(lm.precision);
          out.append(d);
        }
        return out;
      },
      py::arg("counts"), py::arg("labels"), "Percentages rounded half-up to two decimals; None for empty rows.");

  m.def("published_table", [] {
    const PublishedMetrics& p = published_prb_metrics();
    py::dict d;
    d["labels"] = p.matrix.labels;
    d["counts"] = p.matrix.counts;
    std::vector<double> r, pr;
    for (const auto& x : p.recall) r.push_back(x.value());
    for (const auto& x : p.precision) pr.push_back(x.value());
    d["recall"] = r;
    d["precision"] = pr;
    return d;
  });

  m.def(
      "compare_published",
      [](std::int64_t tolerance) {
        const PublishedMetrics& p = published_prb_metrics();
        py::list out;
        for (const auto& x : compare_metrics(recall_precision(p.matrix), p, tolerance)) {
          py::dict d;
          d["label"] = x.label;
          d["metric"] = x.metric;
          d["computed"] = x.computed.value();
          d["published"] = x.published.value();
          out.append(d);
        }
        return out;
      },
      py::arg("tolerance") = 1, "Table entries whose recomputed value differs by more than tolerance hundredths.");

  m.def(
      "cross_validate",
      [](const std::vector<std::string>& docs, const std::vector<std::string>& labels,
         const std::vector<std::string>& label_names, int k, std::uint64_t seed, int n_trees, int workers) {
        py::gil_scoped_release unlock;
        CrossValidationOptions o;
        o.k = k;
        o.seed = seed;
        o.forest.n_trees = n_trees;
        o.workers = workers;
        return report_json(cross_validate(documents_of(docs), labels_of_json(labels), label_names, o));
      },
      py::arg("documents"), py::arg("labels"), py::arg("label_names"), py::arg("k") = 10, py::arg("seed") = 42,
      py::arg("n_trees") = 100, py::arg("workers") = 1, "Returns the report JSON text.");

  m.def(
      "benchmark",
      [](const std::vector<py::bytes>& pdfs, py::bytes model, const std::vector<int>& worker_counts,
         std::size_t min_pages) {
        std::vector<std::string> raw(pdfs.begin(), pdfs.end());
        std::string mb = model;
        py::gil_scoped_release unlock;
        return throughput_csv(benchmark_throughput(raw, load_model(mb), worker_counts, {}, min_pages));
      },
      py::arg("pdfs"), py::arg("model"), py::arg("worker_counts"), py::arg("min_pages") = 200,
      "CSV: workers,pages,seconds,pages_per_sec.");
}
