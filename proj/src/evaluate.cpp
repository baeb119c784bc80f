#include "ccs/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

#include "ccs/random.hpp"

namespace ccs {

namespace {

std::map<std::string, int, std::less<>> label_index(std::span<const std::string> names) {
  std::map<std::string, int, std::less<>> idx;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!idx.emplace(names[i], static_cast<int>(i)).second)
      throw Error(Errc::invalid_argument, "duplicate label '" + names[i] + "'");
  return idx;
}

nlohmann::json counts_json(const ConfusionMatrix& m) { return m.counts; }

nlohmann::json percent_json(const std::optional<Percent>& p) {
  if (!p) return nullptr;
  return p->value();
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : labels(std::move(names)), counts(labels.size(), std::vector<std::uint64_t>(labels.size(), 0)) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.labels != labels) throw Error(Errc::invalid_argument, "confusion matrices have different labels");
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts.size(); ++j) counts[i][j] += other.counts[i][j];
  return *this;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::span<const std::string> label_names) {
  if (truth.size() != predicted.size())
    throw Error(Errc::invalid_argument, "confusion: " + std::to_string(truth.size()) + " true labels but " +
                                            std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix m({label_names.begin(), label_names.end()});
  const int n = static_cast<int>(label_names.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n || predicted[i] < 0 || predicted[i] >= n)
      throw Error(Errc::invalid_argument, "confusion: label index out of range at position " + std::to_string(i));
    ++m.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return m;
}

ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> predicted,
                          std::span<const std::string> label_names) {
  if (truth.size() != predicted.size())
    throw Error(Errc::invalid_argument, "confusion: " + std::to_string(truth.size()) + " true labels but " +
                                            std::to_string(predicted.size()) + " predictions");
  auto idx = label_index(label_names);
  auto lookup = [&](const std::string& s) {
    auto it = idx.find(s);
    if (it == idx.end()) throw Error(Errc::invalid_argument, "confusion: unknown label '" + s + "'");
    return it->second;
  };
  std::vector<int> t, p;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t.push_back(lookup(truth[i]));
    p.push_back(lookup(predicted[i]));
  }
  return confusion(std::span<const int>(t), std::span<const int>(p), label_names);
}

Percent Percent::ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw Error(Errc::invalid_argument, "percentage of an empty total");
  using u128 = unsigned __int128;
  u128 h = (static_cast<u128>(num) * 20000 + den) / (static_cast<u128>(den) * 2);
  return {static_cast<std::int64_t>(h)};
}

std::string Percent::str() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

std::vector<LabelMetrics> recall_precision(const ConfusionMatrix& m) {
  std::vector<LabelMetrics> out;
  const std::size_t n = m.labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += m.counts[i][j];
      col += m.counts[j][i];
    }
    LabelMetrics lm{m.labels[i], std::nullopt, std::nullopt};
    if (row) lm.recall = Percent::ratio(m.counts[i][i], row);
    if (col) lm.precision = Percent::ratio(m.counts[i][i], col);
    out.push_back(std::move(lm));
  }
  return out;
}

const PublishedMetrics& published_prb_metrics() {
  static const PublishedMetrics p = [] {
    PublishedMetrics r{ConfusionMatrix({"Title", "Author", "Subtitle", "Text", "Picture", "Table"}), {}, {}};
    r.matrix.counts = {{75, 0, 0, 0, 0, 0},     {1, 670, 0, 0, 0, 0},     {0, 0, 325, 0, 0, 0},
                       {1, 17, 0, 56460, 14, 0}, {0, 0, 0, 4, 4223, 26}, {0, 0, 0, 0, 1, 3418}};
    for (std::int64_t h : {10000, 9985, 10000, 9994, 9924, 9997}) r.recall.push_back({h});
    for (std::int64_t h : {9740, 9752, 10000, 9999, 9964, 9924}) r.precision.push_back({h});
    return r;
  }();
  return p;
}

std::vector<Discrepancy> compare_metrics(std::span<const LabelMetrics> computed, const PublishedMetrics& published,
                                         std::int64_t tolerance) {
  std::vector<Discrepancy> out;
  for (std::size_t i = 0; i < published.matrix.labels.size(); ++i) {
    const std::string& label = published.matrix.labels[i];
    auto it = std::find_if(computed.begin(), computed.end(), [&](const LabelMetrics& m) { return m.label == label; });
    if (it == computed.end()) continue;
    auto check = [&](const std::optional<Percent>& c, Percent p, const char* metric) {
      if (c && std::abs(c->hundredths - p.hundredths) > tolerance) out.push_back({label, metric, *c, p});
    };
    check(it->recall, published.recall[i], "recall");
    check(it->precision, published.precision[i], "precision");
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n_items, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::invalid_argument, "k must be at least 2");
  if (static_cast<std::size_t>(k) > n_items)
    throw Error(Errc::invalid_argument,
                "k = " + std::to_string(k) + " exceeds the number of items (" + std::to_string(n_items) + ")");
  std::vector<std::size_t> pos(n_items);
  for (std::size_t i = 0; i < n_items; ++i) pos[i] = i;
  SplitMix64 rng(seed);
  rng.shuffle(pos);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n_items; ++i) folds[i % folds.size()].push_back(pos[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

EvalReport cross_validate(std::span<const ParsedDocument> corpus, std::span<const CellLabels> annotations,
                          std::span<const std::string> label_names, const CrossValidationOptions& options) {
  if (corpus.size() != annotations.size())
    throw Error(Errc::invalid_argument, "corpus has " + std::to_string(corpus.size()) + " documents but " +
                                            std::to_string(annotations.size()) + " annotation sets");
  const FeatureSchema schema = make_feature_schema();
  const std::size_t nf = schema.size();

  std::vector<PageKey> items;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::size_t> item_of_row;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const ParsedDocument& doc = corpus[d];
    FeatureMatrix fm = build_matrix(doc, detect_document(doc, {}, options.detect), schema, &annotations[d],
                                    label_names);
    std::map<int, std::size_t> page_item;
    for (const Page& p : doc.pages) {
      page_item[p.number] = items.size();
      items.push_back({d, p.number});
    }
    std::size_t n_cells = 0;
    for (const Page& p : doc.pages) n_cells += p.cells.size();
    if (fm.n_rows != n_cells)
      throw Error(Errc::invalid_argument, "document '" + doc.doc_id + "' has " +
                                              std::to_string(n_cells - fm.n_rows) + " unannotated cells");
    x.insert(x.end(), fm.values.begin(), fm.values.end());
    y.insert(y.end(), fm.labels.begin(), fm.labels.end());
    for (const CellRef& r : fm.refs) item_of_row.push_back(page_item.at(r.page));
  }

  EvalReport report;
  report.k = options.k;
  report.seed = options.seed;
  report.labels.assign(label_names.begin(), label_names.end());
  report.aggregate = ConfusionMatrix(report.labels);
  const auto folds = kfold_split(items.size(), options.k, options.seed);
  std::vector<int> fold_of_item(items.size());
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (auto i : folds[f]) fold_of_item[i] = static_cast<int>(f);

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<double> tx;
    std::vector<int> ty;
    std::vector<std::size_t> test_rows;
    for (std::size_t r = 0; r < y.size(); ++r) {
      if (fold_of_item[item_of_row[r]] == static_cast<int>(f)) {
        test_rows.push_back(r);
      } else {
        tx.insert(tx.end(), x.begin() + static_cast<std::ptrdiff_t>(r * nf),
                  x.begin() + static_cast<std::ptrdiff_t>((r + 1) * nf));
        ty.push_back(y[r]);
      }
    }
    ForestModel model = train(TrainData{tx, ty.size(), ty}, schema, report.labels, options.forest, options.workers);
    std::vector<int> truth, pred;
    for (auto r : test_rows) {
      truth.push_back(y[r]);
      pred.push_back(predict(model, std::span<const double>(x).subspan(r * nf, nf)).label);
    }
    FoldResult fr{{}, confusion(std::span<const int>(truth), std::span<const int>(pred), label_names)};
    for (auto i : folds[f]) fr.test_pages.push_back(items[i]);
    report.aggregate += fr.matrix;
    report.folds.push_back(std::move(fr));
  }
  report.metrics = recall_precision(report.aggregate);
  return report;
}

std::string report_json(const EvalReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json pages = nlohmann::json::array();
    for (const auto& p : f.test_pages) pages.push_back({{"doc", p.doc}, {"page", p.page}});
    folds.push_back({{"test_pages", std::move(pages)}, {"counts", counts_json(f.matrix)}});
  }
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : report.metrics)
    metrics.push_back({{"label", m.label}, {"recall", percent_json(m.recall)}, {"precision", percent_json(m.precision)}});
  nlohmann::json j{{"k", report.k},
                   {"seed", report.seed},
                   {"labels", report.labels},
                   {"folds", std::move(folds)},
                   {"aggregate", counts_json(report.aggregate)},
                   {"metrics", std::move(metrics)}};
  return j.dump();
}

std::string render_table(const ConfusionMatrix& m, std::span<const LabelMetrics> metrics) {
  const std::size_t n = m.labels.size();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"true \\ predicted"};
  head.insert(head.end(), m.labels.begin(), m.labels.end());
  rows.push_back(head);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> r{m.labels[i]};
    for (auto c : m.counts[i]) r.push_back(std::to_string(c));
    rows.push_back(std::move(r));
  }
  auto metric_row = [&](const char* name, bool recall) {
    std::vector<std::string> r{name};
    for (std::size_t i = 0; i < n; ++i) {
      auto it = std::find_if(metrics.begin(), metrics.end(),
                             [&](const LabelMetrics& lm) { return lm.label == m.labels[i]; });
      const std::optional<Percent>* p = nullptr;
      if (it != metrics.end()) p = recall ? &it->recall : &it->precision;
      r.push_back(p && *p ? (*p)->str() : "-");
    }
    rows.push_back(std::move(r));
  };
  metric_row("Recall", true);
  metric_row("Precision", false);

  std::vector<std::size_t> width(n + 1, 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string out;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    if (ri == n + 1) {
      for (std::size_t c = 0; c <= n; ++c) out += std::string(width[c] + (c ? 2 : 0), '-');
      out += '\n';
    }
    const auto& r = rows[ri];
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0)
        out += r[c] + std::string(width[c] - r[c].size(), ' ');
      else
        out += "  " + std::string(width[c] - r[c].size(), ' ') + r[c];
    }
    out += '\n';
  }
  return out;
}

}  // namespace ccs
