#include "ccs/forest.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

#include "ccs/random.hpp"

namespace ccs {

namespace {

using i128 = __int128;

std::size_t resolve_features_per_split(const ForestParams& p, std::size_t n_features) {
  if (p.features_per_split > 0) return std::min<std::size_t>(static_cast<std::size_t>(p.features_per_split), n_features);
  std::size_t k = 0;
  while (k * k < n_features) ++k;
  return std::max<std::size_t>(k, 1);
}

/// Exact split quality: sum cL^2/nL + sum cR^2/nR as num/den. Maximising it
/// minimises the weighted Gini impurity of the children.
struct Score {
  i128 num = 0;
  i128 den = 0;
};

int compare(const Score& a, const Score& b) {
  i128 l = a.num * b.den, r = b.num * a.den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

class Grower {
 public:
  /// `order` holds, per feature, all row indices sorted by value; `mult`
  /// is how often each row was drawn into this tree's sample.
  Grower(TrainData data, std::size_t n_features, std::size_t n_labels, std::span<const std::uint32_t> order,
         std::span<const std::uint32_t> mult, const ForestParams& params, SplitMix64& rng)
      : d_(data), nf_(n_features), nl_(n_labels), p_(params), rng_(rng),
        k_(resolve_features_per_split(params, n_features)) {
    const std::size_t n = data.n_rows;
    std::vector<std::uint32_t> first(n);
    for (std::size_t r = 0; r < n; ++r) {
      first[r] = static_cast<std::uint32_t>(rows_.size());
      rows_.insert(rows_.end(), mult[r], static_cast<std::uint32_t>(r));
    }
    const std::size_t m = rows_.size();
    sorted_.resize(nf_ * m);
    for (std::size_t f = 0; f < nf_; ++f) {
      std::uint32_t* out = sorted_.data() + f * m;
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t r = order[f * n + k];
        for (std::uint32_t c = 0; c < mult[r]; ++c) *out++ = first[r] + c;
      }
    }
    goes_left_.resize(m);
    scratch_.resize(m);
    perm_.resize(nf_);
    cl_.resize(nl_);
    counts_.resize(nl_);
  }

  Tree grow() {
    if (!rows_.empty()) build(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  double x(std::uint32_t sample, std::size_t f) const { return d_.x[rows_[sample] * nf_ + f]; }
  int y(std::uint32_t sample) const { return d_.y[rows_[sample]]; }

  std::uint32_t build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t m = rows_.size();
    const auto node = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::fill(counts_.begin(), counts_.end(), 0);
    for (std::size_t j = begin; j < end; ++j) ++counts_[static_cast<std::size_t>(y(sorted_[j]))];
    const std::size_t n = end - begin;
    const std::size_t distinct = static_cast<std::size_t>(
        std::count_if(counts_.begin(), counts_.end(), [](std::int64_t c) { return c > 0; }));
    const auto msl = static_cast<std::size_t>(p_.min_samples_leaf);

    auto make_leaf = [&] {
      TreeNode& leaf = tree_.nodes[node];
      leaf.counts.assign(counts_.begin(), counts_.end());
      return node;
    };
    if (depth >= p_.max_depth || distinct <= 1 || n < 2 * msl) return make_leaf();

    std::iota(perm_.begin(), perm_.end(), 0);
    rng_.shuffle(perm_);
    bool found = false;
    Score best;
    int best_f = -1;
    double best_t = 0;
    std::size_t best_nl = 0;
    for (std::size_t i = 0; i < nf_; ++i) {
      if (i >= k_ && found) break;
      const std::size_t f = perm_[i];
      const std::uint32_t* seg = sorted_.data() + f * m;
      std::fill(cl_.begin(), cl_.end(), 0);
      i128 a = 0, b = 0;
      for (auto c : counts_) b += static_cast<i128>(c) * c;
      for (std::size_t j = begin; j + 1 < end; ++j) {
        const auto l = static_cast<std::size_t>(y(seg[j]));
        const std::int64_t cr = counts_[l] - cl_[l];
        a += 2 * static_cast<i128>(cl_[l]) + 1;
        b -= 2 * static_cast<i128>(cr) - 1;
        ++cl_[l];
        const std::size_t nl = j + 1 - begin, nr = n - nl;
        if (nr < msl) break;
        if (nl < msl) continue;
        const double v = x(seg[j], f), vn = x(seg[j + 1], f);
        if (!(v < vn)) continue;
        Score s{a * static_cast<i128>(nr) + b * static_cast<i128>(nl), static_cast<i128>(nl) * nr};
        int cmp = found ? compare(s, best) : 1;
        if (cmp < 0) continue;
        double t = std::midpoint(v, vn);
        if (!(t < vn)) t = v;
        if (cmp == 0 && !(static_cast<int>(f) < best_f || (static_cast<int>(f) == best_f && t < best_t))) continue;
        found = true;
        best = s;
        best_f = static_cast<int>(f);
        best_t = t;
        best_nl = nl;
      }
    }
    if (!found) return make_leaf();

    const auto bf = static_cast<std::size_t>(best_f);
    for (std::size_t j = begin; j < end; ++j) {
      std::uint32_t s = sorted_[bf * m + j];
      goes_left_[s] = x(s, bf) <= best_t;
    }
    for (std::size_t f = 0; f < nf_; ++f) {
      std::uint32_t* seg = sorted_.data() + f * m;
      std::size_t li = begin, ri = 0;
      for (std::size_t j = begin; j < end; ++j) {
        if (goes_left_[seg[j]])
          seg[li++] = seg[j];
        else
          scratch_[ri++] = seg[j];
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri), seg + li);
    }
    const std::size_t mid = begin + best_nl;
    std::uint32_t left = build(begin, mid, depth + 1);
    std::uint32_t right = build(mid, end, depth + 1);
    TreeNode& internal = tree_.nodes[node];
    internal.feature = best_f;
    internal.threshold = best_t;
    internal.left = left;
    internal.right = right;
    return node;
  }

  TrainData d_;
  std::size_t nf_, nl_;
  std::vector<std::uint32_t> rows_;  // sample position -> row
  const ForestParams& p_;
  SplitMix64& rng_;
  std::size_t k_;
  std::vector<std::uint32_t> sorted_;  // per feature, sample positions sorted by value
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::size_t> perm_;
  std::vector<std::int64_t> cl_, counts_;
  Tree tree_;
};

std::vector<std::uint32_t> presort(TrainData data, std::size_t nf) {
  const std::size_t n = data.n_rows;
  std::vector<std::uint32_t> order(nf * n);
  for (std::size_t f = 0; f < nf; ++f) {
    auto seg = order.begin() + static_cast<std::ptrdiff_t>(f * n);
    std::iota(seg, seg + static_cast<std::ptrdiff_t>(n), 0u);
    std::sort(seg, seg + static_cast<std::ptrdiff_t>(n), [&](std::uint32_t a, std::uint32_t b) {
      double va = data.x[a * nf + f], vb = data.x[b * nf + f];
      return va != vb ? va < vb : a < b;
    });
  }
  return order;
}

void validate(TrainData data, std::size_t n_features, std::size_t n_labels, const ForestParams& p) {
  if (data.n_rows == 0) throw Error(Errc::invalid_argument, "training matrix is empty");
  if (n_features == 0) throw Error(Errc::invalid_argument, "feature schema is empty");
  if (data.x.size() != data.n_rows * n_features)
    throw Error(Errc::invalid_argument, "matrix has " + std::to_string(data.x.size()) + " values, expected " +
                                            std::to_string(data.n_rows * n_features));
  if (data.y.size() != data.n_rows)
    throw Error(Errc::invalid_argument, "label count " + std::to_string(data.y.size()) + " does not match " +
                                            std::to_string(data.n_rows) + " rows");
  if (n_labels == 0) throw Error(Errc::invalid_argument, "no label names");
  for (int l : data.y)
    if (l < 0 || static_cast<std::size_t>(l) >= n_labels)
      throw Error(Errc::invalid_argument, "label index " + std::to_string(l) + " out of range");
  if (p.n_trees < 1 || p.max_depth < 0 || p.min_samples_leaf < 1 || p.features_per_split < 0)
    throw Error(Errc::invalid_argument, "invalid forest hyperparameters");
}

}  // namespace

Tree grow_tree(TrainData data, std::size_t n_features, std::size_t n_labels, std::span<const std::uint32_t> rows,
               const ForestParams& params, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::uint32_t> mult(data.n_rows, 0);
  for (auto r : rows) ++mult.at(r);
  return Grower(data, n_features, n_labels, presort(data, n_features), mult, params, rng).grow();
}

ForestModel train(TrainData data, const FeatureSchema& schema, std::span<const std::string> labels,
                  const ForestParams& params, int workers) {
  const std::size_t nf = schema.size(), nl = labels.size();
  validate(data, nf, nl, params);
  ForestModel model;
  model.schema = schema;
  model.labels.assign(labels.begin(), labels.end());
  model.params = params;
  model.params.features_per_split = static_cast<int>(resolve_features_per_split(params, nf));
  model.n_rows = data.n_rows;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));

  const std::vector<std::uint32_t> order = presort(data, nf);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < params.n_trees; t = next++) {
      SplitMix64 rng(params.seed + static_cast<std::uint64_t>(t));
      std::vector<std::uint32_t> mult(data.n_rows, params.bootstrap ? 0 : 1);
      if (params.bootstrap)
        for (std::size_t i = 0; i < data.n_rows; ++i) ++mult[rng.below(data.n_rows)];
      model.trees[static_cast<std::size_t>(t)] = Grower(data, nf, nl, order, mult, model.params, rng).grow();
    }
  };
  const int n_threads = std::clamp(workers, 1, params.n_trees);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  return model;
}

ForestModel train(const FeatureMatrix& m, const ForestParams& params, int workers) {
  return train(TrainData{m.values, m.n_rows, m.labels}, m.schema, m.label_names, params, workers);
}

Prediction predict(const ForestModel& model, std::span<const double> v) {
  if (v.size() != model.schema.size())
    throw Error(Errc::schema_mismatch, "vector has " + std::to_string(v.size()) + " features, model expects " +
                                           std::to_string(model.schema.size()));
  Prediction out;
  out.probabilities.assign(model.labels.size(), 0.0);
  for (const auto& tree : model.trees) {
    if (tree.nodes.empty()) continue;
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf())
      node = &tree.nodes[v[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
    double total = 0;
    for (auto c : node->counts) total += c;
    if (total <= 0) continue;
    for (std::size_t l = 0; l < node->counts.size() && l < out.probabilities.size(); ++l)
      out.probabilities[l] += node->counts[l] / total;
  }
  const double n = static_cast<double>(model.trees.size());
  for (auto& p : out.probabilities) p /= n;
  out.label = static_cast<int>(std::max_element(out.probabilities.begin(), out.probabilities.end()) -
                               out.probabilities.begin());
  return out;
}

DocumentPredictions predict_document(const ForestModel& model, const ParsedDocument& doc,
                                     const PageRegions& regions) {
  if (model.schema.version != kFeatureSchemaVersion)
    throw Error(Errc::schema_mismatch, "model feature schema '" + model.schema.version + "' differs from '" +
                                           kFeatureSchemaVersion + "'");
  if (!(make_feature_schema(model.schema.detection_classes) == model.schema))
    throw Error(Errc::schema_mismatch, "model feature names do not match the current schema");
  FeatureMatrix m = build_matrix(doc, regions, model.schema);
  DocumentPredictions out(doc.pages.size());
  for (std::size_t p = 0; p < doc.pages.size(); ++p) out[p].resize(doc.pages[p].cells.size());
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    Prediction pr = predict(model, m.row(r));
    const CellRef ref = m.refs[r];
    out[static_cast<std::size_t>(ref.page - 1)][static_cast<std::size_t>(ref.cell)] = {
        model.labels[static_cast<std::size_t>(pr.label)], pr.probabilities[static_cast<std::size_t>(pr.label)]};
  }
  return out;
}

double gini(std::span<const std::uint32_t> counts) {
  double n = 0;
  for (auto c : counts) n += c;
  if (n == 0) return 0;
  double s = 0;
  for (auto c : counts) s += (c / n) * (c / n);
  return 1 - s;
}

}  // namespace ccs
