#include <zlib.h>

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "ccs/forest.hpp"
#include "ccs/random.hpp"

namespace ccs {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'S', 'F', 'R', 'S', 'T', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void strs(const std::vector<std::string>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& s : v) str(s);
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<std::string> strs() {
    std::uint32_t n = u32();
    need(n);  // every string takes at least its length prefix
    std::vector<std::string> v;
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(str());
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(Errc::syntax, "model payload ends early");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::syntax, "model payload: " + what); }

}  // namespace

std::string save_model(const ForestModel& m) {
  Writer w;
  w.bytes().append(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.str(SplitMix64::kName);
  w.str(m.schema.version);
  w.strs(m.schema.names);
  w.strs(m.schema.detection_classes);
  w.strs(m.labels);
  w.u32(static_cast<std::uint32_t>(m.params.n_trees));
  w.u32(static_cast<std::uint32_t>(m.params.max_depth));
  w.u32(static_cast<std::uint32_t>(m.params.min_samples_leaf));
  w.u32(static_cast<std::uint32_t>(m.params.features_per_split));
  w.u64(m.params.seed);
  w.u8(m.params.bootstrap ? 1 : 0);
  w.u64(m.n_rows);
  w.u64(static_cast<std::uint64_t>(m.timestamp));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& t : m.trees) {
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.u32(static_cast<std::uint32_t>(n.feature));
      if (n.is_leaf()) {
        for (std::size_t l = 0; l < m.labels.size(); ++l) w.u32(l < n.counts.size() ? n.counts[l] : 0);
      } else {
        w.f64(n.threshold);
        w.u32(n.left);
        w.u32(n.right);
      }
    }
  }
  w.u32(crc(w.bytes()));
  return std::move(w.bytes());
}

ForestModel load_model(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw Error(Errc::checksum, "model payload truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw Error(Errc::syntax, "not a ccs model file");
  Reader head(bytes.substr(sizeof kMagic));
  std::uint32_t version = head.u32();
  if (version != kModelFormatVersion)
    throw Error(Errc::version, "model format version " + std::to_string(version) + " is not supported");
  std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (crc(body) != tail.u32()) throw Error(Errc::checksum, "model checksum mismatch");

  Reader r(body.substr(sizeof kMagic + 4));
  ForestModel m;
  if (std::string prng = r.str(); prng != SplitMix64::kName) bad("unknown PRNG '" + prng + "'");
  m.schema.version = r.str();
  m.schema.names = r.strs();
  m.schema.detection_classes = r.strs();
  m.labels = r.strs();
  m.params.n_trees = static_cast<int>(r.u32());
  m.params.max_depth = static_cast<int>(r.u32());
  m.params.min_samples_leaf = static_cast<int>(r.u32());
  m.params.features_per_split = static_cast<int>(r.u32());
  m.params.seed = r.u64();
  m.params.bootstrap = r.u8() != 0;
  m.n_rows = r.u64();
  m.timestamp = static_cast<std::int64_t>(r.u64());
  const std::size_t nf = m.schema.names.size(), nl = m.labels.size();
  if (nl == 0) bad("no labels");
  std::uint32_t n_trees = r.u32();
  if (n_trees > r.remaining()) bad("tree count exceeds payload");
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    std::uint32_t n_nodes = r.u32();
    if (n_nodes == 0 || n_nodes > r.remaining() / 4) bad("bad node count");
    t.nodes.resize(n_nodes);
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      TreeNode& n = t.nodes[i];
      n.feature = static_cast<int>(r.u32());
      if (n.feature < 0) {
        n.counts.resize(nl);
        std::uint64_t total = 0;
        for (auto& c : n.counts) total += (c = r.u32());
        if (total == 0) bad("empty leaf histogram");
      } else {
        if (static_cast<std::size_t>(n.feature) >= nf) bad("feature index out of range");
        n.threshold = r.f64();
        n.left = r.u32();
        n.right = r.u32();
        if (n.left <= i || n.right <= i || n.left >= n_nodes || n.right >= n_nodes) bad("bad child index");
      }
    }
  }
  if (r.remaining() != 0) bad("trailing bytes");
  return m;
}

std::string model_debug_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf())
        nodes.push_back({{"counts", n.counts}});
      else
        nodes.push_back({{"feature", m.schema.names[static_cast<std::size_t>(n.feature)]},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  nlohmann::json j{{"format_version", kModelFormatVersion},
                   {"prng", SplitMix64::kName},
                   {"schema", {{"version", m.schema.version}, {"names", m.schema.names}}},
                   {"labels", m.labels},
                   {"params",
                    {{"n_trees", m.params.n_trees},
                     {"max_depth", m.params.max_depth},
                     {"min_samples_leaf", m.params.min_samples_leaf},
                     {"features_per_split", m.params.features_per_split},
                     {"seed", m.params.seed},
                     {"bootstrap", m.params.bootstrap}}},
                   {"n_rows", m.n_rows},
                   {"timestamp", m.timestamp},
                   {"trees", std::move(trees)}};
  return j.dump(1);
}

}  // namespace ccs
