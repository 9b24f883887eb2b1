#include "earsleep/forest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "earsleep/error.hpp"
#include "earsleep/parallel.hpp"
#include "earsleep/random.hpp"
#include "text_io.hpp"

namespace earsleep::forest {

namespace {

// Column-major copy of the training matrix plus dense per-feature ranks
// (equal values share a rank), so split search sorts integer keys.
struct Columns {
  std::size_t n = 0, d = 0;
  std::vector<double> v;
  std::vector<std::uint32_t> rank;
  std::vector<unsigned> rank_bytes;  // bytes needed for the largest rank of each feature

  explicit Columns(const Matrix& x) : n(x.rows()), d(x.cols()), v(x.rows() * x.cols()), rank(x.rows() * x.cols()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < d; ++f) v[f * n + i] = x(i, f);
    std::vector<std::uint32_t> order(n);
    for (std::size_t f = 0; f < d; ++f) {
      const double* c = col(f);
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(), [c](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
      std::uint32_t r = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && c[order[k]] != c[order[k - 1]]) ++r;
        rank[f * n + order[k]] = r;
      }
      unsigned bytes = 1;
      while (bytes < 4 && (r >> (8 * bytes)) != 0) ++bytes;
      rank_bytes.push_back(bytes);
    }
  }
  const double* col(std::size_t f) const { return v.data() + f * n; }
  const std::uint32_t* ranks(std::size_t f) const { return rank.data() + f * n; }
};

// Orders rank << 32 | sample keys by rank; order within equal ranks is
// unspecified, which split search never observes.
void sort_by_rank(std::vector<std::uint64_t>& keys, std::vector<std::uint64_t>& tmp, unsigned rank_bytes) {
  if (keys.size() < 256) {
    std::sort(keys.begin(), keys.end());
    return;
  }
  tmp.resize(keys.size());
  for (unsigned pass = 0; pass < rank_bytes; ++pass) {
    const unsigned shift = 32 + 8 * pass;
    std::array<std::size_t, 257> offset{};
    for (auto k : keys) ++offset[((k >> shift) & 0xFF) + 1];
    for (std::size_t b = 1; b < offset.size(); ++b) offset[b] += offset[b - 1];
    for (auto k : keys) tmp[offset[(k >> shift) & 0xFF]++] = k;
    keys.swap(tmp);
  }
}

struct Frame {
  int node;
  std::size_t begin, end, depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const Columns& x, std::span<const int> y, std::size_t n_classes, std::span<const std::uint32_t> weights,
              const TreeParams& params, Rng& rng)
      : x_(x), y_(y), k_(n_classes), w_(weights), params_(params), rng_(rng), features_(x.d) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < x.n; ++i) {
      if (w_[i] == 0) continue;
      in_bag_.push_back(static_cast<std::uint32_t>(i));
      total_weight_ += w_[i];
    }
  }

  Tree build(std::vector<double>* importance) {
    Tree tree;
    if (importance) importance->assign(x_.d, 0.0);
    tree.nodes.emplace_back();
    std::vector<Frame> stack{{0, 0, in_bag_.size(), 0}};
    std::vector<std::uint64_t> counts(k_);
    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();

      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = fr.begin; i < fr.end; ++i) counts[static_cast<std::size_t>(y_[in_bag_[i]])] += w_[in_bag_[i]];
      const std::uint64_t node_weight = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
      const auto n_classes_here = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });

      const std::size_t n_samples = fr.end - fr.begin;
      const bool stop = n_classes_here <= 1 || n_samples < 2 * params_.min_samples_leaf ||
                        (params_.max_depth > 0 && fr.depth >= params_.max_depth);
      Split best;
      if (!stop) best = find_split(fr.begin, fr.end, counts, node_weight);

      Node& node = tree.nodes[static_cast<std::size_t>(fr.node)];
      if (!best.valid) {
        node.counts.assign(counts.begin(), counts.end());
        continue;
      }

      const double* col = x_.col(best.feature);
      auto mid = std::partition(in_bag_.begin() + static_cast<std::ptrdiff_t>(fr.begin),
                                in_bag_.begin() + static_cast<std::ptrdiff_t>(fr.end),
                                [&](std::uint32_t i) { return col[i] <= best.threshold; });
      const auto split_at = static_cast<std::size_t>(mid - in_bag_.begin());

      const int left = static_cast<int>(tree.nodes.size());
      node.feature = static_cast<int>(best.feature);
      node.threshold = best.threshold;
      node.left = left;
      node.right = left + 1;
      node.gain = best.gain / static_cast<double>(total_weight_);
      if (importance) (*importance)[best.feature] += node.gain;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stack.push_back({left + 1, split_at, fr.end, fr.depth + 1});
      stack.push_back({left, fr.begin, split_at, fr.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    bool valid = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;  // weighted Gini decrease times node weight
  };

  Split find_split(std::size_t begin, std::size_t end, const std::vector<std::uint64_t>& counts,
                   std::uint64_t node_weight) {
    std::uint64_t parent_sq = 0;
    for (auto c : counts) parent_sq += c * c;
    const double parent_score = static_cast<double>(parent_sq) / static_cast<double>(node_weight);

    Split best;
    double best_score = parent_score;
    std::vector<std::uint64_t> left(k_);

    // Draw features without replacement until max_features non-constant ones
    // have been examined (or none remain).
    std::size_t examined = 0;
    for (std::size_t j = 0; j < x_.d && examined < params_.max_features; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, x_.d - 1);
      std::swap(features_[j], features_[pick(rng_)]);
      const std::size_t f = features_[j];
      const double* col = x_.col(f);
      const std::uint32_t* rk = x_.ranks(f);

      buf_.clear();
      for (std::size_t i = begin; i < end; ++i) buf_.push_back(std::uint64_t{rk[in_bag_[i]]} << 32 | in_bag_[i]);
      sort_by_rank(buf_, tmp_, x_.rank_bytes[f]);
      if (buf_.front() >> 32 == buf_.back() >> 32) continue;
      ++examined;

      std::fill(left.begin(), left.end(), 0);
      std::uint64_t left_sq = 0, right_sq = parent_sq, left_w = 0;
      for (std::size_t p = 0; p + 1 < buf_.size(); ++p) {
        const auto i = static_cast<std::uint32_t>(buf_[p]);
        const auto c = static_cast<std::size_t>(y_[i]);
        const std::uint64_t wi = w_[i];
        const std::uint64_t r_before = counts[c] - left[c];
        left_sq += 2 * left[c] * wi + wi * wi;
        right_sq -= 2 * r_before * wi - wi * wi;
        left[c] += wi;
        left_w += wi;
        if (buf_[p] >> 32 == buf_[p + 1] >> 32) continue;
        const std::size_t n_left = p + 1;
        if (n_left < params_.min_samples_leaf || buf_.size() - n_left < params_.min_samples_leaf) continue;

        const std::uint64_t right_w = node_weight - left_w;
        const double score = static_cast<double>(left_sq) / static_cast<double>(left_w) +
                             static_cast<double>(right_sq) / static_cast<double>(right_w);
        if (score > best_score) {
          best_score = score;
          best.valid = true;
          best.feature = f;
          const double lo = col[static_cast<std::uint32_t>(buf_[p])], hi = col[static_cast<std::uint32_t>(buf_[p + 1])];
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi) || !std::isfinite(thr)) thr = lo;
          best.threshold = thr;
        }
      }
    }
    if (best.valid) {
      best.gain = best_score - parent_score;
      if (!(best.gain > 1e-12 * static_cast<double>(node_weight))) best.valid = false;
    }
    return best;
  }

  const Columns& x_;
  std::span<const int> y_;
  std::size_t k_;
  std::span<const std::uint32_t> w_;
  TreeParams params_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::vector<std::uint32_t> in_bag_;
  std::uint64_t total_weight_ = 0;
  std::vector<std::uint64_t> buf_, tmp_;  // rank << 32 | sample
};

void check_inputs(const Matrix& x, std::span<const int> y, std::size_t n_classes) {
  if (x.rows() != y.size()) throw Error(ErrorKind::ShapeError, "feature rows and labels differ in length");
  if (x.rows() == 0) throw Error(ErrorKind::SingleClassTraining, "no training samples");
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteFeature, "training matrix contains a non-finite value");
  std::vector<bool> seen(n_classes, false);
  for (int c : y) {
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes)
      throw Error(ErrorKind::ShapeError, fmt::format("label {} outside the class range", c));
    seen[static_cast<std::size_t>(c)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw Error(ErrorKind::SingleClassTraining, "training labels contain a single class");
}

std::size_t argmax_first(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

const Node& Tree::leaf_for(std::span<const double> x) const {
  const Node* n = &nodes.front();
  while (!n->is_leaf())
    n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
  return *n;
}

int Tree::vote(std::span<const double> x) const {
  const auto& c = leaf_for(x).counts;
  return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
}

Tree grow_tree(const Matrix& x, std::span<const int> y, std::size_t n_classes, std::span<const std::uint32_t> weights,
               const TreeParams& params, std::uint64_t seed, std::vector<double>* importance) {
  if (weights.size() != x.rows()) throw Error(ErrorKind::ShapeError, "one weight per sample required");
  const Columns cols(x);
  Rng rng(seed);
  TreeBuilder builder(cols, y, n_classes, weights, params, rng);
  return builder.build(importance);
}

ForestModel train(const Matrix& x, std::span<const int> y, std::vector<std::string> class_names,
                  const ForestParams& params, std::uint64_t seed) {
  const std::size_t k = class_names.size();
  check_inputs(x, y, k);
  if (params.n_trees == 0) throw Error(ErrorKind::InvalidArgument, "forest needs at least one tree");

  ForestModel model;
  model.class_names = std::move(class_names);
  model.n_features = x.cols();
  model.params = params;
  model.seed = seed;
  if (model.params.max_features == 0)
    model.params.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
  model.params.max_features = std::clamp<std::size_t>(model.params.max_features, 1, x.cols());

  const TreeParams tp{model.params.max_features, std::max<std::size_t>(1, params.min_samples_leaf), params.max_depth};
  const Columns cols(x);
  const std::size_t n = x.rows();
  model.trees.resize(params.n_trees);
  std::vector<std::vector<double>> tree_importance(params.n_trees);

  parallel_for(
      params.n_trees,
      [&](std::size_t t) {
        Rng rng(derive_seed(seed, {t}));
        std::vector<std::uint32_t> weights(n, 0);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (std::size_t i = 0; i < n; ++i) ++weights[draw(rng)];
        TreeBuilder builder(cols, y, k, weights, tp, rng);
        model.trees[t] = builder.build(&tree_importance[t]);
      },
      params.threads);

  model.feature_importances.assign(x.cols(), 0.0);
  for (const auto& imp : tree_importance)
    for (std::size_t f = 0; f < imp.size(); ++f) model.feature_importances[f] += imp[f];
  double total = 0.0;
  for (double& v : model.feature_importances) {
    v /= static_cast<double>(params.n_trees);
    total += v;
  }
  if (total > 0.0)
    for (double& v : model.feature_importances) v /= total;
  return model;
}

Prediction predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.n_features)
    throw Error(ErrorKind::ShapeError,
                fmt::format("sample has {} features, model expects {}", x.size(), model.n_features));
  Prediction p;
  p.vote_fraction.assign(model.n_classes(), 0.0);
  for (const auto& tree : model.trees) p.vote_fraction[static_cast<std::size_t>(tree.vote(x))] += 1.0;
  for (double& v : p.vote_fraction) v /= static_cast<double>(model.trees.size());
  p.label = static_cast<int>(argmax_first(p.vote_fraction));
  return p;
}

std::vector<int> predict_all(const ForestModel& model, const Matrix& x) {
  std::vector<int> out(x.rows());
  parallel_for(x.rows(), [&](std::size_t i) { out[i] = predict(model, x.row(i)).label; }, model.params.threads);
  return out;
}

const std::vector<double>& importances(const ForestModel& model) { return model.feature_importances; }

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kFormatName = "earsleep.forest";
constexpr int kFormatVersion = 1;

using nlohmann::json;

[[noreturn]] void format_error(const std::string& what) { throw Error(ErrorKind::ModelFormatError, what); }

}  // namespace

std::string serialize(const ForestModel& model) {
  json doc;
  doc["format"] = kFormatName;
  doc["version"] = kFormatVersion;
  doc["class_names"] = model.class_names;
  doc["feature_names"] = model.feature_names;
  doc["n_features"] = model.n_features;
  doc["seed"] = model.seed;
  doc["params"] = {{"n_trees", model.params.n_trees},
                   {"max_features", model.params.max_features},
                   {"min_samples_leaf", model.params.min_samples_leaf},
                   {"max_depth", model.params.max_depth}};
  doc["metadata"] = model.metadata;
  doc["importances"] = model.feature_importances;
  json trees = json::array();
  for (const auto& t : model.trees) {
    json jt;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, gain;
    json counts = json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      gain.push_back(n.gain);
      counts.push_back(n.counts);
    }
    jt["feature"] = feature;
    jt["threshold"] = threshold;
    jt["left"] = left;
    jt["right"] = right;
    jt["gain"] = gain;
    jt["counts"] = std::move(counts);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump() + "\n";
}

ForestModel deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    format_error(fmt::format("malformed model document: {}", e.what()));
  }

  ForestModel m;
  try {
    if (doc.at("format").get<std::string>() != kFormatName) format_error("not a forest model document");
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion)
      format_error(fmt::format("model format version {} is not supported (expected {})", version, kFormatVersion));

    m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.n_features = doc.at("n_features").get<std::size_t>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    const auto& p = doc.at("params");
    m.params.n_trees = p.at("n_trees").get<std::size_t>();
    m.params.max_features = p.at("max_features").get<std::size_t>();
    m.params.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
    m.params.max_depth = p.at("max_depth").get<std::size_t>();
    m.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    m.feature_importances = doc.at("importances").get<std::vector<double>>();

    for (const auto& jt : doc.at("trees")) {
      const auto feature = jt.at("feature").get<std::vector<int>>();
      const auto threshold = jt.at("threshold").get<std::vector<double>>();
      const auto left = jt.at("left").get<std::vector<int>>();
      const auto right = jt.at("right").get<std::vector<int>>();
      const auto gain = jt.at("gain").get<std::vector<double>>();
      const auto counts = jt.at("counts").get<std::vector<std::vector<std::uint32_t>>>();
      const std::size_t n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || gain.size() != n ||
          counts.size() != n)
        format_error("tree arrays are empty or inconsistent in length");

      Tree t;
      t.nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        Node& node = t.nodes[i];
        node.feature = feature[i];
        node.threshold = threshold[i];
        node.left = left[i];
        node.right = right[i];
        node.gain = gain[i];
        node.counts = counts[i];
        if (node.is_leaf()) {
          if (node.counts.size() != m.class_names.size() ||
              std::all_of(node.counts.begin(), node.counts.end(), [](auto c) { return c == 0; }))
            format_error("leaf class counts are missing or all zero");
        } else {
          const auto valid_child = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
          if (static_cast<std::size_t>(node.feature) >= m.n_features || !valid_child(node.left) ||
              !valid_child(node.right))
            format_error(fmt::format("node {} has an invalid feature or child index", i));
        }
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    format_error(fmt::format("model document is incomplete: {}", e.what()));
  }

  if (m.trees.empty()) format_error("model contains no trees");
  if (m.class_names.size() < 2) format_error("model needs at least two classes");
  if (m.feature_importances.size() != m.n_features) format_error("importance vector length mismatch");
  m.params.n_trees = m.trees.size();
  return m;
}

void save(const std::string& path, const ForestModel& model) { io::write_file(path, serialize(model)); }

ForestModel load(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    format_error(e.what());
  }
  return deserialize(text);
}

}  // namespace earsleep::forest
