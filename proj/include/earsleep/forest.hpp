#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "earsleep/matrix.hpp"

namespace earsleep::forest {

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // 0 = ceil(sqrt(n_features))
  std::size_t min_samples_leaf = 1;
  std::size_t max_depth = 0;  // 0 = unlimited
  unsigned threads = 0;       // 0 = hardware concurrency
};

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1 and carry (bootstrap-weighted) class counts.
struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double gain = 0.0;  // weighted Gini decrease of this split
  std::vector<std::uint32_t> counts;

  bool is_leaf() const { return feature < 0; }

  friend bool operator==(const Node&, const Node&) = default;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& leaf_for(std::span<const double> x) const;
  int vote(std::span<const double> x) const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeParams {
  std::size_t max_features = 1;
  std::size_t min_samples_leaf = 1;
  std::size_t max_depth = 0;
};

/// Grows one CART tree on the samples with nonzero `weights` (bootstrap
/// multiplicities). The result depends on the sample multiset, not on row
/// order. Also returns per-feature summed Gini decrease in `importance`.
Tree grow_tree(const Matrix& x, std::span<const int> y, std::size_t n_classes, std::span<const std::uint32_t> weights,
               const TreeParams& params, std::uint64_t seed, std::vector<double>* importance = nullptr);

struct ForestModel {
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::size_t n_features = 0;
  ForestParams params;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  std::vector<double> feature_importances;
  std::map<std::string, std::string> metadata;

  std::size_t n_classes() const { return class_names.size(); }
};

struct Prediction {
  int label = 0;
  std::vector<double> vote_fraction;
};

/// Bagged CART ensemble with Gini splits and ceil(sqrt(d)) candidate
/// features per node. Trees are seeded from (seed, tree index), so the model
/// does not depend on the number of threads.
ForestModel train(const Matrix& x, std::span<const int> y, std::vector<std::string> class_names,
                  const ForestParams& params, std::uint64_t seed);

Prediction predict(const ForestModel& model, std::span<const double> x);
std::vector<int> predict_all(const ForestModel& model, const Matrix& x);

/// Mean decrease in impurity, normalized to sum 1 (all zero if no tree split).
const std::vector<double>& importances(const ForestModel& model);

std::string serialize(const ForestModel& model);
ForestModel deserialize(std::string_view text);

void save(const std::string& path, const ForestModel& model);
ForestModel load(const std::string& path);

}  // namespace earsleep::forest
