#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "earsleep/error.hpp"
#include "earsleep/forest.hpp"

using namespace earsleep;
using namespace earsleep::forest;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an earsleep::Error");
  return ErrorKind::InvalidArgument;
}

struct Data {
  Matrix x;
  std::vector<int> y;
};

// Two isotropic Gaussian blobs whose centers are `separation` sigma apart.
Data blobs(std::size_t n, std::size_t d, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Data out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = z(rng) + (out.y[i] ? separation / std::sqrt(double(d)) : 0.0);
  }
  return out;
}

// Label determined by feature `informative` alone; the rest is noise.
Data informative(std::size_t n, std::size_t d, std::size_t informative, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Data out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = z(rng);
    out.y[i] = out.x(i, informative) > 0.3 ? 1 : 0;
  }
  return out;
}

double accuracy(const ForestModel& m, const Data& d) {
  const auto pred = predict_all(m, d.x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == d.y[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

const std::vector<std::string> kTwo = {"A", "B"};

}  // namespace

TEST_CASE("separable blobs are learned perfectly") {
  const auto train_set = blobs(200, 4, 10.0, 1);
  const auto test_set = blobs(1000, 4, 10.0, 2);
  const auto m = train(train_set.x, train_set.y, kTwo, {}, 7);
  CHECK(m.trees.size() == 100);
  CHECK(m.params.max_features == 2);
  CHECK(accuracy(m, train_set) == 1.0);
  CHECK(accuracy(m, test_set) >= 0.99);
}

TEST_CASE("permuted labels predict at the majority rate") {
  auto train_set = blobs(600, 5, 3.0, 3);
  auto test_set = blobs(2000, 5, 3.0, 4);
  std::mt19937_64 rng(5);
  // 70/30 labels unrelated to the features.
  for (auto* d : {&train_set, &test_set})
    for (auto& y : d->y) y = (rng() % 10) < 7 ? 0 : 1;
  const double majority =
      static_cast<double>(std::count(test_set.y.begin(), test_set.y.end(), 0)) / static_cast<double>(test_set.y.size());
  const auto m = train(train_set.x, train_set.y, kTwo, {}, 11);
  CHECK(std::abs(accuracy(m, test_set) - majority) <= 0.1);
}

TEST_CASE("the single informative feature tops the importance ranking") {
  const auto d = informative(800, 8, 3, 6);
  const auto m = train(d.x, d.y, kTwo, {}, 13);
  const auto& imp = importances(m);
  REQUIRE(imp.size() == 8);
  CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == 3);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (double v : imp) CHECK(v >= 0.0);
}

TEST_CASE("pure-noise labels spread importance evenly") {
  auto d = informative(800, 8, 0, 7);
  std::mt19937_64 rng(8);
  for (auto& y : d.y) y = static_cast<int>(rng() % 2);
  const auto m = train(d.x, d.y, kTwo, {}, 17);
  const auto& imp = importances(m);
  const double mean = std::accumulate(imp.begin(), imp.end(), 0.0) / static_cast<double>(imp.size());
  CHECK(*std::max_element(imp.begin(), imp.end()) < 3.0 * mean);
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const auto d = blobs(300, 6, 2.0, 9);
  ForestParams one, many;
  one.threads = 1;
  many.threads = 4;
  one.n_trees = many.n_trees = 30;
  const auto a = train(d.x, d.y, kTwo, one, 21);
  const auto b = train(d.x, d.y, kTwo, many, 21);
  CHECK(a.trees == b.trees);
  CHECK(a.feature_importances == b.feature_importances);
  const auto c = train(d.x, d.y, kTwo, one, 22);
  CHECK_FALSE(a.trees == c.trees);
}

TEST_CASE("vote fractions are normalized and ties go to the first class") {
  const auto d = blobs(200, 3, 1.0, 10);
  ForestParams p;
  p.n_trees = 25;
  const auto m = train(d.x, d.y, kTwo, p, 3);
  const auto probes = blobs(200, 3, 1.0, 11);
  for (std::size_t i = 0; i < probes.x.rows(); ++i) {
    const auto pr = predict(m, probes.x.row(i));
    double s = 0;
    for (double v : pr.vote_fraction) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0));
  }
  // Two trees voting differently produce a tie; class order decides.
  ForestModel tie;
  tie.class_names = {"A", "B"};
  tie.n_features = 1;
  Tree votes_a, votes_b;
  votes_a.nodes = {Node{-1, 0.0, -1, -1, 0.0, {3, 1}}};
  votes_b.nodes = {Node{-1, 0.0, -1, -1, 0.0, {1, 3}}};
  tie.trees = {votes_b, votes_a};
  CHECK(predict(tie, std::vector<double>{0.0}).label == 0);
}

TEST_CASE("duplicating trees never changes the prediction") {
  const auto d = blobs(300, 5, 1.5, 12);
  ForestParams p;
  p.n_trees = 15;
  auto m = train(d.x, d.y, kTwo, p, 4);
  const auto probes = blobs(400, 5, 1.5, 13);
  const auto before = predict_all(m, probes.x);
  const auto trees = m.trees;
  m.trees.insert(m.trees.end(), trees.begin(), trees.end());
  CHECK(predict_all(m, probes.x) == before);
  std::reverse(m.trees.begin(), m.trees.end());
  CHECK(predict_all(m, probes.x) == before);
}

TEST_CASE("trees depend on the bootstrap multiset, not on row order") {
  const auto d = blobs(150, 4, 2.0, 14);
  std::mt19937_64 rng(15);
  std::vector<std::uint32_t> w(150);
  for (auto& v : w) v = static_cast<std::uint32_t>(rng() % 3);
  const TreeParams tp{2, 1, 0};
  std::vector<double> imp_a, imp_b;
  const auto a = grow_tree(d.x, d.y, 2, w, tp, 99, &imp_a);

  std::vector<std::size_t> perm(150);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Matrix xp = d.x.select_rows(perm);
  std::vector<int> yp(150);
  std::vector<std::uint32_t> wp(150);
  for (std::size_t i = 0; i < 150; ++i) yp[i] = d.y[perm[i]], wp[i] = w[perm[i]];
  const auto b = grow_tree(xp, yp, 2, wp, tp, 99, &imp_b);
  CHECK(a == b);
  CHECK(imp_a == imp_b);
}

TEST_CASE("every recorded split strictly decreases impurity and leaves are non-empty") {
  const auto d = blobs(400, 6, 1.0, 16);
  ForestParams p;
  p.n_trees = 10;
  const auto m = train(d.x, d.y, kTwo, p, 5);
  for (const auto& t : m.trees)
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        CHECK(std::accumulate(n.counts.begin(), n.counts.end(), 0u) > 0u);
      } else {
        CHECK(n.gain > 0.0);
        CHECK(n.left > 0);
        CHECK(n.right > 0);
      }
    }
}

TEST_CASE("a stump grown on one sample predicts that sample's class everywhere") {
  Matrix x(1, 3);
  x(0, 0) = 1.0, x(0, 1) = -2.0, x(0, 2) = 0.5;
  const std::vector<int> y = {2};
  const std::vector<std::uint32_t> w = {1};
  const auto tree = grow_tree(x, y, 4, w, {1, 1, 0}, 1);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.vote(std::vector<double>{100.0, 100.0, 100.0}) == 2);
  CHECK(tree.vote(std::vector<double>{-100.0, 0.0, 3.0}) == 2);
  // At the forest level a single class cannot be trained.
  CHECK(kind_of([&] { train(x, y, {"A", "B", "C", "D"}, {}, 1); }) == ErrorKind::SingleClassTraining);
}

TEST_CASE("training input errors") {
  auto d = blobs(20, 2, 1.0, 17);
  CHECK(kind_of([&] { train(d.x, std::vector<int>(20, 1), kTwo, {}, 1); }) == ErrorKind::SingleClassTraining);
  CHECK(kind_of([&] { train(d.x, std::vector<int>(3, 1), kTwo, {}, 1); }) == ErrorKind::ShapeError);
  d.x(4, 1) = std::nan("");
  CHECK(kind_of([&] { train(d.x, d.y, kTwo, {}, 1); }) == ErrorKind::NonFiniteFeature);
  d.x(4, 1) = 0.0;
  const auto m = train(d.x, d.y, kTwo, {}, 1);
  CHECK(kind_of([&] { predict(m, std::vector<double>{1.0}); }) == ErrorKind::ShapeError);
}

TEST_CASE("serialization round-trips to identical predictions") {
  const auto d = blobs(300, 6, 1.0, 18);
  auto m = train(d.x, d.y, {"AWAKE", "ASLEEP"}, {}, 23);
  m.feature_names = {"a", "b", "c", "d", "e", "f"};
  m.metadata["task"] = "binary";
  const auto text = serialize(m);
  const auto back = deserialize(text);
  CHECK(back.trees == m.trees);
  CHECK(back.class_names == m.class_names);
  CHECK(back.feature_names == m.feature_names);
  CHECK(back.metadata == m.metadata);
  CHECK(back.feature_importances == m.feature_importances);
  CHECK(serialize(back) == text);
  const auto probes = blobs(1000, 6, 1.0, 19);
  for (std::size_t i = 0; i < probes.x.rows(); ++i) {
    const auto p = predict(m, probes.x.row(i));
    const auto q = predict(back, probes.x.row(i));
    CHECK(p.label == q.label);
    CHECK(p.vote_fraction == q.vote_fraction);
  }
}

TEST_CASE("malformed model documents are rejected") {
  const auto d = blobs(60, 2, 3.0, 20);
  ForestParams p;
  p.n_trees = 3;
  const auto text = serialize(train(d.x, d.y, kTwo, p, 1));
  auto fails = [](std::string_view s) { return kind_of([&] { deserialize(s); }) == ErrorKind::ModelFormatError; };
  CHECK(fails(text.substr(0, text.size() / 2)));
  CHECK(fails(""));
  CHECK(fails("[]"));

  auto edit = [&](const std::string& from, const std::string& to) {
    auto s = text;
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    s.replace(pos, from.size(), to);
    return s;
  };
  CHECK(fails(edit("\"version\":1", "\"version\":2")));
  CHECK(fails(edit("\"format\":\"earsleep.forest\"", "\"format\":\"other\"")));

  // Keys are emitted in sorted order, so "trees" is followed by "version".
  const auto trees = text.find("\"trees\":[");
  const auto tail = text.rfind(",\"version\"");
  REQUIRE(trees < tail);
  CHECK(fails(text.substr(0, trees) + "\"trees\":[]" + text.substr(tail)));
  CHECK_NOTHROW(deserialize(text.substr(0, trees) + text.substr(trees, tail - trees) + text.substr(tail)));
}
