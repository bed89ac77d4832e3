#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vo2/errors.hpp"
#include "vo2/forest.hpp"
#include "vo2/rng.hpp"
#include "vo2/stats.hpp"

using namespace vo2;

namespace {

DesignMatrix make_training_data(Rng& rng, int n, int d) {
  DesignMatrix dm;
  dm.X.resize(n, d);
  dm.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) dm.X(i, j) = rng.uniform01();
    dm.y(i) = rng.normal(40.0, 8.0);
  }
  return dm;
}

}  // namespace

TEST_CASE("a single unpruned tree memorizes distinct training points") {
  Rng rng(1);
  DesignMatrix dm;
  const int n = 40;
  dm.X.resize(n, 2);
  dm.y.resize(n);
  for (int i = 0; i < n; ++i) {
    dm.X(i, 0) = static_cast<double>(i);  // distinct
    dm.X(i, 1) = rng.uniform01();
    dm.y(i) = rng.normal(30.0, 10.0);
  }
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.min_samples_leaf = 1;
  cfg.max_depth = 0;
  cfg.max_features = 2;
  cfg.seed = 5;
  const auto f = rf_fit(dm, cfg);
  const auto pred = rf_predict(f, dm.X);
  CHECK((pred - dm.y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("same seed gives bit-identical forests") {
  Rng rng(2);
  const auto dm = make_training_data(rng, 60, 3);
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.max_features = 2;
  cfg.seed = 99;
  const auto a = rf_fit(dm, cfg);
  const auto b = rf_fit(dm, cfg);
  const auto pa = rf_predict(a, dm.X);
  const auto pb = rf_predict(b, dm.X);
  for (int i = 0; i < dm.n(); ++i) CHECK(pa(i) == pb(i));
}

TEST_CASE("threaded construction is bit-identical to sequential") {
  Rng rng(3);
  const auto dm = make_training_data(rng, 80, 4);
  ForestConfig cfg;
  cfg.n_trees = 32;
  cfg.max_features = 2;
  cfg.seed = 7;
  const auto seq = rf_fit(dm, cfg, 1);
  const auto par = rf_fit(dm, cfg, 8);
  REQUIRE(seq.trees.size() == par.trees.size());
  for (std::size_t t = 0; t < seq.trees.size(); ++t) {
    REQUIRE(seq.trees[t].nodes.size() == par.trees[t].nodes.size());
    for (std::size_t k = 0; k < seq.trees[t].nodes.size(); ++k) {
      CHECK(seq.trees[t].nodes[k].feature == par.trees[t].nodes[k].feature);
      CHECK(seq.trees[t].nodes[k].threshold == par.trees[t].nodes[k].threshold);
      CHECK(seq.trees[t].nodes[k].value == par.trees[t].nodes[k].value);
    }
  }
}

TEST_CASE("growing the forest never rebuilds existing trees") {
  Rng rng(4);
  const auto dm = make_training_data(rng, 50, 3);
  ForestConfig small;
  small.n_trees = 10;
  small.seed = 42;
  small.max_features = 2;
  auto big = small;
  big.n_trees = 25;
  const auto a = rf_fit(dm, small);
  const auto b = rf_fit(dm, big);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      CHECK(a.trees[t].nodes[k].feature == b.trees[t].nodes[k].feature);
      CHECK(a.trees[t].nodes[k].threshold == b.trees[t].nodes[k].threshold);
      CHECK(a.trees[t].nodes[k].value == b.trees[t].nodes[k].value);
    }
  }
}

TEST_CASE("forest predictions stay inside the target range") {
  Rng rng(5);
  const auto dm = make_training_data(rng, 70, 4);
  ForestConfig cfg;
  cfg.n_trees = 50;
  cfg.max_features = 2;
  cfg.seed = 11;
  const auto f = rf_fit(dm, cfg);
  const double lo = dm.y.minCoeff(), hi = dm.y.maxCoeff();
  // every single tree honors the range too, not only the average
  for (const auto& tree : f.trees) {
    for (int i = 0; i < dm.n(); ++i) {
      const double p = tree.predict(dm.X.row(i));
      CHECK(p >= lo - 1e-12);
      CHECK(p <= hi + 1e-12);
    }
  }
  Rng probe(6);
  for (int t = 0; t < 200; ++t) {
    Eigen::RowVectorXd x(4);
    for (int j = 0; j < 4; ++j) x(j) = probe.uniform(-1.0, 2.0);
    const double p = rf_predict(f, x);
    CHECK(p >= lo - 1e-12);
    CHECK(p <= hi + 1e-12);
  }
}

TEST_CASE("forest learns a step function to sub-unit error") {
  Rng rng(20240);
  const int n_train = 500, n_test = 200;
  DesignMatrix train, test;
  train.X.resize(n_train, 2);
  train.y.resize(n_train);
  test.X.resize(n_test, 2);
  test.y.resize(n_test);
  const auto fill = [&](DesignMatrix& dm, int n) {
    for (int i = 0; i < n; ++i) {
      dm.X(i, 0) = rng.uniform01();
      dm.X(i, 1) = rng.uniform01();
      dm.y(i) = dm.X(i, 1) > 0.5 ? 10.0 : 0.0;
    }
  };
  fill(train, n_train);
  fill(test, n_test);

  ForestConfig cfg;
  cfg.n_trees = 200;
  cfg.max_features = 2;
  cfg.min_samples_leaf = 2;
  cfg.seed = 17;
  const auto f = rf_fit(train, cfg, 4);
  const double err = rmse(rf_predict(f, test.X), test.y);
  CHECK(err < 1.0);
}

TEST_CASE("config validation") {
  Rng rng(7);
  const auto dm = make_training_data(rng, 10, 3);
  ForestConfig cfg;
  cfg.n_trees = 0;
  CHECK_THROWS_AS(rf_fit(dm, cfg), ValidationError);
  cfg = ForestConfig{};
  cfg.max_features = 9;
  CHECK_THROWS_AS(rf_fit(dm, cfg), ValidationError);
  cfg = ForestConfig{};
  cfg.min_samples_leaf = 0;
  CHECK_THROWS_AS(rf_fit(dm, cfg), ValidationError);
}
