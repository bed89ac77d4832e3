#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vo2/linear.hpp"

namespace vo2 {

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 0;         // 0 means unlimited
  int min_samples_leaf = 2;
  int max_features = 2;      // split candidates per node; clamped to d
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

void validate(const ForestConfig& cfg, Eigen::Index d);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(Eigen::Ref<const Eigen::RowVectorXd> x) const;
};

struct Forest {
  ForestConfig config;
  std::vector<RegressionTree> trees;
};

// Variance-reduction CART trees on bootstrap resamples. Tree b depends only on
// (seed, b), so growing the forest never alters existing trees, and threaded
// construction is bit-identical to sequential.
Forest rf_fit(const DesignMatrix& d, const ForestConfig& cfg, int threads = 1);

Eigen::VectorXd rf_predict(const Forest& f, const Eigen::MatrixXd& X);

template <typename Derived>
double rf_predict(const Forest& f, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::RowVectorXd xv = x;
  double sum = 0.0;
  for (const auto& t : f.trees) sum += t.predict(xv);
  return sum / static_cast<double>(f.trees.size());
}

}  // namespace vo2
