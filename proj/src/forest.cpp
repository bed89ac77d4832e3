#include "vo2/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vo2/errors.hpp"
#include "vo2/parallel.hpp"
#include "vo2/rng.hpp"

namespace vo2 {

void validate(const ForestConfig& cfg, Eigen::Index d) {
  if (cfg.n_trees < 1) throw ValidationError("ForestConfig: n_trees must be >= 1");
  if (cfg.min_samples_leaf < 1) throw ValidationError("ForestConfig: min_samples_leaf must be >= 1");
  if (cfg.max_features < 1 || cfg.max_features > d)
    throw ValidationError("ForestConfig: max_features must lie in [1, " + std::to_string(d) + "]");
  if (cfg.max_depth < 0) throw ValidationError("ForestConfig: max_depth must be >= 0");
}

double RegressionTree::predict(Eigen::Ref<const Eigen::RowVectorXd> x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const auto& nd = nodes[static_cast<std::size_t>(idx)];
    idx = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(idx)].value;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // weighted-variance reduction (sum-of-squares form)
};

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& y;
  const ForestConfig& cfg;
  Rng rng;
  std::vector<TreeNode> nodes;
  std::vector<int> feature_pool;

  // Best split over `mf` randomly drawn candidate features. Ties break on the
  // lowest feature index, then the lowest threshold.
  SplitChoice best_split(std::vector<int>& idx) {
    const auto d = static_cast<int>(X.cols());
    const int mf = std::min(cfg.max_features, d);
    // partial Fisher-Yates draw of candidate features
    feature_pool.resize(static_cast<std::size_t>(d));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (int k = 0; k < mf; ++k) {
      const auto j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - k)));
      std::swap(feature_pool[static_cast<std::size_t>(k)], feature_pool[static_cast<std::size_t>(j)]);
    }
    std::sort(feature_pool.begin(), feature_pool.begin() + mf);

    SplitChoice best;
    const auto n = idx.size();
    for (int c = 0; c < mf; ++c) {
      const int f = feature_pool[static_cast<std::size_t>(c)];
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
        return a < b;
      });
      double left_sum = 0.0;
      double total_sum = 0.0;
      for (int i : idx) total_sum += y(i);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y(idx[i]);
        if (X(idx[i], f) == X(idx[i + 1], f)) continue;  // no boundary here
        const auto nl = static_cast<double>(i + 1);
        const auto nr = static_cast<double>(n - i - 1);
        if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
        // maximizing sum_l^2/n_l + sum_r^2/n_r is variance reduction
        const double right_sum = total_sum - left_sum;
        const double score =
            left_sum * left_sum / nl + right_sum * right_sum / nr - total_sum * total_sum / static_cast<double>(n);
        // candidates are visited in ascending (feature, threshold) order, so a
        // strict improvement test keeps the lowest-indexed winner on ties
        if (score > best.score) {
          best = {f, 0.5 * (X(idx[i], f) + X(idx[i + 1], f)), score};
        }
      }
    }
    return best;
  }

  int build(std::vector<int> idx, int depth) {
    const auto node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double mean = 0.0;
    for (int i : idx) mean += y(i);
    mean /= static_cast<double>(idx.size());
    nodes.back().value = mean;

    const bool depth_ok = cfg.max_depth == 0 || depth < cfg.max_depth;
    if (!depth_ok || idx.size() < 2 * static_cast<std::size_t>(cfg.min_samples_leaf) ||
        idx.size() < 2)
      return node_id;

    const auto split = best_split(idx);
    if (split.feature < 0 || split.score <= 1e-12) return node_id;

    std::vector<int> left, right;
    left.reserve(idx.size());
    right.reserve(idx.size());
    for (int i : idx)
      (X(i, split.feature) <= split.threshold ? left : right).push_back(i);

    nodes[static_cast<std::size_t>(node_id)].feature = split.feature;
    nodes[static_cast<std::size_t>(node_id)].threshold = split.threshold;
    const int l = build(std::move(left), depth + 1);
    nodes[static_cast<std::size_t>(node_id)].left = l;
    const int r = build(std::move(right), depth + 1);
    nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }
};

RegressionTree grow_tree(const DesignMatrix& d, const ForestConfig& cfg, std::uint64_t tree_seed) {
  TreeBuilder b{d.X, d.y, cfg, Rng(tree_seed), {}, {}};
  const auto n = static_cast<int>(d.n());
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(n));
  if (cfg.bootstrap) {
    for (int i = 0; i < n; ++i)
      idx.push_back(static_cast<int>(b.rng.below(static_cast<std::uint64_t>(n))));
    std::sort(idx.begin(), idx.end());
  } else {
    for (int i = 0; i < n; ++i) idx.push_back(i);
  }
  b.build(std::move(idx), 0);
  RegressionTree t;
  t.nodes = std::move(b.nodes);
  return t;
}

}  // namespace

Forest rf_fit(const DesignMatrix& d, const ForestConfig& cfg, int threads) {
  if (d.n() < 2) throw ValidationError("rf_fit: need at least 2 samples");
  validate(cfg, d.d());
  Forest f;
  f.config = cfg;
  f.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  parallel_for(f.trees.size(), threads,
               [&](std::size_t b) { f.trees[b] = grow_tree(d, cfg, split_seed(cfg.seed, b)); });
  return f;
}

Eigen::VectorXd rf_predict(const Forest& f, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = rf_predict(f, X.row(i));
  return out;
}

}  // namespace vo2
