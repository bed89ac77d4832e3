#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vo2/errors.hpp"

namespace vo2 {

struct FeatureVector;  // features.hpp

// Product-moment correlation. Expression-friendly: accepts any dense Eigen
// vector expression. Requires equal lengths >= 3 and nonzero variance.
template <typename DerivedX, typename DerivedY>
double pearson_r(const Eigen::MatrixBase<DerivedX>& xe, const Eigen::MatrixBase<DerivedY>& ye) {
  const Eigen::VectorXd x = xe.template cast<double>();
  const Eigen::VectorXd y = ye.template cast<double>();
  if (x.size() != y.size()) throw ValidationError("pearson_r: length mismatch");
  const auto n = x.size();
  if (n < 3) throw ValidationError("pearson_r: need at least 3 samples, got " + std::to_string(n));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson_r: zero variance input");
  return xc.dot(yc) / std::sqrt(sxx * syy);
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Root mean squared error between predictions and targets (non-empty, equal lengths).
template <typename DerivedP, typename DerivedT>
double rmse(const Eigen::MatrixBase<DerivedP>& pe, const Eigen::MatrixBase<DerivedT>& te) {
  const Eigen::VectorXd p = pe.template cast<double>();
  const Eigen::VectorXd t = te.template cast<double>();
  if (p.size() != t.size()) throw ValidationError("rmse: length mismatch");
  if (p.size() == 0) throw ValidationError("rmse: empty input");
  return std::sqrt((p - t).squaredNorm() / static_cast<double>(p.size()));
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Survival function P(T > t) of Student's t with dof degrees of freedom.
double student_t_sf(double t, double dof);

// Two-tailed significance of a correlation r over n pairs, via the t statistic
// r * sqrt(n-2) / sqrt(1-r^2) with n-2 degrees of freedom. |r| = 1 gives 0.
double p_two_tailed(double r, std::int64_t n);

struct CorrelationEntry {
  std::string metric;
  int n = 0;                   // usable pair count
  std::optional<double> r;     // absent when the metric could not be evaluated
  std::optional<double> p;
  std::string note;            // reason when absent
};

// Per-metric correlation of feature-table columns against the vo2max target.
// Rows missing a metric are dropped pairwise for that metric only. All rows
// must carry a vo2max value.
std::vector<CorrelationEntry> correlation_table(const std::vector<FeatureVector>& rows,
                                                const std::vector<std::string>& metrics);

// Metric names correlation_table understands.
const std::vector<std::string>& default_correlation_metrics();

std::string correlation_table_text(const std::vector<CorrelationEntry>& entries);

}  // namespace vo2
