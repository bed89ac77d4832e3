#include "vo2/linear.hpp"

#include <cmath>

#include "vo2/errors.hpp"
#include "vo2/features.hpp"

namespace vo2 {

const std::vector<std::string>& model_feature_columns() {
  static const std::vector<std::string> cols = {"gender", "bmi", "aerobic_s", "anaerobic_s"};
  return cols;
}

DesignMatrix design_from_features(const std::vector<FeatureVector>& rows) {
  const auto& cols = model_feature_columns();
  DesignMatrix d;
  d.column_names = cols;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  d.row_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].vo2max)
      throw ValidationError("design_from_features: row \"" + rows[i].id + "\" has no vo2max");
    for (std::size_t j = 0; j < cols.size(); ++j)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          *feature_value(rows[i], cols[j]);
    d.y(static_cast<Eigen::Index>(i)) = *rows[i].vo2max;
    d.row_ids.push_back(rows[i].id);
  }
  return d;
}

Standardization standardize_fit(const Eigen::MatrixXd& X,
                                const std::vector<std::string>& column_names) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw ValidationError("standardize_fit: need at least 2 rows");
  Standardization s;
  s.mean = X.colwise().mean();
  s.sd.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double ss = (X.col(j).array() - s.mean(j)).square().sum();
    s.sd(j) = std::sqrt(ss / static_cast<double>(n - 1));
    if (s.sd(j) == 0.0) {
      const std::string name = static_cast<std::size_t>(j) < column_names.size()
                                   ? column_names[static_cast<std::size_t>(j)]
                                   : "column " + std::to_string(j);
      throw ValidationError("standardize_fit: zero variance in " + name);
    }
  }
  return s;
}

Eigen::MatrixXd standardize_apply(const Standardization& s, const Eigen::MatrixXd& X) {
  if (X.cols() != s.mean.size()) throw ValidationError("standardize_apply: column count mismatch");
  return (X.rowwise() - s.mean.transpose()).array().rowwise() / s.sd.transpose().array();
}

namespace {

// Maps standardized-space coefficients back to original units and fills the
// shared LinearFit fields.
LinearFit finish_fit(const DesignMatrix& d, const Standardization& s,
                     const Eigen::VectorXd& beta_std, double y_mean) {
  LinearFit fit;
  fit.standardization = s;
  fit.column_names = d.column_names;
  fit.coefficients_std = beta_std;
  fit.coefficients = beta_std.array() / s.sd.array();
  fit.intercept = y_mean - fit.coefficients.dot(s.mean);
  return fit;
}

}  // namespace

LinearFit ols_fit(const DesignMatrix& d) {
  if (d.n() <= d.d())
    throw ValidationError("ols_fit: need more samples than features (n=" +
                          std::to_string(d.n()) + ", d=" + std::to_string(d.d()) + ")");
  const Standardization s = standardize_fit(d.X, d.column_names);
  const Eigen::MatrixXd Xs = standardize_apply(s, d.X);
  const double y_mean = d.y.mean();
  const Eigen::VectorXd yc = d.y.array() - y_mean;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  if (qr.rank() < d.d()) throw ValidationError("singular design: rank " +
                                               std::to_string(qr.rank()) + " < " +
                                               std::to_string(d.d()));
  const Eigen::VectorXd beta = qr.solve(yc);
  auto fit = finish_fit(d, s, beta, y_mean);
  fit.iterations = 1;
  return fit;
}

LinearFit ridge_fit(const DesignMatrix& d, double lambda2) {
  if (lambda2 < 0.0) throw ValidationError("ridge_fit: lambda2 must be non-negative");
  const Standardization s = standardize_fit(d.X, d.column_names);
  const Eigen::MatrixXd Xs = standardize_apply(s, d.X);
  const double y_mean = d.y.mean();
  const Eigen::VectorXd yc = d.y.array() - y_mean;
  const auto n = static_cast<double>(d.n());

  Eigen::MatrixXd A = (Xs.transpose() * Xs) / n;
  A.diagonal().array() += lambda2;
  const Eigen::VectorXd b = Xs.transpose() * yc / n;
  const Eigen::VectorXd beta = A.ldlt().solve(b);
  auto fit = finish_fit(d, s, beta, y_mean);
  fit.lambda2 = lambda2;
  fit.iterations = 1;
  return fit;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double elastic_net_objective(const Eigen::MatrixXd& X_std, const Eigen::VectorXd& y_centered,
                             const Eigen::VectorXd& beta, double lambda1, double lambda2) {
  const auto n = static_cast<double>(X_std.rows());
  const double rss = (y_centered - X_std * beta).squaredNorm();
  return rss / (2.0 * n) + lambda1 * beta.lpNorm<1>() + 0.5 * lambda2 * beta.squaredNorm();
}

LinearFit elastic_net_fit(const DesignMatrix& d, double lambda1, double lambda2, double tol,
                          int max_iter) {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw ValidationError("elastic_net_fit: penalties must be non-negative");
  const Standardization s = standardize_fit(d.X, d.column_names);
  const Eigen::MatrixXd Xs = standardize_apply(s, d.X);
  const double y_mean = d.y.mean();
  const Eigen::VectorXd yc = d.y.array() - y_mean;
  const auto n = static_cast<double>(d.n());
  const Eigen::Index p = d.d();

  // column scales (1/n) x_j . x_j are constant across sweeps
  Eigen::VectorXd col_scale(p);
  for (Eigen::Index j = 0; j < p; ++j) col_scale(j) = Xs.col(j).squaredNorm() / n;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = yc;  // yc - Xs * beta, maintained incrementally

  LinearFit fit;
  int sweep = 0;
  bool converged = false;
  for (; sweep < max_iter && !converged; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = beta(j);
      const double rho = Xs.col(j).dot(residual) / n + col_scale(j) * old;
      const double updated = soft_threshold(rho, lambda1) / (col_scale(j) + lambda2);
      if (updated != old) {
        residual -= (updated - old) * Xs.col(j);
        beta(j) = updated;
        max_delta = std::max(max_delta, std::abs(updated - old));
      }
    }
    if (max_delta < tol) converged = true;
  }

  fit = finish_fit(d, s, beta, y_mean);
  fit.lambda1 = lambda1;
  fit.lambda2 = lambda2;
  fit.converged = converged;
  fit.iterations = sweep;
  return fit;
}

Eigen::VectorXd predict(const LinearFit& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.coefficients.size())
    throw ValidationError("predict: feature count mismatch");
  return (X * fit.coefficients).array() + fit.intercept;
}

}  // namespace vo2
