#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace vo2 {

struct FeatureVector;

// Fitting data: n samples by d feature columns plus the target.
struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;
  std::vector<std::string> row_ids;  // aligned with rows; may be empty

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

// The model's input columns, in order: gender, bmi, aerobic_s, anaerobic_s.
const std::vector<std::string>& model_feature_columns();

// Builds the design matrix over rows that carry a target. Throws if any row
// lacks vo2max.
DesignMatrix design_from_features(const std::vector<FeatureVector>& rows);

// Per-column centering/scaling parameters (sample SD, n-1 denominator).
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

Standardization standardize_fit(const Eigen::MatrixXd& X,
                                const std::vector<std::string>& column_names = {});
Eigen::MatrixXd standardize_apply(const Standardization& s, const Eigen::MatrixXd& X);

struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;      // original units
  Eigen::VectorXd coefficients_std;  // standardized-feature space
  Standardization standardization;
  std::vector<std::string> column_names;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Ordinary least squares (features standardized internally for conditioning,
// coefficients reported in original units). Requires n > d and full rank.
LinearFit ols_fit(const DesignMatrix& d);

// Minimizes RSS/(2n) + (lambda2/2)*||beta||^2 on standardized features; the
// intercept is unpenalized.
LinearFit ridge_fit(const DesignMatrix& d, double lambda2);

// Coordinate descent on RSS/(2n) + lambda1*||beta||_1 + (lambda2/2)*||beta||^2.
// Sweeps until the largest coefficient change drops below tol.
LinearFit elastic_net_fit(const DesignMatrix& d, double lambda1, double lambda2,
                          double tol = 1e-7, int max_iter = 10000);

inline LinearFit lasso_fit(const DesignMatrix& d, double lambda1, double tol = 1e-7,
                           int max_iter = 10000) {
  return elastic_net_fit(d, lambda1, 0.0, tol, max_iter);
}

Eigen::VectorXd predict(const LinearFit& fit, const Eigen::MatrixXd& X);

// Objective evaluated in the standardized space; exposed so tests can assert
// per-sweep monotonicity and optimality conditions.
double elastic_net_objective(const Eigen::MatrixXd& X_std, const Eigen::VectorXd& y_centered,
                             const Eigen::VectorXd& beta, double lambda1, double lambda2);

// Soft-threshold kernel sign(z) * max(|z| - gamma, 0).
double soft_threshold(double z, double gamma);

}  // namespace vo2
