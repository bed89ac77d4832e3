#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vo2/linear.hpp"

namespace vo2 {

enum class SvrKernel { rbf, linear };

const char* to_string(SvrKernel k);
SvrKernel svr_kernel_from_string(const std::string& s);

struct SvrConfig {
  SvrKernel kernel = SvrKernel::rbf;
  double gamma = 0.0;       // rbf width; 0 resolves to 1 / (d * var(X)) at fit time
  double C = 10.0;          // box constraint
  double epsilon = 0.5;     // insensitive-tube half width, target units
  double tol = 1e-3;        // KKT violation tolerance
  int max_passes = 1000;
};

void validate(const SvrConfig& cfg);

double kernel_value(SvrKernel k, double gamma, Eigen::Ref<const Eigen::RowVectorXd> u,
                    Eigen::Ref<const Eigen::RowVectorXd> v);

Eigen::MatrixXd kernel_matrix(SvrKernel k, double gamma, const Eigen::MatrixXd& X);

// Resolved rbf width for config + data (the 1/(d*var) default or the explicit value).
double resolve_gamma(const SvrConfig& cfg, const Eigen::MatrixXd& X);

struct SvrFit {
  Eigen::MatrixXd support_vectors;  // rows with nonzero dual coefficient
  Eigen::VectorXd dual_coef;        // alpha - alpha*, one per support vector
  std::vector<int> sv_indices;      // training-row origin of each support vector
  double bias = 0.0;
  SvrConfig config;                 // gamma holds the resolved value
  bool converged = true;
  int passes = 0;
};

// Epsilon-insensitive support vector regression, trained by sequential minimal
// optimization over coefficient pairs under the sum-to-zero constraint. The
// caller standardizes features beforehand. Terminates once a full pass finds
// no pair violating the KKT conditions by more than tol.
SvrFit svr_fit(const DesignMatrix& d, const SvrConfig& cfg);

Eigen::VectorXd svr_predict(const SvrFit& fit, const Eigen::MatrixXd& X);

template <typename Derived>
double svr_predict(const SvrFit& fit, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::RowVectorXd xv = x;
  double sum = fit.bias;
  for (Eigen::Index k = 0; k < fit.dual_coef.size(); ++k)
    sum += fit.dual_coef(k) *
           kernel_value(fit.config.kernel, fit.config.gamma, fit.support_vectors.row(k), xv);
  return sum;
}

// Dual objective y.beta - eps*||beta||_1 - 0.5*beta'K beta; what SMO maximizes.
double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double epsilon,
                          const Eigen::VectorXd& beta);

}  // namespace vo2
