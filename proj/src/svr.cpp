#include "vo2/svr.hpp"

#include <cmath>
#include <limits>

#include "vo2/errors.hpp"

namespace vo2 {

const char* to_string(SvrKernel k) { return k == SvrKernel::rbf ? "rbf" : "linear"; }

SvrKernel svr_kernel_from_string(const std::string& s) {
  if (s == "rbf") return SvrKernel::rbf;
  if (s == "linear") return SvrKernel::linear;
  throw ValidationError("kernel must be \"rbf\" or \"linear\", got \"" + s + "\"");
}

void validate(const SvrConfig& cfg) {
  if (!(cfg.C > 0.0)) throw ValidationError("SvrConfig: C must be positive");
  if (cfg.epsilon < 0.0) throw ValidationError("SvrConfig: epsilon must be non-negative");
  if (cfg.gamma < 0.0) throw ValidationError("SvrConfig: gamma must be non-negative");
  if (!(cfg.tol > 0.0)) throw ValidationError("SvrConfig: tol must be positive");
  if (cfg.max_passes < 1) throw ValidationError("SvrConfig: max_passes must be >= 1");
}

double kernel_value(SvrKernel k, double gamma, Eigen::Ref<const Eigen::RowVectorXd> u,
                    Eigen::Ref<const Eigen::RowVectorXd> v) {
  if (k == SvrKernel::linear) return u.dot(v);
  return std::exp(-gamma * (u - v).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(SvrKernel k, double gamma, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = kernel_value(k, gamma, X.row(i), X.row(i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      K(i, j) = kernel_value(k, gamma, X.row(i), X.row(j));
      K(j, i) = K(i, j);
    }
  }
  return K;
}

double resolve_gamma(const SvrConfig& cfg, const Eigen::MatrixXd& X) {
  if (cfg.kernel == SvrKernel::linear) return 0.0;
  if (cfg.gamma > 0.0) return cfg.gamma;
  const double mean = X.mean();
  const double var = (X.array() - mean).square().mean();
  if (var <= 0.0) throw ValidationError("resolve_gamma: features have zero variance");
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double epsilon,
                          const Eigen::VectorXd& beta) {
  return y.dot(beta) - epsilon * beta.lpNorm<1>() - 0.5 * beta.dot(K * beta);
}

namespace {

// Objective gain of moving the pair by delta (beta_i += delta, beta_j -= delta),
// exact including the |.| kinks.
double pair_gain(double delta, double gi, double gj, double eta, double eps, double bi,
                 double bj) {
  return delta * (gi - gj) - 0.5 * eta * delta * delta -
         eps * (std::abs(bi + delta) - std::abs(bi)) - eps * (std::abs(bj - delta) - std::abs(bj));
}

struct PairStep {
  double delta = 0.0;
  double gain = 0.0;
};

// Exact maximizer of the piecewise-quadratic pair objective over the box. The
// candidate set holds the interval ends, the two kinks and the four per-branch
// stationary points; the true gain is evaluated at each.
PairStep solve_pair(double gi, double gj, double eta, double eps, double bi, double bj,
                    double C) {
  const double lo = std::max(-C - bi, bj - C);
  const double hi = std::min(C - bi, bj + C);
  if (lo > hi) return {};
  double candidates[10];
  int m = 0;
  candidates[m++] = lo;
  candidates[m++] = hi;
  candidates[m++] = -bi;
  candidates[m++] = bj;
  if (eta > 0.0) {
    for (double si : {-1.0, 1.0})
      for (double sj : {-1.0, 1.0}) candidates[m++] = (gi - gj - eps * si + eps * sj) / eta;
  }
  PairStep best;
  for (int c = 0; c < m; ++c) {
    const double delta = std::clamp(candidates[c], lo, hi);
    const double gain = pair_gain(delta, gi, gj, eta, eps, bi, bj);
    if (gain > best.gain) best = {delta, gain};
  }
  return best;
}

}  // namespace

SvrFit svr_fit(const DesignMatrix& d, const SvrConfig& cfg) {
  validate(cfg);
  const Eigen::Index n = d.n();
  if (n < 2) throw ValidationError("svr_fit: need at least 2 samples");

  SvrConfig resolved = cfg;
  resolved.gamma = resolve_gamma(cfg, d.X);
  const Eigen::MatrixXd K = kernel_matrix(resolved.kernel, resolved.gamma, d.X);
  const double C = resolved.C;
  const double eps = resolved.epsilon;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = d.y;  // y - K*beta, maintained incrementally

  // Directional gradients of the dual: raising beta_i is worthwhile while
  // up_grad exceeds the multiplier, lowering it while down_grad falls below.
  const auto up_grad = [&](Eigen::Index i) { return g(i) - (beta(i) >= 0.0 ? eps : -eps); };
  const auto down_grad = [&](Eigen::Index i) { return g(i) - (beta(i) > 0.0 ? eps : -eps); };

  const auto apply = [&](Eigen::Index i, Eigen::Index j, double delta) {
    beta(i) += delta;
    beta(j) -= delta;
    g -= delta * K.col(i);
    g += delta * K.col(j);
  };

  int passes = 0;
  bool converged = false;
  bool examine_all = true;
  while (passes < resolved.max_passes) {
    ++passes;
    int changed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!examine_all && (beta(i) == 0.0 || std::abs(beta(i)) == C)) continue;

      // best opposing partner for each direction
      Eigen::Index j_down = -1, j_up = -1;
      double cap = std::numeric_limits<double>::infinity();
      double req = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        if (beta(j) > -C && down_grad(j) < cap) {
          cap = down_grad(j);
          j_down = j;
        }
        if (beta(j) < C && up_grad(j) > req) {
          req = up_grad(j);
          j_up = j;
        }
      }

      // (raise, lower) roles of the pair
      Eigen::Index r = -1, l = -1;
      if (beta(i) < C && j_down >= 0 && up_grad(i) - cap > resolved.tol) {
        r = i;
        l = j_down;
      } else if (beta(i) > -C && j_up >= 0 && req - down_grad(i) > resolved.tol) {
        r = j_up;
        l = i;
      } else {
        continue;
      }

      const double eta = K(r, r) + K(l, l) - 2.0 * K(r, l);
      const auto step = solve_pair(g(r), g(l), eta, eps, beta(r), beta(l), C);
      if (step.gain > 1e-14) {
        apply(r, l, step.delta);
        ++changed;
      }
    }
    if (examine_all) {
      if (changed == 0) {
        converged = true;
        break;
      }
      examine_all = false;
    } else if (changed == 0) {
      examine_all = true;  // sweep everyone before declaring victory
    }
  }

  // multiplier interval from the surviving directional gradients
  double req = -std::numeric_limits<double>::infinity();
  double cap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (beta(i) < C) req = std::max(req, up_grad(i));
    if (beta(i) > -C) cap = std::min(cap, down_grad(i));
  }
  double bias;
  if (std::isfinite(req) && std::isfinite(cap))
    bias = 0.5 * (req + cap);
  else
    bias = std::isfinite(req) ? req : (std::isfinite(cap) ? cap : 0.0);

  SvrFit fit;
  fit.config = resolved;
  fit.bias = bias;
  fit.converged = converged;
  fit.passes = passes;
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (beta(i) != 0.0) idx.push_back(static_cast<int>(i));
  fit.sv_indices = idx;
  fit.support_vectors.resize(static_cast<Eigen::Index>(idx.size()), d.X.cols());
  fit.dual_coef.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    fit.support_vectors.row(static_cast<Eigen::Index>(k)) = d.X.row(idx[k]);
    fit.dual_coef(static_cast<Eigen::Index>(k)) = beta(idx[k]);
  }
  return fit;
}

Eigen::VectorXd svr_predict(const SvrFit& fit, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = svr_predict(fit, X.row(i));
  return out;
}

}  // namespace vo2
