#include "vo2/stats.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "vo2/features.hpp"

namespace vo2 {

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_r(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())),
                   Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  return rmse(
      Eigen::Map<const Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size())),
      Eigen::Map<const Eigen::VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size())));
}

namespace {

// Continued fraction for I_x(a,b), Lentz's method.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-14;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw ValidationError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete_beta: a, b must be positive");
  if (x < 0.0 || x > 1.0) throw ValidationError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  // symmetry split keeps the continued fraction in its fast-converging regime
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double dof) {
  if (!(dof > 0.0)) throw ValidationError("student_t_sf: dof must be positive");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

double p_two_tailed(double r, std::int64_t n) {
  if (n < 3) throw ValidationError("p_two_tailed: need n >= 3, got " + std::to_string(n));
  if (!(std::abs(r) <= 1.0)) throw ValidationError("p_two_tailed: |r| must be <= 1");
  if (std::abs(r) == 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r * r));
  return 2.0 * student_t_sf(t, dof);
}

const std::vector<std::string>& default_correlation_metrics() {
  static const std::vector<std::string> metrics = {"aerobic_s", "endured_interp_s", "hrr30",
                                                   "hrr60", "hrr120"};
  return metrics;
}

std::vector<CorrelationEntry> correlation_table(const std::vector<FeatureVector>& rows,
                                                const std::vector<std::string>& metrics) {
  for (const auto& row : rows)
    if (!row.vo2max)
      throw ValidationError("correlation_table: row \"" + row.id + "\" has no vo2max");

  std::vector<CorrelationEntry> out;
  out.reserve(metrics.size());
  for (const auto& name : metrics) {
    CorrelationEntry e;
    e.metric = name;
    std::vector<double> x, y;
    for (const auto& row : rows) {
      const auto v = feature_value(row, name);
      if (!v) continue;  // pairwise deletion
      x.push_back(*v);
      y.push_back(*row.vo2max);
    }
    e.n = static_cast<int>(x.size());
    if (e.n < 3) {
      e.note = "n < 3";
      out.push_back(std::move(e));
      continue;
    }
    try {
      e.r = pearson_r(x, y);
      e.p = p_two_tailed(*e.r, e.n);
    } catch (const ValidationError& err) {
      e.r.reset();
      e.p.reset();
      e.note = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string correlation_table_text(const std::vector<CorrelationEntry>& entries) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "metric" << std::right << std::setw(6) << "n"
     << std::setw(12) << "r" << std::setw(12) << "p" << "\n";
  for (const auto& e : entries) {
    os << std::left << std::setw(18) << e.metric << std::right << std::setw(6) << e.n;
    if (e.r && e.p) {
      os << std::setw(12) << std::fixed << std::setprecision(6) << *e.r << std::setw(12) << *e.p;
      os.unsetf(std::ios::fixed);
    } else {
      os << std::setw(12) << "-" << std::setw(12) << "-";
      if (!e.note.empty()) os << "  (" << e.note << ")";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace vo2
