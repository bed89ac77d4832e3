// Acceptance suite: one line per criterion, nonzero exit if any fail.
// Each criterion carries its own runtime budget, checked here as well.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vo2/cli.hpp"
#include "vo2/eval.hpp"
#include "vo2/features.hpp"
#include "vo2/ingest.hpp"
#include "vo2/linear.hpp"
#include "vo2/protocol.hpp"
#include "vo2/rng.hpp"
#include "vo2/stats.hpp"
#include "vo2/svr.hpp"
#include "vo2/synth.hpp"

using namespace vo2;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;

  void run(int id, const std::string& name, double budget_s,
           const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty() && elapsed > budget_s) {
      std::ostringstream os;
      os << "runtime " << elapsed << " s exceeds budget " << budget_s << " s";
      error = os.str();
    }
    std::printf("[%s] criterion %d: %s (%.2f s)%s%s\n", error.empty() ? "PASS" : "FAIL", id,
                name.c_str(), elapsed, error.empty() ? "" : " - ", error.c_str());
    std::fflush(stdout);
    if (!error.empty()) ++failures;
  }
};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::runtime_error(message);
}

// run_cli with stdout silenced so the criterion lines stay readable
int quiet_cli(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = run_cli(args);
  std::cout.rdbuf(old);
  return rc;
}

fs::path fresh_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("vo2_accept_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<HrSample> sampled_hr(const std::function<double(double)>& f, double duration_s) {
  std::vector<HrSample> out;
  for (int t = 0; t <= static_cast<int>(duration_s); ++t)
    out.push_back({static_cast<std::int64_t>(t) * 1000, f(t)});
  return out;
}

std::vector<AccelSample> sampled_accel(double amplitude, double freq_hz, double duration_s) {
  std::vector<AccelSample> out;
  const int n = static_cast<int>(duration_s * 25.0);
  for (int k = 0; k <= n; ++k) {
    const double t = k * 0.04;
    AccelSample s;
    s.t_ms = static_cast<std::int64_t>(k) * 40;
    s.az_g = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * t);
    out.push_back(s);
  }
  return out;
}

Participant test_participant(double cpet_max) {
  Participant p;
  p.id = "A";
  p.gender = Gender::male;
  p.age = 30;
  p.height_m = 1.78;
  p.weight_kg = 74.0;
  p.cpet_max_hr = cpet_max;
  return p;
}

void criterion_table2() {
  const struct {
    double r, p;
  } rows[] = {{0.603100, 0.000015},
              {0.544672, 0.000132},
              {0.045742, 0.768116},
              {0.096538, 0.533030},
              {0.136856, 0.375701}};
  for (const auto& row : rows) {
    const double got = p_two_tailed(row.r, 44);
    const double tol = std::max(0.05 * row.p, 2e-6);
    require(std::abs(got - row.p) <= tol,
            "p(" + std::to_string(row.r) + ", 44) = " + std::to_string(got) + " vs " +
                std::to_string(row.p));
  }
}

void criterion_linear_oracles() {
  Rng rng(4242);
  int checked = 0;
  while (checked < 25) {
    const int n = 5 + static_cast<int>(rng.below(6));   // 5..10
    const int d = 1 + static_cast<int>(rng.below(3));   // 1..3
    std::vector<std::vector<long>> xn(static_cast<std::size_t>(n),
                                      std::vector<long>(static_cast<std::size_t>(d)));
    std::vector<long> yn(static_cast<std::size_t>(n));
    DesignMatrix dm;
    dm.X.resize(n, d);
    dm.y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        const long v = static_cast<long>(rng.below(513)) - 256;
        xn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
        dm.X(i, j) = static_cast<double>(v) / 128.0;  // dyadic, exact both ways
      }
      const long v = static_cast<long>(rng.below(513)) - 256;
      yn[static_cast<std::size_t>(i)] = v;
      dm.y(i) = static_cast<double>(v) / 128.0;
    }
    for (int j = 0; j < d; ++j) dm.column_names.push_back("c" + std::to_string(j));

    std::vector<oracle::Rational> exact;
    try {
      exact = oracle::rational_ols(xn, yn, 128);
    } catch (const std::runtime_error&) {
      continue;  // singular draw, re-sample
    }
    LinearFit ls;
    try {
      ls = ols_fit(dm);
    } catch (const ValidationError&) {
      continue;  // near-constant column
    }
    ++checked;

    require(std::abs(ls.intercept - static_cast<double>(exact[0])) < 1e-8,
            "ols intercept off the rational oracle");
    for (int j = 0; j < d; ++j)
      require(std::abs(ls.coefficients(j) -
                       static_cast<double>(exact[static_cast<std::size_t>(j) + 1])) < 1e-8,
              "ols coefficient off the rational oracle");

    // ridge closed form
    const double l2 = 0.25 + rng.uniform01();
    const auto ridge = ridge_fit(dm, l2);
    const auto s = standardize_fit(dm.X);
    const Eigen::MatrixXd Xs = standardize_apply(s, dm.X);
    const Eigen::VectorXd yc = dm.y.array() - dm.y.mean();
    Eigen::MatrixXd A = Xs.transpose() * Xs / static_cast<double>(n) +
                        l2 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd closed =
        A.fullPivLu().solve(Xs.transpose() * yc / static_cast<double>(n));
    require((ridge.coefficients_std - closed).cwiseAbs().maxCoeff() < 1e-8,
            "ridge off its closed form");

    // lasso and elastic net against proximal gradient in objective value
    for (const auto& [l1p, l2p] : {std::pair{0.1, 0.0}, {0.1, 0.3}}) {
      const auto fit = elastic_net_fit(dm, l1p, l2p, 1e-12, 200000);
      const Eigen::VectorXd pg = oracle::prox_grad_enet(Xs, yc, l1p, l2p, 1e-10);
      const double f_cd = elastic_net_objective(Xs, yc, fit.coefficients_std, l1p, l2p);
      const double f_pg = elastic_net_objective(Xs, yc, pg, l1p, l2p);
      require(std::abs(f_cd - f_pg) < 1e-4, "coordinate descent off the proximal oracle");
    }
  }
}

void criterion_svr_oracle() {
  for (int t = 0; t < 10; ++t) {
    Rng rng(9000 + t);
    const int n = 4 + static_cast<int>(rng.below(5));  // 4..8
    DesignMatrix dm;
    dm.X.resize(n, 2);
    dm.y.resize(n);
    for (int i = 0; i < n; ++i) {
      dm.X(i, 0) = rng.normal();
      dm.X(i, 1) = rng.normal();
      dm.y(i) = rng.normal(0.0, 2.0);
    }
    SvrConfig cfg;
    cfg.C = 5.0;
    cfg.epsilon = 0.1;
    cfg.tol = 1e-6;
    cfg.max_passes = 50000;
    const auto fit = svr_fit(dm, cfg);
    require(fit.converged, "SMO did not converge");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < fit.sv_indices.size(); ++k)
      beta(fit.sv_indices[k]) = fit.dual_coef(static_cast<Eigen::Index>(k));

    require(beta.cwiseAbs().maxCoeff() <= cfg.C + 1e-12, "dual coefficient beyond the box");
    require(std::abs(beta.sum()) <= 1e-10, "dual coefficients do not balance");

    const Eigen::MatrixXd K = kernel_matrix(fit.config.kernel, fit.config.gamma, dm.X);
    const double w_smo = svr_dual_objective(K, dm.y, cfg.epsilon, beta);
    const auto pg = oracle::pg_dual_svr(K, dm.y, cfg.C, cfg.epsilon);
    require(std::abs(w_smo - pg.objective) < 1e-4,
            "SMO dual objective " + std::to_string(w_smo) + " vs oracle " +
                std::to_string(pg.objective));

    const Eigen::VectorXd pred = svr_predict(fit, dm.X);
    for (int i = 0; i < n; ++i) {
      const double resid = std::abs(dm.y(i) - pred(i));
      if (resid < cfg.epsilon - 2.0 * cfg.tol)
        require(beta(i) == 0.0, "interior point with nonzero dual");
      if (std::abs(beta(i)) == cfg.C)
        require(resid >= cfg.epsilon - 2.0 * cfg.tol, "bound dual inside the tube");
    }
  }
}

void criterion_protocol() {
  // heart-rate limit at exactly 300 s
  {
    SessionRecording rec;
    rec.kind = SessionKind::cpsjt;
    rec.hr = sampled_hr([](double t) { return 100.0 + 80.0 * t / 300.0; }, 310.0);
    rec.accel = sampled_accel(0.7, 2.5, 310.0);
    const auto out = run_cpsjt(rec, test_participant(190.0), CpsjtConfig::defaults());
    require(out.reason == TerminationReason::hr_limit, "expected hr_limit");
    require(out.endured_raw_s == 300.0, "expected endured_raw 300");
    require(out.endured_interp_s == 300.0, "expected endured_interp 300");
  }
  // movement failure at 203 s with a 30 s interpolation credit
  {
    CpsjtConfig cfg = CpsjtConfig::defaults();
    cfg.level_duration_s = 40.0;
    cfg.level_cadence_bounds.clear();
    for (int l = 0; l < 18; ++l)
      cfg.level_cadence_bounds.push_back({0.05 + 0.1 * l, 0.05 + 0.1 * l + 0.3});

    SessionRecording rec;
    rec.kind = SessionKind::cpsjt;
    rec.hr = sampled_hr(
        [](double t) {
          if (t <= 160.0) return 100.0 + 0.375 * t;
          if (t <= 200.0) return 160.0 + 0.5 * (t - 160.0);
          return 180.0;
        },
        210.0);
    rec.accel = sampled_accel(0.72, 2.0, 210.0);
    const auto out = run_cpsjt(rec, test_participant(200.0), cfg);
    require(out.reason == TerminationReason::movement_failure, "expected movement_failure");
    require(out.endured_raw_s == 203.0, "expected endured_raw 203");
    require(std::abs(out.endured_interp_s - 233.0) < 1e-9, "expected endured_interp 233");
  }
  // full game clock
  {
    SessionRecording rec;
    rec.kind = SessionKind::cpsjt;
    rec.hr = sampled_hr([](double) { return 120.0; }, 730.0);
    rec.accel = sampled_accel(1.2, 3.0, 730.0);
    const auto out = run_cpsjt(rec, test_participant(190.0), CpsjtConfig::defaults());
    require(out.reason == TerminationReason::time_elapsed, "expected time_elapsed");
    require(out.endured_raw_s == 720.0 && out.endured_interp_s == 720.0,
            "expected 720/720");
  }
  // standalone interpolation: 10-beat gap climbed over 40 s, factor 0.75
  {
    const auto hr = sampled_hr(
        [](double t) {
          if (t <= 260.0) return 100.0 + 70.0 * t / 260.0;
          if (t <= 300.0) return 170.0 + 0.25 * (t - 260.0);
          return 180.0;
        },
        310.0);
    const auto r = interpolate_endurance(hr, 310.0, 180.0, 190.0, 0.75);
    require(std::abs((r.endured_interp_s - 310.0) - 30.0) < 1e-12,
            "expected exactly 30 extra seconds");
  }
}

void criterion_partition() {
  Rng rng(31415);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<HrSample> hr;
    std::int64_t t = static_cast<std::int64_t>(rng.below(1500));
    const int n = 2 + static_cast<int>(rng.below(120));
    for (int i = 0; i < n; ++i) {
      hr.push_back({t, 50.0 + 150.0 * rng.uniform01()});
      t += 1 + static_cast<std::int64_t>(rng.below(3000));
    }
    const auto endured_ms =
        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hr.back().t_ms) + 1));
    const auto split =
        aerobic_anaerobic_split(hr, static_cast<double>(endured_ms) / 1000.0,
                                140.0 + 60.0 * rng.uniform01());
    require(split.aerobic_ms + split.anaerobic_ms == endured_ms,
            "partition not exact in milliseconds");
    require(std::llround(split.aerobic_s() * 1000.0) +
                    std::llround(split.anaerobic_s() * 1000.0) ==
                endured_ms,
            "partition not exact after conversion to seconds");
  }
}

void criterion_end_to_end() {
  // noiseless cohort: the fitted map must equal the generator's coefficients
  const auto dir0 = fresh_dir("e2e_sigma0");
  require(quiet_cli({"pipeline", "--spec", "default", "--sigma", "0", "--seed", "42", "--out",
                     dir0.string(), "--cells", "19", "11", "8", "6", "--model", "linear",
                     "--cv", "loocv"}) == 0,
          "noiseless pipeline run failed");
  const auto truth = nlohmann::ordered_json::parse(read_text(dir0 / "truth.json"));
  const auto fit = nlohmann::ordered_json::parse(read_text(dir0 / "fit_linear.json"));
  const auto& beta = truth.at("beta");
  require(std::abs(fit.at("intercept").get<double>() - beta.at("intercept").get<double>()) <
              1e-6,
          "intercept not recovered");
  for (const char* name : {"gender", "bmi", "aerobic_s", "anaerobic_s"})
    require(std::abs(fit.at("coefficients").at(name).get<double>() -
                     beta.at(name).get<double>()) < 1e-6,
            std::string("coefficient ") + name + " not recovered");
  const auto report0 = nlohmann::ordered_json::parse(read_text(dir0 / "report.json"));
  require(report0.at("models")[0].at("loocv").at("rmse").get<double>() < 1e-6,
          "noiseless LOOCV RMSE not ~0");

  // noisy 400-row cohort: every linear model's mean fold RMSE near sigma
  const double sigma = 5.0;
  const auto dir1 = fresh_dir("e2e_sigma5");
  require(quiet_cli({"pipeline", "--spec", "default", "--sigma", "5", "--seed", "43", "--out",
                     dir1.string(), "--cells", "173", "100", "73", "54", "--model",
                     "linear,ridge,lasso,elasticnet", "--cv", "stratified:5"}) == 0,
          "noisy pipeline run failed");
  const auto report1 = nlohmann::ordered_json::parse(read_text(dir1 / "report.json"));
  for (const auto& m : report1.at("models")) {
    const double rmse = m.at("kfold").at("mean_rmse").get<double>();
    require(std::abs(rmse - sigma) <= 0.15 * sigma,
            m.at("model").get<std::string>() + " mean fold RMSE " + std::to_string(rmse) +
                " outside 15% of sigma");
  }
  fs::remove_all(dir0);
  fs::remove_all(dir1);
}

void criterion_fold_plans() {
  std::vector<int> labels(30, 1);
  labels.insert(labels.end(), 14, 0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto plan = stratified_kfold(labels, 5, seed);
    validate_plan(plan, 44);
    int twos = 0;
    for (const auto& fold : plan.folds) {
      int m = 0, f = 0;
      for (int i : fold) (labels[static_cast<std::size_t>(i)] ? m : f)++;
      require(m == 6, "male fold count != 6");
      require(f == 2 || f == 3, "female fold count outside {2,3}");
      if (f == 2) ++twos;
    }
    require(twos == 1, "expected exactly one 2-female fold");
  }
}

void criterion_determinism() {
  const auto dir = fresh_dir("det");
  require(quiet_cli({"simulate", "--spec", "default", "--seed", "7", "--out", dir.string()}) ==
              0,
          "simulate failed");
  const auto manifest = (dir / "manifest.json").string();
  require(quiet_cli({"eval", "--manifest", manifest, "--model", "all", "--cv", "both", "--seed",
                     "7", "--threads", "1", "--out", (dir / "r1.json").string()}) == 0,
          "threads=1 eval failed");
  require(quiet_cli({"eval", "--manifest", manifest, "--model", "all", "--cv", "both", "--seed",
                     "7", "--threads", "8", "--out", (dir / "r8.json").string()}) == 0,
          "threads=8 eval failed");
  auto a = nlohmann::ordered_json::parse(read_text(dir / "r1.json"));
  auto b = nlohmann::ordered_json::parse(read_text(dir / "r8.json"));
  a.erase("provenance");
  b.erase("provenance");
  require(a.dump() == b.dump(), "reports differ across thread counts");
  fs::remove_all(dir);
}

void criterion_simulator() {
  PhysioModel m;
  m.resting_hr = 60.0;
  m.true_max_hr = 190.0;
  m.rise_tau_s = 35.0;
  m.fitness = 1.0;
  m.noise_sd = 0.0;
  const double u = 0.5;
  const double ss = steady_state_hr(m, u);
  const auto stream = simulate_hr(m, [&](double) { return u; }, 150.0, 1.0);
  for (double k : {1.0, 2.0, 3.0}) {
    const auto t_ms = static_cast<std::int64_t>(k * 35.0 * 1000.0);
    const double want = ss - (ss - m.resting_hr) * std::exp(-k);
    bool found = false;
    for (const auto& s : stream) {
      if (s.t_ms != t_ms) continue;
      require(std::abs(s.hr_bpm - want) <= 1e-6, "step response off the closed form");
      found = true;
    }
    require(found, "sample at k*tau missing");
  }
  PhysioModel noisy = m;
  noisy.noise_sd = 8.0;
  noisy.seed = 5;
  const auto loud = simulate_hr(noisy, [](double) { return 2.0; }, 800.0, 1.0);
  for (const auto& s : loud)
    require(s.hr_bpm <= noisy.true_max_hr, "sample exceeds the true max");
}

}  // namespace

int main() {
  Harness h;
  h.run(1, "reference correlation/p fixtures reproduce at n = 44", 1.0, criterion_table2);
  h.run(2, "linear solvers match exact and proximal oracles", 10.0, criterion_linear_oracles);
  h.run(3, "SMO dual matches a projected-gradient oracle with KKT structure", 30.0,
        criterion_svr_oracle);
  h.run(4, "session protocol reproduces the hand-derived traces", 1.0, criterion_protocol);
  h.run(5, "aerobic/anaerobic split partitions time exactly", 5.0, criterion_partition);
  h.run(6, "end-to-end synthetic recovery (exact at sigma 0, calibrated at sigma 5)", 120.0,
        criterion_end_to_end);
  h.run(7, "stratified fold plans keep the 30/14 split", 1.0, criterion_fold_plans);
  h.run(8, "evaluation reports are thread-count invariant", 120.0, criterion_determinism);
  h.run(9, "HR simulator follows first-order dynamics and respects the ceiling", 1.0,
        criterion_simulator);
  if (h.failures) std::printf("%d criterion(s) failed\n", h.failures);
  return h.failures ? 1 : 0;
}
