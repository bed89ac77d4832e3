#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vo2/features.hpp"
#include "vo2/rng.hpp"
#include "vo2/stats.hpp"

using namespace vo2;

TEST_CASE("pearson_r worked examples") {
  CHECK(pearson_r({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson_r({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson_r({1, 2, 3, 4}, {1, 3, 2, 5}) == doctest::Approx(0.8315).epsilon(2e-4));
}

TEST_CASE("pearson_r error paths") {
  CHECK_THROWS_WITH_AS(pearson_r({1, 1, 1}, {1, 2, 3}), doctest::Contains("zero variance"),
                       ValidationError);
  CHECK_THROWS_AS(pearson_r({1, 2}, {1, 2}), ValidationError);
  CHECK_THROWS_AS(pearson_r({1, 2, 3}, {1, 2}), ValidationError);
}

TEST_CASE("pearson_r symmetry and affine invariance") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
      x.push_back(rng.normal());
      y.push_back(rng.normal());
    }
    const double r = pearson_r(x, y);
    CHECK(pearson_r(y, x) == doctest::Approx(r).epsilon(1e-12));
    std::vector<double> ax = x, nx = x;
    for (auto& v : ax) v = 3.5 * v + 2.0;
    for (auto& v : nx) v = -2.0 * v + 1.0;
    CHECK(pearson_r(ax, y) == doctest::Approx(r).epsilon(1e-9));
    CHECK(pearson_r(nx, y) == doctest::Approx(-r).epsilon(1e-9));
    CHECK(std::abs(r) <= 1.0 + 1e-12);
  }
}

// The reference correlation/p fixtures for n = 44 must reproduce under the t test
// with n-2 degrees of freedom.
TEST_CASE("p_two_tailed matches the reference fixtures at n = 44") {
  const struct {
    double r, p;
  } rows[] = {{0.603100, 0.000015},
              {0.544672, 0.000132},
              {0.045742, 0.768116},
              {0.096538, 0.533030},
              {0.136856, 0.375701}};
  for (const auto& row : rows) {
    const double p = p_two_tailed(row.r, 44);
    const double tol = std::max(0.05 * row.p, 2e-6);
    CHECK(std::abs(p - row.p) <= tol);
  }
}

TEST_CASE("p_two_tailed limits and monotonicity") {
  CHECK(p_two_tailed(0.0, 44) == doctest::Approx(1.0));
  CHECK(p_two_tailed(1.0, 44) == 0.0);
  CHECK(p_two_tailed(-1.0, 10) == 0.0);

  double prev = 1.1;
  for (double r = 0.0; r < 0.999; r += 0.037) {
    const double p = p_two_tailed(r, 30);
    CHECK(p < prev + 1e-15);
    prev = p;
  }
  for (double r : {0.2, 0.5, 0.8}) {
    double prev_n = 2.0;
    for (std::int64_t n : {5, 10, 20, 40, 80, 160}) {
      const double p = p_two_tailed(r, n);
      CHECK(p < prev_n);
      prev_n = p;
    }
  }
}

TEST_CASE("incomplete beta agrees with a straight series evaluation") {
  for (const auto& [a, b] : {std::pair{21.0, 0.5}, {0.5, 21.0}, {1.0, 1.0}, {3.5, 2.25}}) {
    for (int k = 1; k <= 20; ++k) {
      const double x = k / 21.0;
      const double got = incomplete_beta(a, b, x);
      const double want = static_cast<double>(
          oracle::betainc_series(static_cast<long double>(a), static_cast<long double>(b),
                                 static_cast<long double>(x)));
      CHECK(std::abs(got - want) <= 1e-10);
    }
  }
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK_THROWS_AS(incomplete_beta(-1.0, 1.0, 0.5), ValidationError);
}

TEST_CASE("rmse worked examples") {
  CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(rmse({3, 4}, {0, 0}) == doctest::Approx(3.535534).epsilon(1e-6));
  std::vector<double> t = {5, 9, -2, 4}, p = t;
  for (auto& v : p) v += 2.5;
  CHECK(rmse(p, t) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), ValidationError);
}

namespace {

FeatureVector row_with(double metric_aerobic, double vo2) {
  FeatureVector fv;
  fv.id = "x";
  fv.aerobic_s = metric_aerobic;
  fv.vo2max = vo2;
  return fv;
}

}  // namespace

TEST_CASE("correlation_table basics") {
  SUBCASE("metric identical to the target gives r = 1, p = 0") {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 10; ++i) rows.push_back(row_with(30.0 + i, 30.0 + i));
    const auto table = correlation_table(rows, {"aerobic_s"});
    REQUIRE(table.size() == 1);
    CHECK(*table[0].r == doctest::Approx(1.0));
    CHECK(*table[0].p == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(table[0].n == 10);
  }

  SUBCASE("metric with fewer than 3 usable rows is reported absent") {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 5; ++i) rows.push_back(row_with(30.0 + i, 35.0 + i));
    rows[0].hrr30 = 12.0;
    rows[1].hrr30 = 14.0;
    const auto table = correlation_table(rows, {"hrr30"});
    REQUIRE(table.size() == 1);
    CHECK(!table[0].r.has_value());
    CHECK(table[0].n == 2);
    CHECK(table[0].note == "n < 3");
  }

  SUBCASE("pairwise deletion keeps other metrics at full n") {
    std::vector<FeatureVector> rows;
    Rng rng(5);
    for (int i = 0; i < 12; ++i) {
      auto fv = row_with(100.0 + 5.0 * i + rng.normal(), 30.0 + i);
      if (i % 3 == 0) fv.hrr60 = 10.0 + rng.normal();
      rows.push_back(fv);
    }
    const auto table = correlation_table(rows, {"aerobic_s", "hrr60"});
    CHECK(table[0].n == 12);
    CHECK(table[1].n == 4);
  }

  SUBCASE("rows without a target are rejected") {
    std::vector<FeatureVector> rows = {row_with(1, 2), row_with(2, 3)};
    rows[1].vo2max.reset();
    CHECK_THROWS_WITH_AS(correlation_table(rows, {"aerobic_s"}), doctest::Contains("vo2max"),
                         ValidationError);
  }
}

TEST_CASE("correlation_table recovers a known generating correlation") {
  Rng rng(20240);
  std::vector<FeatureVector> rows;
  const double rho = 0.6;
  for (int i = 0; i < 2000; ++i) {
    const double z = rng.normal();
    const double x = z;
    const double y = rho * z + std::sqrt(1.0 - rho * rho) * rng.normal();
    rows.push_back(row_with(200.0 + 40.0 * x, 40.0 + 6.0 * y));
  }
  const auto table = correlation_table(rows, {"aerobic_s"});
  CHECK(std::abs(*table[0].r - rho) <= 0.05);
}

TEST_CASE("correlation table text rendering") {
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 6; ++i) rows.push_back(row_with(10.0 + i * i, 30.0 + 2 * i));
  const auto table = correlation_table(rows, {"aerobic_s", "hrr120"});
  const auto text = correlation_table_text(table);
  CHECK(text.find("aerobic_s") != std::string::npos);
  CHECK(text.find("hrr120") != std::string::npos);
  CHECK(text.find("n < 3") != std::string::npos);
}
