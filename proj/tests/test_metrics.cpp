#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/metrics.hpp"

using namespace haaqi;

namespace {

// Brute-force references, kept deliberately independent of the library path:
// Pearson from raw moment sums, Spearman from the classic rank-difference
// formula (valid without ties).
double ref_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) /
         std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::vector<double> ref_ranks_no_ties(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double rank = 1;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] < x[i]) rank += 1;
    r[i] = rank;
  }
  return r;
}

double ref_spearman_no_ties(const std::vector<double>& x,
                            const std::vector<double>& y) {
  auto rx = ref_ranks_no_ties(x);
  auto ry = ref_ranks_no_ties(y);
  double n = double(x.size());
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("lcc basics") {
  std::vector<double> x = {1, 2, 3, 4};
  REQUIRE(lcc(x, x) == Catch::Approx(1.0));
  std::vector<double> neg = {-1, -2, -3, -4};
  REQUIRE(lcc(x, neg) == Catch::Approx(-1.0));
  std::vector<double> y = {1, 3, 2, 4};
  REQUIRE(lcc(x, y) == Catch::Approx(0.8));
}

TEST_CASE("srcc basics") {
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y = {1, 3, 2, 4};
  REQUIRE(srcc(x, y) == Catch::Approx(0.8));
  // Any strictly monotone transform gives perfect rank correlation.
  std::vector<double> mono;
  for (double v : x) mono.push_back(std::exp(3.0 * v) + 7.0);
  REQUIRE(srcc(x, mono) == Catch::Approx(1.0));
  std::vector<double> ties = {5, 5, 5, 5};
  REQUIRE_THROWS_AS(srcc(x, ties), Error);
}

TEST_CASE("mse basics") {
  std::vector<double> x = {0, 1}, y = {1, 0};
  REQUIRE(mse(x, x) == 0.0);
  REQUIRE(mse(x, y) == Catch::Approx(1.0));
  std::vector<double> shifted = {0.5, 1.5};
  REQUIRE(mse(x, shifted) == Catch::Approx(0.25));
  REQUIRE_THROWS_AS(mse(x, std::vector<double>{1}), Error);
}

TEST_CASE("metrics agree with brute-force references on random vectors") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(50), y(50);
    for (auto& v : x) v = rng.gaussian();
    for (auto& v : y) v = rng.gaussian();
    REQUIRE(std::abs(lcc(x, y) - ref_pearson(x, y)) < 1e-9);
    REQUIRE(std::abs(srcc(x, y) - ref_spearman_no_ties(x, y)) < 1e-9);
    double ref_mse = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      ref_mse += (x[i] - y[i]) * (x[i] - y[i]);
    REQUIRE(std::abs(mse(x, y) - ref_mse / 50.0) < 1e-9);
  }
}

TEST_CASE("lcc and srcc are invariant under positive affine transforms") {
  Rng rng(77);
  std::vector<double> x(30), y(30);
  for (auto& v : x) v = rng.gaussian();
  for (auto& v : y) v = rng.gaussian();
  std::vector<double> ax;
  for (double v : x) ax.push_back(2.5 * v + 3.0);
  REQUIRE(lcc(ax, y) == Catch::Approx(lcc(x, y)).margin(1e-12));
  REQUIRE(srcc(ax, y) == Catch::Approx(srcc(x, y)).margin(1e-12));
  // srcc additionally survives any strictly increasing transform.
  std::vector<double> cub;
  for (double v : x) cub.push_back(v * v * v);
  REQUIRE(srcc(cub, y) == Catch::Approx(srcc(x, y)).margin(1e-12));
}

TEST_CASE("ties get average ranks") {
  std::vector<double> x = {1, 2, 2, 3};
  auto r = average_ranks(x);
  REQUIRE(r[0] == 1.0);
  REQUIRE(r[1] == 2.5);
  REQUIRE(r[2] == 2.5);
  REQUIRE(r[3] == 4.0);
}
