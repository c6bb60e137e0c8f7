#pragma once

#include <functional>

#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/autodiff.hpp"

namespace testsupport {

using haaqi::Mat;
using haaqi::Rng;

inline Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng,
                      double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    *(m.data() + i) = scale * rng.gaussian();
  return m;
}

// Checks analytic gradients of a scalar graph against central differences
// over every coefficient in the store. rel_tol matches the contract used
// throughout: relative error under 1e-3 at 64-bit precision.
inline void check_gradient(
    const std::function<haaqi::ad::Var(haaqi::ad::Tape&, haaqi::ad::ParamStore&)>&
        build,
    haaqi::ad::ParamStore& params, double rel_tol = 1e-3, double eps = 1e-6) {
  params.zero_grad();
  haaqi::ad::Tape t;
  haaqi::ad::Var loss = build(t, params);
  t.backward(loss);
  auto analytic = params.flat_gradient();

  auto ptrs = params.coefficient_pointers();
  auto numeric = haaqi::ad::numeric_gradient(
      [&]() {
        haaqi::ad::Tape t2;
        return t2.scalar(build(t2, params));
      },
      ptrs, eps);

  REQUIRE(analytic.size() == numeric.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-4});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  REQUIRE(worst < rel_tol);
}

}  // namespace testsupport
