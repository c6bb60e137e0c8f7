#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "haaqinet/common.hpp"

namespace haaqi {

inline double mse(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "mse: length mismatch");
  require(!x.empty(), "mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / double(x.size());
}

// Pearson correlation.
inline double lcc(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "lcc: length mismatch");
  require(x.size() >= 2, "lcc: need at least two points");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double my = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, "lcc: degenerate variance");
  return sxy / std::sqrt(sxx * syy);
}

// Ranks with ties as average ranks (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation: Pearson over average ranks.
inline double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "srcc: length mismatch");
  require(x.size() >= 2, "srcc: need at least two points");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return lcc(rx, ry);  // throws degenerate-variance on all-ties input
}

}  // namespace haaqi
