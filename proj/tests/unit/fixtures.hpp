#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "ssb/error.hpp"
#include "ssb/marginals.hpp"

#define CHECK_THROWS_CODE(expr, expected)                          \
  do {                                                             \
    bool thrown_ = false;                                          \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const ::ssb::Error& e_) {                             \
      thrown_ = true;                                              \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());           \
    }                                                              \
    CHECK_MESSAGE(thrown_, "expected ssb::Error from " #expr);     \
  } while (0)

namespace fx {

// One-dimensional supports, one inner vector per step.
inline ssb::SnapshotSet line(const std::vector<std::vector<double>>& pts, double horizon = 2.0) {
  std::vector<ssb::Matrix> supports;
  for (const auto& p : pts) {
    ssb::Matrix m(static_cast<Eigen::Index>(p.size()), 1);
    for (std::size_t i = 0; i < p.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = p[i];
    supports.push_back(m);
  }
  return ssb::make_uniform_snapshots(std::move(supports), horizon);
}

// Gaussian supports with `n` points per step.
inline ssb::SnapshotSet random(int intervals, int n, int d, std::uint64_t seed, double scale = 1.0,
                               double horizon = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<ssb::Matrix> supports;
  for (int k = 0; k <= intervals; ++k) {
    ssb::Matrix m(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = normal(rng);
    supports.push_back(m);
  }
  return ssb::make_uniform_snapshots(std::move(supports), horizon);
}

inline double max_abs_diff(const ssb::Matrix& a, const ssb::Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace fx
