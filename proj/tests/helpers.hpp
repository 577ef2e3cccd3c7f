#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "capvst/tensor.hpp"

namespace testing_util {

inline capvst::Tensor uniform_tensor(int c, int h, int w, std::uint64_t seed, float lo = -1.0f,
                                     float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  capvst::Tensor t(c, h, w);
  for (float& v : t.data()) v = u(rng);
  return t;
}

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return a * a.transpose() + 0.5 * n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace testing_util
