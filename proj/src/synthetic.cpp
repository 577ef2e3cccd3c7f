#include "capvst/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace capvst {

namespace {

struct Stream {
  explicit Stream(std::uint64_t seed) : rng(seed) {}
  double uniform() { return double(rng() >> 11) * 0x1.0p-53; }
  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::mt19937_64 rng;
  double spare = 0.0;
  bool has_spare = false;
};

}  // namespace

Tensor random_image(int channels, int height, int width, std::uint64_t seed) {
  Stream s(seed);
  Tensor t(channels, height, width);
  for (float& v : t.data()) v = static_cast<float>(s.uniform());
  return t;
}

Tensor smooth_image(int height, int width, std::uint64_t seed) {
  Stream s(seed);
  Tensor t(3, height, width);
  for (int c = 0; c < 3; ++c) {
    double fx[3], fy[3], ph[3], amp[3];
    for (int k = 0; k < 3; ++k) {
      fx[k] = (0.5 + 2.5 * s.uniform()) * 2.0 * std::numbers::pi / width;
      fy[k] = (0.5 + 2.5 * s.uniform()) * 2.0 * std::numbers::pi / height;
      ph[k] = 2.0 * std::numbers::pi * s.uniform();
      amp[k] = 0.05 + 0.1 * s.uniform();
    }
    const double base = 0.3 + 0.4 * s.uniform();
    const double ramp = 0.1 * (s.uniform() - 0.5);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = base + ramp * (double(x) / width + double(y) / height);
        for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(fx[k] * x + fy[k] * y + ph[k]);
        t(c, y, x) = static_cast<float>(std::fmin(0.95, std::fmax(0.05, v)));
      }
    }
  }
  return t;
}

Tensor random_features(int channels, int height, int width, std::uint64_t seed) {
  Stream s(seed);
  const Eigen::Index c = channels;
  Eigen::MatrixXd a(c, c);
  // Identity plus a random part whose spectral norm stays near 0.9, so the
  // covariance condition number stays in the hundreds at any width.
  const double scale = 1.5 / std::sqrt(double(c));
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < c; ++i) a(i, j) = scale * (s.uniform() - 0.5);
  a += Eigen::MatrixXd::Identity(c, c);
  Eigen::VectorXd mu(c);
  for (Eigen::Index i = 0; i < c; ++i) mu(i) = 2.0 * s.uniform() - 1.0;

  Tensor t(channels, height, width);
  const std::size_t n = t.plane_size();
  constexpr std::size_t kChunk = 4096;
  Eigen::MatrixXd g;
  Eigen::MatrixXd f;
  for (std::size_t first = 0; first < n; first += kChunk) {
    const Eigen::Index cols = Eigen::Index(std::min(kChunk, n - first));
    g.resize(c, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < c; ++i) g(i, j) = s.normal();
    f.noalias() = a * g;
    f.colwise() += mu;
    for (int ch = 0; ch < channels; ++ch) {
      auto plane = t.plane(ch);
      for (Eigen::Index j = 0; j < cols; ++j) plane[first + j] = static_cast<float>(f(ch, j));
    }
  }
  return t;
}

}  // namespace capvst
