#include "capvst/matting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace capvst {

void SparseLaplacian::multiply(const double* v, double* y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      s += entries[k].value * v[entries[k].col];
    }
    y[i] = s;
  }
}

double SparseLaplacian::quadratic_form(const double* v) const {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      s += entries[k].value * v[entries[k].col];
    }
    total += v[i] * s;
  }
  return total;
}

namespace {

// Inverse of a symmetric 3x3 matrix through its adjugate.
void invert_symmetric3(const double m[3][3], double inv[3][3]) {
  const double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  const double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  const double c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
  const double c12 = m[0][1] * m[2][0] - m[0][0] * m[2][1];
  const double c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) {
    throw NumericError("matting window covariance is singular; increase eps_matting");
  }
  const double r = 1.0 / det;
  inv[0][0] = c00 * r;
  inv[1][1] = c11 * r;
  inv[2][2] = c22 * r;
  inv[0][1] = inv[1][0] = c01 * r;
  inv[0][2] = inv[2][0] = c02 * r;
  inv[1][2] = inv[2][1] = c12 * r;
}

void check_stylized(const SparseLaplacian& m, int channels, int h, int w) {
  if (channels != 3 || std::size_t(h) * w != m.n) {
    throw ShapeError("stylized image must be 3 channels with " + std::to_string(m.n) + " pixels");
  }
}

template <typename T>
double loss_impl(const SparseLaplacian& m, const BasicTensor<T>& img) {
  check_stylized(m, img.channels(), img.height(), img.width());
  std::vector<double> v(m.n);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    auto plane = img.plane(c);
    for (std::size_t i = 0; i < m.n; ++i) v[i] = static_cast<double>(plane[i]);
    total += m.quadratic_form(v.data());
  }
  return total / double(m.n);
}

template <typename T>
BasicTensor<T> grad_impl(const SparseLaplacian& m, const BasicTensor<T>& img) {
  check_stylized(m, img.channels(), img.height(), img.width());
  BasicTensor<T> out(3, img.height(), img.width());
  std::vector<double> v(m.n);
  std::vector<double> y(m.n);
  const double scale = 2.0 / double(m.n);
  for (int c = 0; c < 3; ++c) {
    auto plane = img.plane(c);
    for (std::size_t i = 0; i < m.n; ++i) v[i] = static_cast<double>(plane[i]);
    m.multiply(v.data(), y.data());
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < m.n; ++i) dst[i] = static_cast<T>(scale * y[i]);
  }
  return out;
}

}  // namespace

SparseLaplacian build_laplacian(const Tensor& image, int window_radius, double eps_matting) {
  if (image.channels() != 3) throw ShapeError("matting Laplacian needs a 3-channel image");
  if (window_radius < 1) throw ConfigError("window_radius must be >= 1");
  if (!(eps_matting > 0.0)) throw ConfigError("eps_matting must be positive");
  const int h = image.height();
  const int w = image.width();
  const int r = window_radius;
  const int side = 2 * r + 1;
  if (h < side || w < side) {
    throw ShapeError("image " + image.shape_string() + " is smaller than a " +
                     std::to_string(side) + "x" + std::to_string(side) + " window");
  }
  const int area = side * side;
  const int span = 4 * r + 1;
  const std::size_t band = std::size_t(span) * span;
  const std::size_t n = std::size_t(h) * w;

  // Row i stores its neighbours at offset (dy, dx) in [-2r, 2r]^2.
  std::vector<double> values(n * band, 0.0);
  std::vector<unsigned char> covered(n * band, 0);
  auto slot = [&](int dy, int dx) { return std::size_t(dy + 2 * r) * span + (dx + 2 * r); };

  std::vector<std::size_t> idx(area);
  std::vector<int> py(area), px(area);
  std::vector<std::array<double, 3>> d(area);
  for (int cy = r; cy < h - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      double mu[3] = {0.0, 0.0, 0.0};
      int a = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++a) {
          py[a] = cy + dy;
          px[a] = cx + dx;
          idx[a] = std::size_t(py[a]) * w + px[a];
          for (int c = 0; c < 3; ++c) {
            d[a][c] = image(c, py[a], px[a]);
            mu[c] += d[a][c];
          }
        }
      }
      for (double& m : mu) m /= area;
      double cov[3][3] = {};
      for (int k = 0; k < area; ++k) {
        for (int c = 0; c < 3; ++c) d[k][c] -= mu[c];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) cov[i][j] += d[k][i] * d[k][j];
      }
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) cov[i][j] /= area;
        cov[i][i] += eps_matting / area;
      }
      double inv[3][3];
      invert_symmetric3(cov, inv);

      for (int p = 0; p < area; ++p) {
        double q[3];
        for (int i = 0; i < 3; ++i) {
          q[i] = inv[i][0] * d[p][0] + inv[i][1] * d[p][1] + inv[i][2] * d[p][2];
        }
        for (int s = p; s < area; ++s) {
          const double affinity = 1.0 + q[0] * d[s][0] + q[1] * d[s][1] + q[2] * d[s][2];
          const double v = (p == s ? 1.0 : 0.0) - affinity / area;
          const std::size_t fwd = idx[p] * band + slot(py[s] - py[p], px[s] - px[p]);
          values[fwd] += v;
          covered[fwd] = 1;
          if (p != s) {
            const std::size_t rev = idx[s] * band + slot(py[p] - py[s], px[p] - px[s]);
            values[rev] += v;
            covered[rev] = 1;
          }
        }
      }
    }
  }

  SparseLaplacian lap;
  lap.n = n;
  lap.height = h;
  lap.width = w;
  lap.window_radius = r;
  lap.eps_matting = eps_matting;
  lap.row_offsets.reserve(n + 1);
  lap.row_offsets.push_back(0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      for (int dy = -2 * r; dy <= 2 * r; ++dy) {
        for (int dx = -2 * r; dx <= 2 * r; ++dx) {
          const std::size_t k = i * band + slot(dy, dx);
          if (!covered[k]) continue;
          const std::size_t j = std::size_t(y + dy) * w + (x + dx);
          lap.entries.push_back({i, j, values[k]});
        }
      }
      lap.row_offsets.push_back(lap.entries.size());
    }
  }
  return lap;
}

double matting_loss(const SparseLaplacian& m, const Tensor& stylized) {
  return loss_impl(m, stylized);
}
double matting_loss(const SparseLaplacian& m, const TensorD& stylized) {
  return loss_impl(m, stylized);
}
Tensor matting_loss_grad(const SparseLaplacian& m, const Tensor& stylized) {
  return grad_impl(m, stylized);
}
TensorD matting_loss_grad(const SparseLaplacian& m, const TensorD& stylized) {
  return grad_impl(m, stylized);
}

Tensor resize_bilinear(const Tensor& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("resize target must be positive");
  Tensor out(image.channels(), height, width);
  const double sy = double(image.height()) / height;
  const double sx = double(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(image.height() - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(image.width() - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = (1 - wx) * image(c, y0, x0) + wx * image(c, y0, x1);
        const double bottom = (1 - wx) * image(c, y1, x0) + wx * image(c, y1, x1);
        out(c, y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Tensor bounded_for_laplacian(const Tensor& image, int max_dim) {
  const int largest = std::max(image.height(), image.width());
  if (largest <= max_dim) return image;
  const double scale = double(max_dim) / largest;
  const int h = std::max(1, int(std::lround(image.height() * scale)));
  const int w = std::max(1, int(std::lround(image.width() * scale)));
  return resize_bilinear(image, std::min(h, max_dim), std::min(w, max_dim));
}

void write_triplets(std::ostream& os, const SparseLaplacian& m) {
  char line[96];
  for (const auto& e : m.entries) {
    std::snprintf(line, sizeof line, "%zu %zu %.17g\n", e.row, e.col, e.value);
    os << line;
  }
}

}  // namespace capvst
