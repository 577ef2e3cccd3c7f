#include "capvst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>

namespace capvst {

FlowField::FlowField(int h, int w)
    : height(h),
      width(w),
      u(std::size_t(h) * w, 0.0f),
      v(std::size_t(h) * w, 0.0f),
      valid(std::size_t(h) * w, 1) {}

void FlowField::validate() const {
  const std::size_t n = std::size_t(height) * width;
  if (height <= 0 || width <= 0 || u.size() != n || v.size() != n || valid.size() != n) {
    throw ShapeError("flow field arrays do not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      throw NumericError("flow field contains non-finite displacement");
    }
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes differ (" + a.shape_string() + " vs " +
                     b.shape_string() + ")");
  }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const double center = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[i];
  }
  for (double& x : k) x /= total;
  return k;
}

// Separable "valid" filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(std::size_t(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[std::size_t(y) * w + x + i];
      rows[std::size_t(y) * ow + x] = s;
    }
  }
  std::vector<double> out(std::size_t(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * rows[std::size_t(y + i) * ow + x];
      out[std::size_t(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) throw ShapeError("ssim: empty image");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int h = a.height();
  const int w = a.width();
  const int win = std::min({11, h, w});
  const auto k = gaussian_kernel(win, 1.5);
  const std::size_t n = a.plane_size();

  double total = 0.0;
  std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
  for (int c = 0; c < a.channels(); ++c) {
    auto sa = a.plane(c);
    auto sb = b.plane(c);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = sa[i];
      pb[i] = sb[i];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, k);
    const auto mu_b = filter_valid(pb, h, w, k);
    const auto e_aa = filter_valid(aa, h, w, k);
    const auto e_bb = filter_valid(bb, h, w, k);
    const auto e_ab = filter_valid(ab, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double var_a = e_aa[i] - ma * ma;
      const double var_b = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      sum += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
    }
    total += sum / double(mu_a.size());
  }
  return total / a.channels();
}

double cycle_loss(const Tensor& reconstructed, const Tensor& original) {
  require_same_shape(reconstructed, original, "cycle_loss");
  if (original.empty()) throw ShapeError("cycle_loss: empty tensor");
  auto a = reconstructed.data();
  auto b = original.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
  return s / double(a.size());
}

double latent_style_distance(const Tensor& f_a, const Tensor& f_b) {
  if (f_a.channels() != f_b.channels()) {
    throw ShapeError("latent_style_distance: channel counts differ (" +
                     std::to_string(f_a.channels()) + " vs " + std::to_string(f_b.channels()) +
                     ")");
  }
  if (f_a.plane_size() == 0 || f_b.plane_size() == 0) {
    throw ShapeError("latent_style_distance: empty feature map");
  }
  auto moments = [](std::span<const float> p) {
    double mean = 0.0;
    for (float x : p) mean += x;
    mean /= double(p.size());
    double var = 0.0;
    for (float x : p) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / double(p.size()))};
  };
  double d = 0.0;
  for (int c = 0; c < f_a.channels(); ++c) {
    const auto [ma, sa] = moments(f_a.plane(c));
    const auto [mb, sb] = moments(f_b.plane(c));
    d += std::abs(ma - mb) + std::abs(sa - sb);
  }
  return d;
}

Tensor warp_previous(const Tensor& prev, const FlowField& flow,
                     std::vector<std::uint8_t>* in_bounds) {
  flow.validate();
  if (prev.height() != flow.height || prev.width() != flow.width) {
    throw ShapeError("flow is " + std::to_string(flow.height) + "x" +
                     std::to_string(flow.width) + " but frame is " + prev.shape_string());
  }
  const int h = prev.height();
  const int w = prev.width();
  constexpr double kSlack = 1e-6;
  Tensor out(prev.channels(), h, w);
  if (in_bounds) in_bounds->assign(std::size_t(h) * w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = flow.index(y, x);
      const double sx = x - double(flow.u[i]);
      const double sy = y - double(flow.v[i]);
      if (in_bounds && (sx < -kSlack || sy < -kSlack || sx > w - 1 + kSlack ||
                        sy > h - 1 + kSlack)) {
        (*in_bounds)[i] = 0;
      }
      const double cx = std::clamp(sx, 0.0, double(w - 1));
      const double cy = std::clamp(sy, 0.0, double(h - 1));
      const int x0 = std::min(int(cx), w - 1);
      const int y0 = std::min(int(cy), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double wx = cx - x0;
      const double wy = cy - y0;
      for (int c = 0; c < prev.channels(); ++c) {
        const double top = (1 - wx) * prev(c, y0, x0) + wx * prev(c, y0, x1);
        const double bottom = (1 - wx) * prev(c, y1, x0) + wx * prev(c, y1, x1);
        out(c, y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

TemporalError temporal_error(const Tensor& prev_out, const Tensor& next_out,
                             const FlowField& flow) {
  require_same_shape(prev_out, next_out, "temporal_error");
  std::vector<std::uint8_t> in_bounds;
  const Tensor warped = warp_previous(prev_out, flow, &in_bounds);

  TemporalError result;
  result.heatmap = Tensor(1, next_out.height(), next_out.width());
  double sum = 0.0;
  for (int y = 0; y < next_out.height(); ++y) {
    for (int x = 0; x < next_out.width(); ++x) {
      const std::size_t i = flow.index(y, x);
      if (!flow.valid[i] || !in_bounds[i]) continue;
      double e = 0.0;
      for (int c = 0; c < next_out.channels(); ++c) {
        e += std::abs(double(next_out(c, y, x)) - double(warped(c, y, x)));
      }
      e /= next_out.channels();
      result.heatmap(0, y, x) = static_cast<float>(e);
      sum += e;
      ++result.valid_pixels;
    }
  }
  if (result.valid_pixels == 0) {
    throw ConfigError("temporal_error: no valid pixels after masking");
  }
  result.mean = sum / double(result.valid_pixels);
  return result;
}

}  // namespace capvst
