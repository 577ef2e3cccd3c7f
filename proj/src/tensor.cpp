#include "capvst/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace capvst {

template <typename T>
BasicTensor<T>::BasicTensor(int channels, int height, int width, T fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) throw ShapeError("negative tensor dimension");
  data_.assign(std::size_t(channels) * height * width, fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(int channels, int height, int width, std::vector<T> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != std::size_t(channels) * height * width) {
    throw ShapeError("tensor data length does not match " + shape_string());
  }
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
std::string BasicTensor<T>::shape_string() const {
  std::ostringstream os;
  os << channels_ << "x" << height_ << "x" << width_;
  return os.str();
}

template class BasicTensor<float>;
template class BasicTensor<double>;

ConvParams::ConvParams(int out, int in)
    : out_channels(out),
      in_channels(in),
      weight(std::size_t(out) * in * kKernel * kKernel, 0.0f),
      bias(std::size_t(out), 0.0f) {}

void ConvParams::validate() const {
  if (out_channels <= 0 || in_channels <= 0) throw ShapeError("conv channel counts must be positive");
  if (weight.size() != std::size_t(out_channels) * in_channels * kKernel * kKernel) {
    throw ShapeError("conv weight count must equal out*in*9");
  }
  if (bias.size() != std::size_t(out_channels)) throw ShapeError("conv bias count must equal out");
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap =
    Eigen::Map<const RowMatrix, Eigen::Unaligned, Eigen::OuterStride<Eigen::Dynamic>>;

void check_conv_input(const auto& x, const ConvParams& p) {
  p.validate();
  if (x.channels() != p.in_channels) {
    throw ShapeError("conv2d expects " + std::to_string(p.in_channels) + " input channels, got " +
                     std::to_string(x.channels()));
  }
}

// G * g for F(4x4, 3x3).
inline void kernel_transform(const double g[3], double r[6]) {
  r[0] = g[0] / 4.0;
  r[1] = -(g[0] + g[1] + g[2]) / 6.0;
  r[2] = -(g[0] - g[1] + g[2]) / 6.0;
  r[3] = g[0] / 24.0 + g[1] / 12.0 + g[2] / 6.0;
  r[4] = g[0] / 24.0 - g[1] / 12.0 + g[2] / 6.0;
  r[5] = g[2];
}

// B^T * d and A^T * m, applied to n tiles at once; d[i] and r[i] point at
// arrays of n values so the loops vectorize across tiles.
using ConstRow = Eigen::Map<const Eigen::ArrayXd>;
using Row = Eigen::Map<Eigen::ArrayXd>;

void input_transform_rows(const double* const d[6], double* const r[6], int n) {
  const ConstRow d0(d[0], n), d1(d[1], n), d2(d[2], n), d3(d[3], n), d4(d[4], n), d5(d[5], n);
  Row(r[0], n) = 4.0 * d0 - 5.0 * d2 + d4;
  Row(r[1], n) = -4.0 * (d1 + d2) + d3 + d4;
  Row(r[2], n) = 4.0 * (d1 - d2) - d3 + d4;
  Row(r[3], n) = 2.0 * (d3 - d1) - d2 + d4;
  Row(r[4], n) = 2.0 * (d1 - d3) - d2 + d4;
  Row(r[5], n) = 4.0 * d1 - 5.0 * d3 + d5;
}

void output_transform_rows(const double* const m[6], double* const r[4], int n) {
  const ConstRow m0(m[0], n), m1(m[1], n), m2(m[2], n), m3(m[3], n), m4(m[4], n), m5(m[5], n);
  Row(r[0], n) = m0 + m1 + m2 + m3 + m4;
  Row(r[1], n) = m1 - m2 + 2.0 * (m3 - m4);
  Row(r[2], n) = m1 + m2 + 4.0 * (m3 + m4);
  Row(r[3], n) = m1 - m2 + 8.0 * (m3 - m4) + m5;
}

}  // namespace

// Reference path: the input is copied once into a zero-bordered double buffer
// of size C x (H+2) x (W+2). Output is evaluated on the padded-width grid
// H x (W+2), so every kernel tap becomes a plain GEMM over a constant flat
// offset into the buffer; the two junk columns per row are dropped on store.
template <typename T>
BasicTensor<T> conv2d_direct(const BasicTensor<T>& x, const ConvParams& p) {
  check_conv_input(x, p);
  const int h = x.height();
  const int w = x.width();
  const int pw = w + 2;
  const std::size_t padded_plane = std::size_t(h + 2) * pw;
  const Eigen::Index cols = Eigen::Index(h) * pw;

  // Two extra trailing elements keep the last tap's strided view in bounds.
  std::vector<double> padded(padded_plane * p.in_channels + 2, 0.0);
  for (int c = 0; c < p.in_channels; ++c) {
    auto src = x.plane(c);
    double* dst = padded.data() + c * padded_plane;
    for (int y = 0; y < h; ++y) {
      const T* row = src.data() + std::size_t(y) * w;
      double* out = dst + std::size_t(y + 1) * pw + 1;
      for (int xx = 0; xx < w; ++xx) out[xx] = static_cast<double>(row[xx]);
    }
  }

  RowMatrix acc = RowMatrix::Zero(p.out_channels, cols);
  RowMatrix tap(p.out_channels, p.in_channels);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      for (int o = 0; o < p.out_channels; ++o)
        for (int i = 0; i < p.in_channels; ++i) tap(o, i) = p.at(o, i, ky, kx);
      StridedMap view(padded.data() + std::size_t(ky) * pw + kx, p.in_channels, cols,
                      Eigen::OuterStride<Eigen::Dynamic>(Eigen::Index(padded_plane)));
      acc.noalias() += tap * view;
    }
  }

  BasicTensor<T> out(p.out_channels, h, w);
  for (int o = 0; o < p.out_channels; ++o) {
    const double b = p.bias[o];
    auto dst = out.plane(o);
    const double* row0 = acc.data() + std::size_t(o) * cols;
    for (int y = 0; y < h; ++y) {
      const double* row = row0 + std::size_t(y) * pw;
      for (int xx = 0; xx < w; ++xx) dst[std::size_t(y) * w + xx] = static_cast<T>(row[xx] + b);
    }
  }
  return out;
}

// Winograd F(4x4, 3x3): 6x6 input tiles with stride 4. Transforms and the 36
// per-position GEMMs all run in double. Tiles are processed a few tile rows
// at a time so the transformed input and output stay in cache.
template <typename T>
BasicTensor<T> conv2d_winograd(const BasicTensor<T>& x, const ConvParams& p) {
  check_conv_input(x, p);
  const int h = x.height();
  const int w = x.width();
  const int th = (h + 3) / 4;
  const int tw = (w + 3) / 4;
  const int cin = p.in_channels;
  const int cout = p.out_channels;

  // Scratch is reused across calls on the same thread; fresh multi-megabyte
  // allocations per conv cost more in page faults than the transforms.
  thread_local std::vector<double> ubuf, vbuf, mbuf, padded, tmp;

  // U[k] is cout x cin, k = row*6 + col of the transformed kernel.
  const std::size_t ustride = std::size_t(cout) * cin;
  ubuf.resize(ustride * 36);
  for (int o = 0; o < cout; ++o) {
    for (int i = 0; i < cin; ++i) {
      double g[3][3];
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) g[ky][kx] = p.at(o, i, ky, kx);
      double t[6][3];
      for (int c = 0; c < 3; ++c) {
        const double col[3] = {g[0][c], g[1][c], g[2][c]};
        double r[6];
        kernel_transform(col, r);
        for (int k = 0; k < 6; ++k) t[k][c] = r[k];
      }
      const std::size_t at = std::size_t(o) * cin + i;
      for (int k = 0; k < 6; ++k) {
        double r[6];
        kernel_transform(t[k], r);
        for (int l = 0; l < 6; ++l) ubuf[(k * 6 + l) * ustride + at] = r[l];
      }
    }
  }

  // Each zero-bordered input plane is stored split into four column phases
  // (x mod 4), so tile column s of every tile in a row is one contiguous run
  // starting at phase s % 4, offset s / 4.
  const int ph = th * 4 + 2;
  const int run = tw + 1;
  const std::size_t phase_plane = std::size_t(ph) * 4 * run;
  padded.assign(phase_plane * cin, 0.0);
  auto phase_row = [&](int c, int row, int q) {
    return padded.data() + c * phase_plane + (std::size_t(row) * 4 + q) * run;
  };
  for (int c = 0; c < cin; ++c) {
    auto plane = x.plane(c);
    for (int y = 0; y < h; ++y) {
      const T* src = plane.data() + std::size_t(y) * w;
      for (int xx = 0; xx < w; ++xx) {
        const int px = xx + 1;
        phase_row(c, y + 1, px & 3)[px >> 2] = static_cast<double>(src[xx]);
      }
    }
  }

  // About 1.5 MB of transformed tiles per chunk, but never so few tiles that
  // the GEMMs get thin.
  const int widest = std::max(cin, cout);
  const int chunk_tiles = std::max(256, 5400 / widest);
  const int chunk_rows = std::clamp(chunk_tiles / tw, 1, th);
  const std::size_t kstride = std::size_t(widest) * chunk_rows * tw;
  vbuf.resize(kstride * 36);
  mbuf.resize(kstride * 36);
  tmp.resize(std::size_t(36) * tw);

  BasicTensor<T> out(cout, h, w);
  for (int ty0 = 0; ty0 < th; ty0 += chunk_rows) {
    const int rows = std::min(chunk_rows, th - ty0);
    const Eigen::Index n = Eigen::Index(rows) * tw;

    for (int c = 0; c < cin; ++c) {
      for (int ty = ty0; ty < ty0 + rows; ++ty) {
        for (int sc = 0; sc < 6; ++sc) {
          const double* d[6];
          double* r[6];
          for (int i = 0; i < 6; ++i) {
            d[i] = phase_row(c, ty * 4 + i, sc & 3) + (sc >> 2);
            r[i] = tmp.data() + std::size_t(i * 6 + sc) * tw;
          }
          input_transform_rows(d, r, tw);
        }
        const std::size_t t0 = std::size_t(c) * n + std::size_t(ty - ty0) * tw;
        for (int k = 0; k < 6; ++k) {
          const double* d[6];
          double* r[6];
          for (int i = 0; i < 6; ++i) {
            d[i] = tmp.data() + std::size_t(k * 6 + i) * tw;
            r[i] = vbuf.data() + (k * 6 + i) * kstride + t0;
          }
          input_transform_rows(d, r, tw);
        }
      }
    }

    for (int k = 0; k < 36; ++k) {
      Eigen::Map<const RowMatrix> uk(ubuf.data() + k * ustride, cout, cin);
      Eigen::Map<const RowMatrix> vk(vbuf.data() + k * kstride, cin, n);
      Eigen::Map<RowMatrix> mk(mbuf.data() + k * kstride, cout, n);
      mk.noalias() = uk * vk;
    }

    for (int o = 0; o < cout; ++o) {
      const double b = p.bias[o];
      auto plane = out.plane(o);
      for (int ty = ty0; ty < ty0 + rows; ++ty) {
        const std::size_t t0 = std::size_t(o) * n + std::size_t(ty - ty0) * tw;
        for (int sc = 0; sc < 6; ++sc) {
          const double* m[6];
          double* r[4];
          for (int i = 0; i < 6; ++i) m[i] = mbuf.data() + (i * 6 + sc) * kstride + t0;
          for (int k = 0; k < 4; ++k) r[k] = tmp.data() + std::size_t(k * 6 + sc) * tw;
          output_transform_rows(m, r, tw);
        }
        for (int k = 0; k < 4 && ty * 4 + k < h; ++k) {
          const double* m[6];
          double* r[4];
          for (int i = 0; i < 6; ++i) m[i] = tmp.data() + std::size_t(k * 6 + i) * tw;
          for (int l = 0; l < 4; ++l) r[l] = tmp.data() + std::size_t(24 + l) * tw;
          output_transform_rows(m, r, tw);
          T* dst = plane.data() + std::size_t(ty * 4 + k) * w;
          for (int l = 0; l < 4; ++l) {
            const double* src = tmp.data() + std::size_t(24 + l) * tw;
            for (int tx = 0; tx < tw && tx * 4 + l < w; ++tx) {
              dst[tx * 4 + l] = static_cast<T>(src[tx] + b);
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams& p) {
  return conv2d_winograd(x, p);
}

template <typename T>
void relu_inplace(BasicTensor<T>& x) {
  for (auto& v : x.data()) v = v > T(0) ? v : T(0);
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out = x;
  relu_inplace(out);
  return out;
}

template <typename T>
BasicTensor<T> pad_channels(const BasicTensor<T>& x, int target_channels) {
  if (target_channels < x.channels()) {
    throw ShapeError("pad_channels target " + std::to_string(target_channels) +
                     " is below the input channel count " + std::to_string(x.channels()));
  }
  BasicTensor<T> out(target_channels, x.height(), x.width());
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  return out;
}

template <typename T>
BasicTensor<T> crop_channels(const BasicTensor<T>& x, int keep_channels) {
  if (keep_channels > x.channels() || keep_channels < 0) {
    throw ShapeError("crop_channels cannot keep " + std::to_string(keep_channels) + " of " +
                     std::to_string(x.channels()) + " channels");
  }
  return slice_channels(x, 0, keep_channels);
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels spatial mismatch: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  BasicTensor<T> out(a.channels() + b.channels(), a.height(), a.width());
  auto dst = out.data();
  std::copy(a.data().begin(), a.data().end(), dst.begin());
  std::copy(b.data().begin(), b.data().end(), dst.begin() + a.size());
  return out;
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > x.channels()) {
    throw ShapeError("slice_channels range out of bounds for " + x.shape_string());
  }
  BasicTensor<T> out(count, x.height(), x.width());
  auto src = x.data().subspan(std::size_t(begin) * x.plane_size(), out.size());
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

Tensor clamp01(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff shape mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_abs_diff(const TensorD& a, const TensorD& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

#define CAPVST_INSTANTIATE(T)                                                           \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const ConvParams&);             \
  template BasicTensor<T> conv2d_direct(const BasicTensor<T>&, const ConvParams&);      \
  template BasicTensor<T> conv2d_winograd(const BasicTensor<T>&, const ConvParams&);    \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                  \
  template void relu_inplace(BasicTensor<T>&);                                          \
  template BasicTensor<T> pad_channels(const BasicTensor<T>&, int);                     \
  template BasicTensor<T> crop_channels(const BasicTensor<T>&, int);                    \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> slice_channels(const BasicTensor<T>&, int, int);

CAPVST_INSTANTIATE(float)
CAPVST_INSTANTIATE(double)

#undef CAPVST_INSTANTIATE

}  // namespace capvst
