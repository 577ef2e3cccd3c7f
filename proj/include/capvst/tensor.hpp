#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capvst/error.hpp"

namespace capvst {

// Dense C x H x W volume, channel-major then row-major.
//
// Tensor (float) is the carrier used everywhere in the pipeline. TensorD is the
// 64-bit twin used by the diagnostic mode of the reversible network.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(int channels, int height, int width, T fill = T(0));
  BasicTensor(int channels, int height, int width, std::vector<T> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return std::size_t(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  bool same_shape(const BasicTensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;
  std::string shape_string() const;

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(channels_, height_, width_);
    auto dst = out.data();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (std::size_t(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// 3x3 convolution parameters. Weight layout is [out][in][ky][kx].
struct ConvParams {
  static constexpr int kKernel = 3;

  int out_channels = 0;
  int in_channels = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  ConvParams() = default;
  ConvParams(int out, int in);

  float& at(int o, int i, int ky, int kx) {
    return weight[((std::size_t(o) * in_channels + i) * kKernel + ky) * kKernel + kx];
  }
  float at(int o, int i, int ky, int kx) const {
    return weight[((std::size_t(o) * in_channels + i) * kKernel + ky) * kKernel + kx];
  }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  void validate() const;
};

struct RngSeed {
  std::uint64_t value = 0;
};

// Stride-1 convolution with a zero border of width 1; H x W is preserved.
// Accumulation happens in double and is rounded to T on store.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams& p);

// The two evaluation routes behind conv2d: a Winograd F(4x4, 3x3) kernel
// (used by conv2d) and a direct tap-by-tap GEMM kept as a reference.
template <typename T>
BasicTensor<T> conv2d_winograd(const BasicTensor<T>& x, const ConvParams& p);

template <typename T>
BasicTensor<T> conv2d_direct(const BasicTensor<T>& x, const ConvParams& p);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
void relu_inplace(BasicTensor<T>& x);

// Zero-pads along the channel axis (injective padding).
template <typename T>
BasicTensor<T> pad_channels(const BasicTensor<T>& x, int target_channels);

template <typename T>
BasicTensor<T> crop_channels(const BasicTensor<T>& x, int keep_channels);

// Channel concatenation / split helpers used by the coupling blocks.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int count);

Tensor clamp01(const Tensor& x);

float max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs_diff(const TensorD& a, const TensorD& b);

}  // namespace capvst
