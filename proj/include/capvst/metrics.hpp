#pragma once

#include <cstdint>
#include <vector>

#include "capvst/tensor.hpp"

namespace capvst {

// Dense displacement field relating frame t to frame t+1: pixel x of the next
// frame came from x - (u, v) in the previous one.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> u;
  std::vector<float> v;
  std::vector<std::uint8_t> valid;  // 1 = non-occluded

  FlowField() = default;
  FlowField(int h, int w);

  std::size_t index(int y, int x) const { return std::size_t(y) * width + x; }
  void validate() const;
};

// Mean SSIM over channels; 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1. Only windows fully inside the image are used;
// smaller images shrink the window to fit.
double ssim(const Tensor& a, const Tensor& b);

// Mean absolute difference.
double cycle_loss(const Tensor& reconstructed, const Tensor& original);

// sum_c |mu_a - mu_b| + |sigma_a - sigma_b| with population standard deviations.
double latent_style_distance(const Tensor& f_a, const Tensor& f_b);

// Previous frame sampled at x - flow(x) with bilinear interpolation, border
// clamped. Samples falling outside the frame are cleared in in_bounds.
Tensor warp_previous(const Tensor& prev, const FlowField& flow,
                     std::vector<std::uint8_t>* in_bounds = nullptr);

struct TemporalError {
  double mean = 0.0;
  std::size_t valid_pixels = 0;
  // 1 x H x W, mean over channels of |next - warp(prev)|; zero where invalid.
  Tensor heatmap;
};

TemporalError temporal_error(const Tensor& prev_out, const Tensor& next_out,
                             const FlowField& flow);

}  // namespace capvst
