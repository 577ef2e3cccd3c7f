#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "capvst/tensor.hpp"

namespace capvst {

// Closed-form matting Laplacian of an RGB image, stored as a sorted
// (row, col) coordinate list with row offsets for fast products.
struct SparseLaplacian {
  struct Entry {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
  };

  std::size_t n = 0;
  int height = 0;
  int width = 0;
  int window_radius = 1;
  double eps_matting = 1e-7;
  std::vector<Entry> entries;
  // entries[row_offsets[i] .. row_offsets[i+1]) belong to row i.
  std::vector<std::size_t> row_offsets;

  // y = L v.
  void multiply(const double* v, double* y) const;
  double quadratic_form(const double* v) const;
};

inline constexpr int kDefaultWindowRadius = 1;
inline constexpr double kDefaultMattingEps = 1e-7;

// Sum over every (2r+1)^2 window fully inside the image of
//   delta_ij - (1 + (I_i - mu)^T (Sigma + eps/|w| I)^-1 (I_j - mu)) / |w|.
SparseLaplacian build_laplacian(const Tensor& image, int window_radius = kDefaultWindowRadius,
                                double eps_matting = kDefaultMattingEps);

// (1/N) sum_c v_c^T M v_c over the three channels.
double matting_loss(const SparseLaplacian& m, const Tensor& stylized);
double matting_loss(const SparseLaplacian& m, const TensorD& stylized);

// (2/N) M v_c per channel.
Tensor matting_loss_grad(const SparseLaplacian& m, const Tensor& stylized);
TensorD matting_loss_grad(const SparseLaplacian& m, const TensorD& stylized);

Tensor resize_bilinear(const Tensor& image, int height, int width);

// Downsampled copy whose larger side is at most max_dim (identity if it
// already fits).
Tensor bounded_for_laplacian(const Tensor& image, int max_dim = 512);

// "row col value" per line, 17 significant digits.
void write_triplets(std::ostream& os, const SparseLaplacian& m);

}  // namespace capvst
