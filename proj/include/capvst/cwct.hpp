#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "capvst/tensor.hpp"

namespace capvst {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Label map at latent resolution, one integer label per pixel.
struct RegionMask {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  RegionMask() = default;
  RegionMask(int h, int w, std::vector<int> l);

  int at(int y, int x) const { return labels[std::size_t(y) * width + x]; }
  // Distinct labels in ascending order.
  std::vector<int> label_set() const;
  // Nearest-neighbour resampling at pixel centers. Labels are copied, never
  // blended, and any region at least as wide as the scale factor survives.
  RegionMask resized(int new_height, int new_width) const;
};

// Latent statistics of one region (label 0 with no mask means global).
struct StyleStats {
  int region_label = 0;
  Vector mean;
  Matrix covariance;
  // Lower triangular, chol * chol^T = covariance + eps * I.
  Matrix chol;
  double eps = 0.0;
  std::size_t pixel_count = 0;
  // Fewer pixels than channels; eps was escalated.
  bool degenerate = false;

  int channels() const { return static_cast<int>(mean.size()); }
};

// Style side of a transfer: global statistics plus optional per-region ones.
struct StyleModel {
  StyleStats global;
  std::vector<StyleStats> regions;

  // Falls back to the global record for labels the style does not have.
  const StyleStats& for_label(int label) const;
};

// Regularization defaults. With no explicit eps, eps = kRelativeEps * trace/C;
// failed factorizations multiply eps by 10 up to kRelativeEpsCeiling * trace/C.
inline constexpr double kRelativeEps = 1e-8;
inline constexpr double kRelativeEpsCeiling = 1e-2;
inline constexpr double kEpsFloor = 1e-12;

struct CholeskyFactor {
  Matrix lower;
  double eps = 0.0;
};

// Factorizes S + eps I, escalating eps on failure. Throws NumericError for
// non-finite input or when the escalation ceiling is exceeded.
CholeskyFactor cholesky(const Matrix& s, double eps);

// Gradient of a scalar with respect to S given its gradient with respect to
// L = chol(S). Returned symmetric.
Matrix cholesky_backward(const Matrix& s, const Matrix& l, const Matrix& grad_l);

Matrix lower_triangular_inverse(const Matrix& l);

// Stats per region (ascending label order) or one global record when mask is
// null. eps = nullopt selects the trace-relative default.
std::vector<StyleStats> compute_stats(const Tensor& f, const RegionMask* mask,
                                      std::optional<double> eps);

StyleStats compute_global_stats(const Tensor& f, std::optional<double> eps);

// chol^{-1} (f - mean). With a mask, only pixels carrying stats.region_label
// are transformed; the rest are copied through.
Tensor whiten(const Tensor& f, const StyleStats& stats, const RegionMask* mask = nullptr);

// chol * f + mean, with the same masking rule as whiten.
Tensor color(const Tensor& f_white, const StyleStats& stats, const RegionMask* mask = nullptr);

StyleModel build_style_model(const Tensor& f_s, const RegionMask* mask_s,
                             std::optional<double> eps);

// Per content region: whiten with content stats, color with the matching
// style region (or the global style stats). Masks are at latent resolution.
Tensor transfer(const Tensor& f_c, const StyleModel& style, const RegionMask* mask_c,
                std::optional<double> eps);

Tensor transfer(const Tensor& f_c, const Tensor& f_s, const RegionMask* mask_c,
                const RegionMask* mask_s, std::optional<double> eps);

// Convex combination of means and covariances, refactorized.
StyleStats interpolate_stats(const StyleStats& a, const StyleStats& b, double alpha);

StyleModel interpolate_models(const StyleModel& a, const StyleModel& b, double alpha);

struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // columns
  int sweeps = 0;
};

// Cyclic Jacobi rotations. Throws NumericError after max_sweeps.
SymmetricEigen jacobi_eigen(const Matrix& s, int max_sweeps = 60);

// Baseline whitening/coloring through eigendecompositions (eigenvalue floor eps).
Tensor wct_svd(const Tensor& f_c, const Tensor& f_s, std::optional<double> eps);

// Feature tensor as a C x N double matrix and back.
Matrix to_matrix(const Tensor& f);
Matrix covariance_of(const Tensor& f);

}  // namespace capvst
