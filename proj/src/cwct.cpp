#include "capvst/cwct.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/Core>

namespace capvst {

RegionMask::RegionMask(int h, int w, std::vector<int> l) : height(h), width(w), labels(std::move(l)) {
  if (h < 0 || w < 0 || labels.size() != std::size_t(h) * w) {
    throw ShapeError("region mask label count does not match its size");
  }
}

std::vector<int> RegionMask::label_set() const {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

RegionMask RegionMask::resized(int new_height, int new_width) const {
  if (new_height <= 0 || new_width <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("cannot resize an empty region mask");
  }
  std::vector<int> out(std::size_t(new_height) * new_width);
  for (int y = 0; y < new_height; ++y) {
    const int sy = std::min(height - 1, int((y + 0.5) * height / new_height));
    for (int x = 0; x < new_width; ++x) {
      const int sx = std::min(width - 1, int((x + 0.5) * width / new_width));
      out[std::size_t(y) * new_width + x] = at(sy, sx);
    }
  }
  return {new_height, new_width, std::move(out)};
}

const StyleStats& StyleModel::for_label(int label) const {
  for (const auto& r : regions) {
    if (r.region_label == label) return r;
  }
  return global;
}

namespace {

constexpr Eigen::Index kChunk = 4096;
// Pixel chunks are gathered row-major so each plane is read and written
// contiguously.
using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + " must be square");
}

bool try_cholesky(const Matrix& a, double eps, Matrix& out) {
  const Eigen::Index n = a.rows();
  RowMatrixD l = RowMatrixD::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* lj = l.data() + j * n;
    double d = a(j, j) + eps;
    for (Eigen::Index k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double diag = std::sqrt(d);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double* li = l.data() + i * n;
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / diag;
    }
  }
  out = l;
  return true;
}

// Solves L^T X = B for lower-triangular L.
Matrix solve_lower_transposed(const Matrix& l, const Matrix& b) {
  const Eigen::Index n = l.rows();
  Matrix x = b;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index k = i + 1; k < n; ++k) x.row(i) -= l(k, i) * x.row(k);
    x.row(i) /= l(i, i);
  }
  return x;
}

double mean_trace(const Matrix& s) { return s.rows() == 0 ? 0.0 : s.trace() / double(s.rows()); }

double default_eps(const Matrix& cov) {
  return std::max(kRelativeEps * std::max(mean_trace(cov), 0.0), kEpsFloor);
}

struct Moments {
  Vector mean;
  Matrix covariance;
  std::size_t count = 0;
};

// Gathers columns `first..first+cols` of the member list into a C x cols block.
void gather(const Tensor& f, const std::vector<std::size_t>* members, std::size_t first,
            Eigen::Index cols, RowMatrixD& block) {
  const int c = f.channels();
  block.resize(c, cols);
  for (int ch = 0; ch < c; ++ch) {
    auto plane = f.plane(ch);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::size_t idx = members ? (*members)[first + j] : first + j;
      block(ch, j) = plane[idx];
    }
  }
}

Moments moments(const Tensor& f, const std::vector<std::size_t>* members) {
  const int c = f.channels();
  const std::size_t n = members ? members->size() : f.plane_size();
  if (n == 0) throw ShapeError("statistics requested over zero pixels");
  Moments m;
  m.count = n;
  m.mean = Vector::Zero(c);
  RowMatrixD block;
  for (std::size_t first = 0; first < n; first += kChunk) {
    const Eigen::Index cols = Eigen::Index(std::min<std::size_t>(kChunk, n - first));
    gather(f, members, first, cols, block);
    m.mean += block.rowwise().sum();
  }
  m.mean /= double(n);
  m.covariance = Matrix::Zero(c, c);
  for (std::size_t first = 0; first < n; first += kChunk) {
    const Eigen::Index cols = Eigen::Index(std::min<std::size_t>(kChunk, n - first));
    gather(f, members, first, cols, block);
    block.colwise() -= m.mean;
    m.covariance.selfadjointView<Eigen::Lower>().rankUpdate(block);
  }
  m.covariance /= double(n);
  m.covariance.triangularView<Eigen::StrictlyUpper>() = m.covariance.transpose();
  return m;
}

StyleStats stats_from_moments(Moments m, int label, std::optional<double> eps) {
  const int c = static_cast<int>(m.mean.size());
  StyleStats s;
  s.region_label = label;
  s.pixel_count = m.count;
  s.degenerate = m.count < std::size_t(c);
  double e = eps ? *eps : default_eps(m.covariance);
  if (eps && !(*eps > 0.0)) throw NumericError("eps must be positive");
  if (s.degenerate) {
    e = std::max({e, kRelativeEpsCeiling * std::max(mean_trace(m.covariance), 0.0), kEpsFloor});
  }
  CholeskyFactor f = cholesky(m.covariance, e);
  s.chol = std::move(f.lower);
  s.eps = f.eps;
  s.mean = std::move(m.mean);
  s.covariance = std::move(m.covariance);
  return s;
}

// out[:, n] = t * (f[:, n] - in_mean) + out_mean for every member pixel.
void apply_affine(const Tensor& f, const Matrix& t, const Vector& in_mean, const Vector& out_mean,
                  const std::vector<std::size_t>* members, Tensor& out) {
  const std::size_t n = members ? members->size() : f.plane_size();
  RowMatrixD block;
  RowMatrixD result;
  for (std::size_t first = 0; first < n; first += kChunk) {
    const Eigen::Index cols = Eigen::Index(std::min<std::size_t>(kChunk, n - first));
    gather(f, members, first, cols, block);
    block.colwise() -= in_mean;
    result.noalias() = t * block;
    result.colwise() += out_mean;
    for (int ch = 0; ch < out.channels(); ++ch) {
      auto plane = out.plane(ch);
      for (Eigen::Index j = 0; j < cols; ++j) {
        const std::size_t idx = members ? (*members)[first + j] : first + j;
        plane[idx] = static_cast<float>(result(ch, j));
      }
    }
  }
}

void check_mask(const Tensor& f, const RegionMask* mask) {
  if (mask && (mask->height != f.height() || mask->width != f.width())) {
    throw ShapeError("mask is " + std::to_string(mask->height) + "x" + std::to_string(mask->width) +
                     " but features are " + f.shape_string());
  }
}

std::vector<std::size_t> members_of(const RegionMask& mask, int label) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] == label) m.push_back(i);
  }
  return m;
}

void check_stats(const Tensor& f, const StyleStats& s) {
  if (s.channels() != f.channels()) {
    throw ShapeError("stats have " + std::to_string(s.channels()) + " channels, features " +
                     f.shape_string());
  }
}

}  // namespace

CholeskyFactor cholesky(const Matrix& s, double eps) {
  require_square(s, "cholesky input");
  if (!s.allFinite()) throw NumericError("cholesky input has non-finite entries");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw NumericError("cholesky eps must be finite and >= 0");
  const double scale = std::max(mean_trace(s), 0.0);
  const double ceiling = std::max(eps, kRelativeEpsCeiling * scale);
  double e = eps;
  Matrix l;
  while (true) {
    if (try_cholesky(s, e, l)) return {std::move(l), e};
    if (e >= ceiling) break;
    const double next = e > 0.0 ? e * 10.0 : std::max(kRelativeEps * scale, kEpsFloor);
    e = std::min(next, ceiling);
    if (e <= 0.0) break;
  }
  throw NumericError("cholesky: matrix is not positive definite even with eps = " +
                     std::to_string(ceiling));
}

Matrix lower_triangular_inverse(const Matrix& l) {
  require_square(l, "triangular matrix");
  const Eigen::Index n = l.rows();
  Matrix inv = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(l(j, j) != 0.0)) throw NumericError("singular triangular factor");
    inv(j, j) = 1.0 / l(j, j);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index k = j; k < i; ++k) s += l(i, k) * inv(k, j);
      inv(i, j) = -s / l(i, i);
    }
  }
  return inv;
}

// With S = L L^T and Phi(X) the lower triangle of X with a halved diagonal,
// dF/dS = sym(L^-T Phi(L^T dF/dL) L^-1). Only 1/L(i,i) terms appear, so
// repeated eigenvalues are harmless.
Matrix cholesky_backward(const Matrix& s, const Matrix& l, const Matrix& grad_l) {
  require_square(l, "cholesky factor");
  if (s.rows() != l.rows() || grad_l.rows() != l.rows() || grad_l.cols() != l.cols()) {
    throw ShapeError("cholesky_backward operand sizes differ");
  }
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) throw NumericError("cholesky_backward: factor has a non-positive diagonal");
  }
  Matrix phi = (l.transpose() * grad_l).triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  const Matrix x = solve_lower_transposed(l, phi);
  const Matrix gt = solve_lower_transposed(l, x.transpose());
  return 0.5 * (gt + gt.transpose());
}

Matrix to_matrix(const Tensor& f) {
  using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrixF> view(f.data().data(), f.channels(), Eigen::Index(f.plane_size()));
  return view.cast<double>();
}

Matrix covariance_of(const Tensor& f) { return moments(f, nullptr).covariance; }

StyleStats compute_global_stats(const Tensor& f, std::optional<double> eps) {
  if (f.channels() == 0) throw ShapeError("features have no channels");
  return stats_from_moments(moments(f, nullptr), 0, eps);
}

std::vector<StyleStats> compute_stats(const Tensor& f, const RegionMask* mask,
                                      std::optional<double> eps) {
  check_mask(f, mask);
  if (!mask) return {compute_global_stats(f, eps)};
  std::vector<StyleStats> out;
  for (int label : mask->label_set()) {
    const auto members = members_of(*mask, label);
    out.push_back(stats_from_moments(moments(f, &members), label, eps));
  }
  return out;
}

Tensor whiten(const Tensor& f, const StyleStats& stats, const RegionMask* mask) {
  check_stats(f, stats);
  check_mask(f, mask);
  Tensor out = f;
  const Vector zero = Vector::Zero(f.channels());
  const Matrix inv = lower_triangular_inverse(stats.chol);
  if (!mask) {
    apply_affine(f, inv, stats.mean, zero, nullptr, out);
  } else {
    const auto members = members_of(*mask, stats.region_label);
    apply_affine(f, inv, stats.mean, zero, &members, out);
  }
  return out;
}

Tensor color(const Tensor& f_white, const StyleStats& stats, const RegionMask* mask) {
  check_stats(f_white, stats);
  check_mask(f_white, mask);
  Tensor out = f_white;
  const Vector zero = Vector::Zero(f_white.channels());
  if (!mask) {
    apply_affine(f_white, stats.chol, zero, stats.mean, nullptr, out);
  } else {
    const auto members = members_of(*mask, stats.region_label);
    apply_affine(f_white, stats.chol, zero, stats.mean, &members, out);
  }
  return out;
}

StyleModel build_style_model(const Tensor& f_s, const RegionMask* mask_s,
                             std::optional<double> eps) {
  if (f_s.plane_size() == 0) throw ShapeError("style features are empty");
  check_mask(f_s, mask_s);
  StyleModel model;
  model.global = compute_global_stats(f_s, eps);
  if (mask_s) model.regions = compute_stats(f_s, mask_s, eps);
  return model;
}

Tensor transfer(const Tensor& f_c, const StyleModel& style, const RegionMask* mask_c,
                std::optional<double> eps) {
  check_stats(f_c, style.global);
  check_mask(f_c, mask_c);
  if (f_c.plane_size() == 0) throw ShapeError("content features are empty");
  Tensor out(f_c.channels(), f_c.height(), f_c.width());
  if (!mask_c) {
    const StyleStats content = compute_global_stats(f_c, eps);
    const Matrix t = style.global.chol * lower_triangular_inverse(content.chol);
    apply_affine(f_c, t, content.mean, style.global.mean, nullptr, out);
    return out;
  }
  for (int label : mask_c->label_set()) {
    const auto members = members_of(*mask_c, label);
    const StyleStats content = stats_from_moments(moments(f_c, &members), label, eps);
    const StyleStats& target = style.for_label(label);
    const Matrix t = target.chol * lower_triangular_inverse(content.chol);
    apply_affine(f_c, t, content.mean, target.mean, &members, out);
  }
  return out;
}

Tensor transfer(const Tensor& f_c, const Tensor& f_s, const RegionMask* mask_c,
                const RegionMask* mask_s, std::optional<double> eps) {
  if ((mask_c == nullptr) != (mask_s == nullptr)) {
    throw ConfigError("content and style masks must be given together");
  }
  if (f_c.channels() != f_s.channels()) throw ShapeError("content and style channel counts differ");
  return transfer(f_c, build_style_model(f_s, mask_s, eps), mask_c, eps);
}

StyleStats interpolate_stats(const StyleStats& a, const StyleStats& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (a.channels() != b.channels()) throw ShapeError("interpolated stats differ in channel count");
  StyleStats s;
  s.region_label = a.region_label;
  s.mean = (1.0 - alpha) * a.mean + alpha * b.mean;
  s.covariance = (1.0 - alpha) * a.covariance + alpha * b.covariance;
  s.pixel_count = static_cast<std::size_t>(
      std::llround((1.0 - alpha) * double(a.pixel_count) + alpha * double(b.pixel_count)));
  s.degenerate = a.degenerate || b.degenerate;
  CholeskyFactor f = cholesky(s.covariance, (1.0 - alpha) * a.eps + alpha * b.eps);
  s.chol = std::move(f.lower);
  s.eps = f.eps;
  return s;
}

StyleModel interpolate_models(const StyleModel& a, const StyleModel& b, double alpha) {
  StyleModel m;
  m.global = interpolate_stats(a.global, b.global, alpha);
  std::set<int> labels;
  for (const auto& r : a.regions) labels.insert(r.region_label);
  for (const auto& r : b.regions) labels.insert(r.region_label);
  for (int label : labels) {
    StyleStats s = interpolate_stats(a.for_label(label), b.for_label(label), alpha);
    s.region_label = label;
    m.regions.push_back(std::move(s));
  }
  return m;
}

SymmetricEigen jacobi_eigen(const Matrix& s, int max_sweeps) {
  require_square(s, "eigen input");
  if (!s.allFinite()) throw NumericError("eigen input has non-finite entries");
  const Eigen::Index n = s.rows();
  Matrix a = 0.5 * (s + s.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double total = a.squaredNorm();
  SymmetricEigen result;
  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total || total == 0.0) {
      result.values = a.diagonal();
      result.vectors = std::move(v);
      result.sweeps = sweep;
      return result;
    }
    if (sweep == max_sweeps) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        if (!std::isfinite(theta * theta)) t = 0.5 / theta;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Columns p and q are contiguous; rows are mirrored afterwards and
        // the 2x2 pivot block is set from the closed form.
        double* cp = a.col(p).data();
        double* cq = a.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = cp[k];
          const double akq = cq[k];
          cp[k] = c * akp - sn * akq;
          cq[k] = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          a(p, k) = cp[k];
          a(q, k) = cq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - sn * y;
          vq[k] = sn * x + c * y;
        }
      }
    }
  }
  throw NumericError("jacobi_eigen did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

Tensor wct_svd(const Tensor& f_c, const Tensor& f_s, std::optional<double> eps) {
  if (f_c.channels() != f_s.channels()) throw ShapeError("content and style channel counts differ");
  if (f_c.plane_size() == 0 || f_s.plane_size() == 0) throw ShapeError("features are empty");
  const Moments mc = moments(f_c, nullptr);
  const Moments ms = moments(f_s, nullptr);
  const double eps_c = eps ? *eps : default_eps(mc.covariance);
  const double eps_s = eps ? *eps : default_eps(ms.covariance);
  const SymmetricEigen ec = jacobi_eigen(mc.covariance);
  const SymmetricEigen es = jacobi_eigen(ms.covariance);
  const Vector dc = ec.values.cwiseMax(eps_c).cwiseSqrt().cwiseInverse();
  const Vector ds = es.values.cwiseMax(eps_s).cwiseSqrt();
  const Matrix whitening = ec.vectors * dc.asDiagonal() * ec.vectors.transpose();
  const Matrix coloring = es.vectors * ds.asDiagonal() * es.vectors.transpose();
  Tensor out(f_c.channels(), f_c.height(), f_c.width());
  apply_affine(f_c, coloring * whitening, mc.mean, ms.mean, nullptr, out);
  return out;
}

}  // namespace capvst
