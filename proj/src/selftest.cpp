#include "capvst/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "capvst/channel_refine.hpp"
#include "capvst/cwct.hpp"
#include "capvst/io.hpp"
#include "capvst/matting.hpp"
#include "capvst/metrics.hpp"
#include "capvst/pipeline.hpp"
#include "capvst/synthetic.hpp"

namespace capvst {

namespace {

class Report {
 public:
  // value <= bound passes.
  void check(const std::string& name, double value, double bound) {
    add(name, value <= bound && std::isfinite(value), value, bound);
  }
  void flag(const std::string& name, bool ok) { add(name, ok, ok ? 1.0 : 0.0, 1.0); }

  template <typename F>
  void guarded(const std::string& name, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      checks_.push_back({{"name", name}, {"passed", false}, {"error", e.what()}});
      passed_ = false;
    }
  }

  nlohmann::json finish(nlohmann::json extra) const {
    extra["checks"] = checks_;
    extra["passed"] = passed_;
    return extra;
  }

 private:
  void add(const std::string& name, bool ok, double value, double bound) {
    checks_.push_back({{"name", name}, {"passed", ok}, {"value", value}, {"bound", bound}});
    passed_ = passed_ && ok;
  }

  nlohmann::json checks_ = nlohmann::json::array();
  bool passed_ = true;
};

double frobenius_relative(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Matrix random_spd(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return a * a.transpose() + n * Matrix::Identity(n, n);
}

}  // namespace

nlohmann::json run_selftest(std::uint64_t seed) {
  Report r;
  const ArchitecturePlan plan = default_plan();
  const NetworkWeights net = init_weights(plan, RngSeed{seed}, InitMode::kRandom);

  r.guarded("bijectivity", [&] {
    const StylizationEngine engine(net);
    const Tensor x = random_image(3, 64, 64, seed + 1);
    r.check("bijectivity_float32", max_abs_diff(engine.decode(engine.encode(x)), x), 1e-3);
    const TensorD xd = x.cast<double>();
    const TensorD back = backward(cr_backward(cr_forward(forward(xd, net), net), net), net);
    r.check("bijectivity_float64", max_abs_diff(back, xd), 1e-8);
  });

  r.guarded("zero_residual_permutation", [&] {
    const NetworkWeights zero = init_weights(plan, RngSeed{seed}, InitMode::kZeroResidual);
    const Tensor x = random_image(3, 16, 16, seed + 2);
    const Tensor latent = forward(x, zero);
    const Tensor padded = pad_channels(x, plan.initial_pad_channels);
    std::vector<float> a(latent.data().begin(), latent.data().end());
    std::vector<float> b(padded.data().begin(), padded.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    r.flag("zero_residual_value_multiset", a == b);
  });

  r.guarded("cwct", [&] {
    const Tensor f_c = random_features(16, 32, 32, seed + 3);
    const Tensor f_s = random_features(16, 32, 32, seed + 4);
    const Tensor f_cs = transfer(f_c, f_s, nullptr, nullptr, std::nullopt);
    r.check("cwct_coloring", frobenius_relative(covariance_of(f_cs), covariance_of(f_s)), 1e-3);
    const StyleStats cs = compute_global_stats(f_c, std::nullopt);
    const StyleStats ss = compute_global_stats(f_s, std::nullopt);
    r.check("cwct_whitened_content", max_abs_diff(whiten(f_cs, ss), whiten(f_c, cs)), 1e-3);
    const Tensor twice = transfer(f_cs, f_s, nullptr, nullptr, std::nullopt);
    r.check("cwct_idempotence", max_abs_diff(twice, f_cs), 1e-3);
  });

  r.guarded("cholesky_backward", [&] {
    std::mt19937_64 rng(seed + 5);
    const Matrix s = random_spd(6, rng);
    Matrix w(6, 6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) w(i, j) = u(rng);
    auto phi = [&](const Matrix& m) { return cholesky(m, 0.0).lower.cwiseProduct(w).sum(); };
    const Matrix l = cholesky(s, 0.0).lower;
    const Matrix g = cholesky_backward(s, l, w.triangularView<Eigen::Lower>());
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j <= i; ++j) {
        Matrix e = Matrix::Zero(6, 6);
        e(i, j) = e(j, i) = h;
        const double fd = (phi(s + e) - phi(s - e)) / (2 * h);
        const double an = i == j ? g(i, i) : 2.0 * g(i, j);
        worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), 1e-3));
      }
    }
    r.check("cholesky_backward_fd", worst, 1e-5);
  });

  r.guarded("matting", [&] {
    const Tensor img = smooth_image(8, 8, seed + 6);
    const SparseLaplacian lap = build_laplacian(img);
    double row_sum = 0.0;
    double asym = 0.0;
    Matrix dense = Matrix::Zero(lap.n, lap.n);
    for (const auto& e : lap.entries) dense(e.row, e.col) = e.value;
    for (Eigen::Index i = 0; i < dense.rows(); ++i) row_sum = std::max(row_sum, std::abs(dense.row(i).sum()));
    asym = (dense - dense.transpose()).cwiseAbs().maxCoeff();
    r.check("matting_row_sums", row_sum, 1e-8);
    r.check("matting_symmetry", asym, 0.0);
    const Tensor v = random_image(3, 8, 8, seed + 7);
    double lo = 0.0;
    for (int c = 0; c < 3; ++c) {
      std::vector<double> x(v.plane(c).begin(), v.plane(c).end());
      lo = std::min(lo, lap.quadratic_form(x.data()));
    }
    r.check("matting_psd", -lo, 1e-8);
  });

  r.guarded("metrics", [&] {
    const Tensor a = smooth_image(24, 24, seed + 8);
    r.check("ssim_identity", std::abs(ssim(a, a) - 1.0), 1e-12);
    Tensor shifted(3, 24, 24);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) shifted(c, y, x) = a(c, y, std::max(x - 1, 0));
    FlowField flow(24, 24);
    std::fill(flow.u.begin(), flow.u.end(), 1.0f);
    r.check("temporal_exact_pan", temporal_error(a, shifted, flow).mean, 1e-6);
  });

  r.guarded("weight_file", [&] {
    const auto bytes = encode_weights(net);
    r.flag("weight_file_roundtrip", encode_weights(decode_weights(bytes)) == bytes);
    bool rejected = false;
    try {
      auto bad = bytes;
      bad.resize(bad.size() - 7);
      decode_weights(bad);
    } catch (const IoError&) {
      rejected = true;
    }
    bool bad_magic = false;
    try {
      auto bad = bytes;
      bad[0] = 'X';
      decode_weights(bad);
    } catch (const IoError&) {
      bad_magic = true;
    }
    r.flag("corrupted_weight_file_rejected", rejected && bad_magic);
  });

  r.guarded("pipeline", [&] {
    const StylizationEngine engine(net);
    const Tensor content = smooth_image(32, 32, seed + 9);
    const Tensor out = clamp01(engine.stylize(content, content));
    r.check("pipeline_style_equals_content", max_abs_diff(out, content), 1e-2);
  });

  nlohmann::json extra;
  extra["seed"] = seed;
  extra["parameter_count"] = net.parameter_count();
  extra["plan"] = plan;
  return r.finish(std::move(extra));
}

nlohmann::json run_bench(const BenchOptions& opts) {
  using Clock = std::chrono::steady_clock;
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  const int reps = std::max(1, opts.reps);
  nlohmann::json regimes = nlohmann::json::array();
  double cwct256 = 0.0;
  double svd256 = 0.0;
  double cwct32 = 0.0;
  for (int c : {32, 256}) {
    const Tensor f_c = random_features(c, opts.side, opts.side, opts.seed + 2 * c);
    const Tensor f_s = random_features(c, opts.side, opts.side, opts.seed + 2 * c + 1);
    std::vector<double> t_cwct;
    std::vector<double> t_svd;
    double checksum = 0.0;
    for (int i = 0; i < reps; ++i) {
      auto t0 = Clock::now();
      const Tensor a = transfer(f_c, f_s, nullptr, nullptr, std::nullopt);
      auto t1 = Clock::now();
      const Tensor b = wct_svd(f_c, f_s, std::nullopt);
      auto t2 = Clock::now();
      t_cwct.push_back(std::chrono::duration<double>(t1 - t0).count());
      t_svd.push_back(std::chrono::duration<double>(t2 - t1).count());
      checksum += a.data()[0] + b.data()[0];
    }
    const double mc = median(t_cwct);
    const double ms = median(t_svd);
    if (c == 32) cwct32 = mc;
    if (c == 256) {
      cwct256 = mc;
      svd256 = ms;
    }
    regimes.push_back({{"channels", c},
                       {"pixels", opts.side * opts.side},
                       {"reps", reps},
                       {"cwct_median_s", mc},
                       {"svd_wct_median_s", ms},
                       {"checksum", checksum}});
  }
  return {{"regimes", regimes},
          {"cwct_ratio_256_over_32", cwct256 / cwct32},
          {"passed", cwct256 < svd256}};
}

}  // namespace capvst
