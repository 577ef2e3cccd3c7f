#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "capvst/metrics.hpp"
#include "capvst/synthetic.hpp"
#include "helpers.hpp"

using namespace capvst;

namespace {

Tensor test_card() {
  Tensor t(3, 32, 32);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        t(c, y, x) = 0.3f + 0.4f * float(((x / 8) + (y / 8) + c) % 2) + 0.002f * float(x);
  return t;
}

Tensor inverted(const Tensor& a) {
  Tensor b = a;
  for (float& v : b.data()) v = 1.0f - v;
  return b;
}

Tensor shift_right(const Tensor& a, int by) {
  Tensor s(a.channels(), a.height(), a.width());
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) s(c, y, x) = a(c, y, std::max(x - by, 0));
  return s;
}

}  // namespace

TEST_CASE("ssim identities") {
  const Tensor a = random_image(3, 20, 24, 1);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const Tensor flat(3, 16, 16, 0.4f);
  CHECK(ssim(flat, flat) == doctest::Approx(1.0).epsilon(1e-12));
  const Tensor b = random_image(3, 20, 24, 2);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-9);
  CHECK_THROWS_AS(ssim(a, Tensor(3, 20, 23)), ShapeError);
}

TEST_CASE("ssim of a test card against its negative") {
  // Golden value from scikit-image structural_similarity with gaussian
  // weights, sigma 1.5, population covariance, data range 1.
  const Tensor card = test_card();
  const double s = ssim(card, inverted(card));
  CHECK(s < 0.3);
  CHECK(s == doctest::Approx(-0.8647008965538968).epsilon(1e-6));
}

TEST_CASE("ssim handles images smaller than the window") {
  const Tensor a = random_image(3, 6, 9, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
  const double s = ssim(a, random_image(3, 6, 9, 4));
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
}

TEST_CASE("cycle_loss") {
  const Tensor a = random_image(3, 8, 8, 5);
  CHECK(cycle_loss(a, a) == 0.0);
  Tensor b = a;
  for (float& v : b.data()) v += 0.5f;
  CHECK(cycle_loss(b, a) == doctest::Approx(0.5).epsilon(1e-6));
  const Tensor c = random_image(3, 8, 8, 6);
  CHECK(cycle_loss(a, c) == cycle_loss(c, a));
  CHECK_THROWS_AS(cycle_loss(a, Tensor(3, 8, 7)), ShapeError);
}

TEST_CASE("latent_style_distance is a pseudo-metric") {
  const Tensor a = random_features(8, 10, 10, 7);
  const Tensor b = random_features(8, 10, 10, 8);
  CHECK(latent_style_distance(a, a) == 0.0);
  CHECK(latent_style_distance(a, b) == latent_style_distance(b, a));
  CHECK(latent_style_distance(a, b) > 0.0);
  Tensor doubled = b;
  for (float& v : doubled.data()) v *= 2.0f;
  double bound = 0.0;
  for (int c = 0; c < 8; ++c) {
    double mean = 0.0, var = 0.0;
    for (float v : b.plane(c)) mean += v;
    mean /= 100.0;
    for (float v : b.plane(c)) var += (v - mean) * (v - mean);
    bound += std::abs(mean) + std::sqrt(var / 100.0);
  }
  CHECK(latent_style_distance(doubled, b) >= bound - 1e-6);
  CHECK_THROWS_AS(latent_style_distance(a, Tensor(4, 10, 10)), ShapeError);
}

TEST_CASE("temporal error basics") {
  const Tensor a = smooth_image(16, 20, 9);
  FlowField still(16, 20);
  CHECK(temporal_error(a, a, still).mean == 0.0);

  FlowField pan(16, 20);
  std::fill(pan.u.begin(), pan.u.end(), 1.0f);
  const TemporalError e = temporal_error(a, shift_right(a, 1), pan);
  CHECK(e.mean <= 1e-6);
  CHECK(e.valid_pixels == 16 * 19);  // column 0 samples outside the frame

  const Tensor b = random_image(3, 16, 20, 10);
  const Tensor c = random_image(3, 16, 20, 11);
  CHECK(temporal_error(b, c, still).mean == doctest::Approx(cycle_loss(b, c)).epsilon(1e-9));
}

TEST_CASE("fractional flow samples bilinearly") {
  Tensor prev(1, 1, 4, std::vector<float>{0.0f, 1.0f, 2.0f, 3.0f});
  FlowField f(1, 4);
  std::fill(f.u.begin(), f.u.end(), 0.5f);
  std::vector<std::uint8_t> inside;
  const Tensor w = warp_previous(prev, f, &inside);
  CHECK(w(0, 0, 1) == doctest::Approx(0.5));
  CHECK(w(0, 0, 3) == doctest::Approx(2.5));
  CHECK(inside[0] == 0);
  CHECK(inside[1] == 1);
}

TEST_CASE("temporal error respects the valid mask") {
  const Tensor prev = random_image(3, 12, 12, 12);
  const Tensor next = random_image(3, 12, 12, 13);
  FlowField flow(12, 12);
  const TemporalError full = temporal_error(prev, next, flow);
  CHECK(full.mean >= 0.0);

  // Keep only the lowest-error half of the pixels.
  std::vector<std::pair<float, std::size_t>> errs;
  for (std::size_t i = 0; i < 144; ++i) errs.push_back({full.heatmap.data()[i], i});
  std::sort(errs.begin(), errs.end());
  std::fill(flow.valid.begin(), flow.valid.end(), 0);
  for (std::size_t k = 0; k < 72; ++k) flow.valid[errs[k].second] = 1;
  const TemporalError half = temporal_error(prev, next, flow);
  CHECK(half.mean <= full.mean);
  CHECK(half.valid_pixels == 72);
  for (std::size_t k = 72; k < 144; ++k) CHECK(half.heatmap.data()[errs[k].second] == 0.0f);

  std::fill(flow.valid.begin(), flow.valid.end(), 0);
  CHECK_THROWS_AS(temporal_error(prev, next, flow), ConfigError);
  CHECK_THROWS_AS(temporal_error(prev, next, FlowField(12, 11)), ShapeError);
}

TEST_CASE("non-finite flow is rejected") {
  FlowField f(2, 2);
  f.u[1] = std::nanf("");
  CHECK_THROWS_AS(f.validate(), NumericError);
}
