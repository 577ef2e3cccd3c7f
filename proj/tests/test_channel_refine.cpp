#include <doctest.h>

#include <algorithm>

#include "capvst/channel_refine.hpp"
#include "helpers.hpp"

using namespace capvst;
using testing_util::uniform_tensor;

TEST_CASE("cr_forward default shape 256x64x64 -> 64x128x128") {
  const NetworkWeights w = init_weights(default_plan(), RngSeed{1}, InitMode::kRandom);
  const Tensor z = uniform_tensor(256, 64, 64, 2);
  const Tensor r = cr_forward(z, w);
  CHECK(r.channels() == 64);
  CHECK(r.height() == 128);
  CHECK(r.width() == 128);
  CHECK(max_abs_diff(cr_backward(r, w), z) <= 1e-4f);
}

TEST_CASE("cr round trip on small latents") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetworkWeights w = init_weights(default_plan(), RngSeed{seed}, InitMode::kRandom);
    const Tensor z = uniform_tensor(256, 6, 10, 10 + seed);
    CHECK(max_abs_diff(cr_backward(cr_forward(z, w), w), z) <= 1e-4f);
  }
}

TEST_CASE("zero-residual refinement is a permutation of the latent") {
  const NetworkWeights w = init_weights(default_plan(), RngSeed{0}, InitMode::kZeroResidual);
  const Tensor z = uniform_tensor(256, 4, 4, 3);
  const Tensor r = cr_forward(z, w);
  std::vector<float> a(r.data().begin(), r.data().end());
  std::vector<float> b(z.data().begin(), z.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("refinement pads the latent when target * 4 exceeds the backbone width") {
  ArchitecturePlan p = default_plan();
  p.scale_blocks = {1, 1, 1};
  p.cr.target_channels = 80;  // 256 backbone channels padded to 320
  p.validate();
  const NetworkWeights w = init_weights(p, RngSeed{4}, InitMode::kRandom);
  const Tensor z = uniform_tensor(256, 4, 6, 5);
  const Tensor r = cr_forward(z, w);
  CHECK(r.channels() == 80);
  CHECK(r.height() == 8);
  CHECK(r.width() == 12);
  CHECK(max_abs_diff(cr_backward(r, w), z) <= 1e-4f);

  ArchitecturePlan narrow = default_plan();
  narrow.cr.target_channels = 32;  // 128 < 256 cannot hold the latent
  CHECK_THROWS_AS(narrow.validate(), ConfigError);
}

TEST_CASE("full path bijectivity and channel reduction") {
  const ArchitecturePlan p = default_plan();
  CHECK(p.cr.target_channels < p.backbone_channels());
  const NetworkWeights w = init_weights(p, RngSeed{7}, InitMode::kRandom);
  const Tensor x = uniform_tensor(3, 32, 48, 8, 0.0f, 1.0f);
  const Tensor r = cr_forward(forward(x, w), w);
  CHECK(max_abs_diff(backward(cr_backward(r, w), w), x) <= 1e-3f);
}

TEST_CASE("pointwise diagnostic variant is still bijective") {
  ArchitecturePlan p = default_plan();
  p.cr.pointwise = true;
  const NetworkWeights w = init_weights(p, RngSeed{9}, InitMode::kRandom);
  for (const auto& conv : w.blocks.back().convs) {
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 2; ++i) CHECK(conv.at(o, i, 0, 0) == 0.0f);
  }
  const Tensor z = uniform_tensor(256, 4, 4, 1);
  CHECK(max_abs_diff(cr_backward(cr_forward(z, w), w), z) <= 1e-4f);
}

TEST_CASE("shape mismatches are reported") {
  const NetworkWeights w = init_weights(default_plan(), RngSeed{0}, InitMode::kRandom);
  CHECK_THROWS_AS(cr_forward(Tensor(128, 4, 4), w), ShapeError);
  CHECK_THROWS_AS(cr_backward(Tensor(32, 4, 4), w), ShapeError);
}
