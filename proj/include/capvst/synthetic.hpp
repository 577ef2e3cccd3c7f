#pragma once

#include <cstdint>

#include "capvst/tensor.hpp"

namespace capvst {

// Deterministic test inputs. Uniform values come straight from mt19937_64 and
// normals from Box-Muller on top of it, so streams match across platforms.

// Uniform in [0, 1).
Tensor random_image(int channels, int height, int width, std::uint64_t seed);

// Smooth color image: a few low-frequency sinusoids per channel plus a ramp,
// kept inside [0.05, 0.95].
Tensor smooth_image(int height, int width, std::uint64_t seed);

// Correlated features f = A g + mu with g standard normal and A = I plus a
// random C x C mixing term, so the covariance is well conditioned but far
// from identity.
Tensor random_features(int channels, int height, int width, std::uint64_t seed);

}  // namespace capvst
