#pragma once

#include "capvst/revnet.hpp"

namespace capvst {

// Pads the backbone latent to target * spread^2 channels, runs the
// channel-refine reversible blocks, then spreads channels into 2x2 patches.
// With the default plan: 256 x h x w -> 64 x 2h x 2w.
template <typename T>
BasicTensor<T> cr_forward(const BasicTensor<T>& latent, const NetworkWeights& w);

// Squeeze, inverse blocks, crop back to the backbone channel count.
template <typename T>
BasicTensor<T> cr_backward(const BasicTensor<T>& refined, const NetworkWeights& w);

}  // namespace capvst
