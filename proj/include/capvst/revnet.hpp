#pragma once

#include <cstddef>
#include <vector>

#include "capvst/plan.hpp"
#include "capvst/tensor.hpp"

namespace capvst {

// Residual branch F of one reversible block: C/2 -> C/2 -> ... -> C/2 with a
// relu after every conv except the last.
struct BlockWeights {
  std::vector<ConvParams> convs;

  int half_channels() const { return convs.empty() ? 0 : convs.front().in_channels; }
  std::size_t parameter_count() const;
};

// Backbone blocks in scale order, followed by the channel-refine blocks.
struct NetworkWeights {
  ArchitecturePlan plan;
  std::vector<BlockWeights> blocks;

  std::size_t parameter_count() const;
  void validate() const;
};

enum class InitMode { kRandom, kZeroResidual };

// Uniform in [-s, s] with s = sqrt(1 / (in * 9)), zero bias. The stream comes
// from mt19937_64 with an explicit double conversion, so it is identical on
// every platform. kZeroResidual zeroes the final conv of every branch.
NetworkWeights init_weights(const ArchitecturePlan& plan, RngSeed seed, InitMode mode);

template <typename T>
BasicTensor<T> residual_branch(const BasicTensor<T>& x, const BlockWeights& w);

// y1 = x1 + F(x2), y2 = x2, emits (y2, y1).
template <typename T>
BasicTensor<T> block_forward(const BasicTensor<T>& x, const BlockWeights& w);

// Exact inverse of block_forward for the same weights.
template <typename T>
BasicTensor<T> block_backward(const BasicTensor<T>& y, const BlockWeights& w);

// Output channel c*4 + dy*2 + dx holds input (c, 2y+dy, 2x+dx).
template <typename T>
BasicTensor<T> squeeze(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> unsqueeze(const BasicTensor<T>& x);

// Injective padding followed by the multi-scale reversible backbone.
// The result is the backbone latent, before channel refinement.
template <typename T>
BasicTensor<T> forward(const BasicTensor<T>& image, const NetworkWeights& w);

template <typename T>
BasicTensor<T> backward(const BasicTensor<T>& latent, const NetworkWeights& w);

}  // namespace capvst
