#include "capvst/channel_refine.hpp"

namespace capvst {

template <typename T>
BasicTensor<T> cr_forward(const BasicTensor<T>& latent, const NetworkWeights& w) {
  const auto& plan = w.plan;
  if (latent.channels() != plan.backbone_channels()) {
    throw ShapeError("cr_forward expects a " + std::to_string(plan.backbone_channels()) +
                     "-channel latent, got " + latent.shape_string());
  }
  BasicTensor<T> x = pad_channels(latent, plan.cr.padded_channels());
  std::size_t b = std::size_t(plan.backbone_blocks());
  for (int k = 0; k < plan.cr.block_count; ++k) x = block_forward(x, w.blocks.at(b++));
  return unsqueeze(x);
}

template <typename T>
BasicTensor<T> cr_backward(const BasicTensor<T>& refined, const NetworkWeights& w) {
  const auto& plan = w.plan;
  if (refined.channels() != plan.cr.target_channels || refined.height() % 2 != 0 ||
      refined.width() % 2 != 0) {
    throw ShapeError("cr_backward expects a " + std::to_string(plan.cr.target_channels) +
                     "-channel latent with even spatial size, got " + refined.shape_string());
  }
  BasicTensor<T> x = squeeze(refined);
  std::size_t b = std::size_t(plan.total_blocks());
  for (int k = 0; k < plan.cr.block_count; ++k) x = block_backward(x, w.blocks.at(--b));
  return crop_channels(x, plan.backbone_channels());
}

template BasicTensor<float> cr_forward(const BasicTensor<float>&, const NetworkWeights&);
template BasicTensor<double> cr_forward(const BasicTensor<double>&, const NetworkWeights&);
template BasicTensor<float> cr_backward(const BasicTensor<float>&, const NetworkWeights&);
template BasicTensor<double> cr_backward(const BasicTensor<double>&, const NetworkWeights&);

}  // namespace capvst
