#include "capvst/revnet.hpp"

#include <cmath>
#include <random>

namespace capvst {

std::size_t BlockWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : convs) n += c.parameter_count();
  return n;
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.parameter_count();
  return n;
}

namespace {

std::vector<int> block_half_widths(const ArchitecturePlan& plan) {
  std::vector<int> widths;
  for (int s = 0; s < plan.scale_count(); ++s) {
    for (int b = 0; b < plan.scale_blocks[s]; ++b) widths.push_back(plan.scale_channels(s) / 2);
  }
  for (int b = 0; b < plan.cr.block_count; ++b) widths.push_back(plan.cr.padded_channels() / 2);
  return widths;
}

}  // namespace

void NetworkWeights::validate() const {
  plan.validate();
  const auto widths = block_half_widths(plan);
  if (blocks.size() != widths.size()) {
    throw ConfigError("weights hold " + std::to_string(blocks.size()) + " blocks, plan needs " +
                      std::to_string(widths.size()));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& convs = blocks[i].convs;
    if (convs.size() != std::size_t(plan.convs_per_block)) {
      throw ConfigError("block " + std::to_string(i) + " has the wrong number of convs");
    }
    for (const auto& c : convs) {
      c.validate();
      if (c.in_channels != widths[i] || c.out_channels != widths[i]) {
        throw ConfigError("block " + std::to_string(i) + " conv width does not match plan");
      }
    }
  }
}

NetworkWeights init_weights(const ArchitecturePlan& plan, RngSeed seed, InitMode mode) {
  plan.validate();
  std::mt19937_64 rng(seed.value);
  auto uniform = [&rng] { return double(rng() >> 11) * 0x1.0p-53; };

  NetworkWeights net;
  net.plan = plan;
  const auto widths = block_half_widths(plan);
  const std::size_t cr_begin = widths.size() - plan.cr.block_count;
  for (std::size_t b = 0; b < widths.size(); ++b) {
    const int width = widths[b];
    const bool center_only = plan.cr.pointwise && b >= cr_begin;
    BlockWeights block;
    for (int k = 0; k < plan.convs_per_block; ++k) {
      ConvParams conv(width, width);
      const double scale = std::sqrt(1.0 / (double(width) * 9.0));
      for (int o = 0; o < width; ++o) {
        for (int i = 0; i < width; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const double v = scale * (2.0 * uniform() - 1.0);
              const bool keep = !center_only || (ky == 1 && kx == 1);
              conv.at(o, i, ky, kx) = keep ? static_cast<float>(v) : 0.0f;
            }
          }
        }
      }
      if (mode == InitMode::kZeroResidual && k == plan.convs_per_block - 1) {
        std::fill(conv.weight.begin(), conv.weight.end(), 0.0f);
      }
      block.convs.push_back(std::move(conv));
    }
    net.blocks.push_back(std::move(block));
  }
  return net;
}

template <typename T>
BasicTensor<T> residual_branch(const BasicTensor<T>& x, const BlockWeights& w) {
  BasicTensor<T> h = x;
  for (std::size_t k = 0; k < w.convs.size(); ++k) {
    h = conv2d(h, w.convs[k]);
    if (k + 1 < w.convs.size()) relu_inplace(h);
  }
  return h;
}

namespace {

void require_even(int channels, const char* op) {
  if (channels % 2 != 0) {
    throw ShapeError(std::string(op) + " needs an even channel count, got " +
                     std::to_string(channels));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> block_forward(const BasicTensor<T>& x, const BlockWeights& w) {
  require_even(x.channels(), "block_forward");
  const int half = x.channels() / 2;
  BasicTensor<T> x2 = slice_channels(x, half, half);
  BasicTensor<T> y1 = slice_channels(x, 0, half);
  const BasicTensor<T> f = residual_branch(x2, w);
  auto dst = y1.data();
  auto src = f.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return concat_channels(x2, y1);
}

template <typename T>
BasicTensor<T> block_backward(const BasicTensor<T>& y, const BlockWeights& w) {
  require_even(y.channels(), "block_backward");
  const int half = y.channels() / 2;
  BasicTensor<T> x2 = slice_channels(y, 0, half);
  BasicTensor<T> x1 = slice_channels(y, half, half);
  const BasicTensor<T> f = residual_branch(x2, w);
  auto dst = x1.data();
  auto src = f.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return concat_channels(x1, x2);
}

template <typename T>
BasicTensor<T> squeeze(const BasicTensor<T>& x) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw ShapeError("squeeze needs even height and width, got " + x.shape_string());
  }
  const int h = x.height() / 2;
  const int w = x.width() / 2;
  BasicTensor<T> out(x.channels() * 4, h, w);
  for (int c = 0; c < x.channels(); ++c)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int oc = c * 4 + dy * 2 + dx;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) out(oc, y, xx) = x(c, 2 * y + dy, 2 * xx + dx);
      }
  return out;
}

template <typename T>
BasicTensor<T> unsqueeze(const BasicTensor<T>& x) {
  if (x.channels() % 4 != 0) {
    throw ShapeError("unsqueeze needs channels divisible by 4, got " + x.shape_string());
  }
  const int h = x.height();
  const int w = x.width();
  BasicTensor<T> out(x.channels() / 4, h * 2, w * 2);
  for (int c = 0; c < out.channels(); ++c)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int ic = c * 4 + dy * 2 + dx;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) out(c, 2 * y + dy, 2 * xx + dx) = x(ic, y, xx);
      }
  return out;
}

template <typename T>
BasicTensor<T> forward(const BasicTensor<T>& image, const NetworkWeights& w) {
  const auto& plan = w.plan;
  if (image.channels() != plan.input_channels) {
    throw ShapeError("forward expects " + std::to_string(plan.input_channels) +
                     " image channels, got " + std::to_string(image.channels()));
  }
  const int div = plan.spatial_divisor();
  if (image.height() % div != 0 || image.width() % div != 0 || image.empty()) {
    throw ShapeError("forward needs height and width divisible by " + std::to_string(div) +
                     ", got " + image.shape_string());
  }
  if (w.blocks.size() != std::size_t(plan.total_blocks())) {
    throw ConfigError("weights do not match plan block count");
  }
  BasicTensor<T> x = pad_channels(image, plan.initial_pad_channels);
  std::size_t b = 0;
  for (int s = 0; s < plan.scale_count(); ++s) {
    if (s > 0) x = squeeze(x);
    for (int k = 0; k < plan.scale_blocks[s]; ++k) x = block_forward(x, w.blocks[b++]);
  }
  return x;
}

template <typename T>
BasicTensor<T> backward(const BasicTensor<T>& latent, const NetworkWeights& w) {
  const auto& plan = w.plan;
  if (latent.channels() != plan.backbone_channels()) {
    throw ShapeError("backward expects a " + std::to_string(plan.backbone_channels()) +
                     "-channel latent, got " + latent.shape_string());
  }
  if (w.blocks.size() != std::size_t(plan.total_blocks())) {
    throw ConfigError("weights do not match plan block count");
  }
  BasicTensor<T> x = latent;
  std::size_t b = std::size_t(plan.backbone_blocks());
  for (int s = plan.scale_count() - 1; s >= 0; --s) {
    for (int k = 0; k < plan.scale_blocks[s]; ++k) x = block_backward(x, w.blocks[--b]);
    if (s > 0) x = unsqueeze(x);
  }
  return crop_channels(x, plan.input_channels);
}

#define CAPVST_INSTANTIATE(T)                                                       \
  template BasicTensor<T> residual_branch(const BasicTensor<T>&, const BlockWeights&); \
  template BasicTensor<T> block_forward(const BasicTensor<T>&, const BlockWeights&);   \
  template BasicTensor<T> block_backward(const BasicTensor<T>&, const BlockWeights&);  \
  template BasicTensor<T> squeeze(const BasicTensor<T>&);                              \
  template BasicTensor<T> unsqueeze(const BasicTensor<T>&);                            \
  template BasicTensor<T> forward(const BasicTensor<T>&, const NetworkWeights&);       \
  template BasicTensor<T> backward(const BasicTensor<T>&, const NetworkWeights&);

CAPVST_INSTANTIATE(float)
CAPVST_INSTANTIATE(double)

#undef CAPVST_INSTANTIATE

}  // namespace capvst
