#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace capvst {

// Channel refinement: injective padding up to target * spread^2 channels,
// reversible blocks, then a spread of channels into spread x spread patches.
struct ChannelRefinePlan {
  int target_channels = 64;
  int spread_factor = 2;
  int block_count = 2;
  // Diagnostic only: residual branches restricted to 1x1 (center-tap) kernels.
  bool pointwise = false;

  int padded_channels() const { return target_channels * spread_factor * spread_factor; }
};

struct ArchitecturePlan {
  int input_channels = 3;
  int initial_pad_channels = 16;
  std::vector<int> scale_blocks{10, 10, 10};
  int squeeze_factor = 2;
  int convs_per_block = 2;
  ChannelRefinePlan cr;

  // Training loss weights, carried for provenance only.
  double lambda_matting = 1200.0;
  double lambda_cycle = 10.0;

  int scale_count() const { return static_cast<int>(scale_blocks.size()); }
  int scale_channels(int scale) const;
  int backbone_channels() const { return scale_channels(scale_count() - 1); }
  int backbone_blocks() const;
  int total_blocks() const { return backbone_blocks() + cr.block_count; }
  // Input H and W must be multiples of this.
  int spatial_divisor() const;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
};

ArchitecturePlan default_plan();

void to_json(nlohmann::json& j, const ChannelRefinePlan& p);
void from_json(const nlohmann::json& j, ChannelRefinePlan& p);
void to_json(nlohmann::json& j, const ArchitecturePlan& p);
void from_json(const nlohmann::json& j, ArchitecturePlan& p);

ArchitecturePlan load_plan(const std::string& path);

}  // namespace capvst
