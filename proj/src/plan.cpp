#include "capvst/plan.hpp"

#include <fstream>

#include "capvst/error.hpp"

namespace capvst {

int ArchitecturePlan::scale_channels(int scale) const {
  int c = initial_pad_channels;
  for (int s = 0; s < scale; ++s) c *= squeeze_factor * squeeze_factor;
  return c;
}

int ArchitecturePlan::backbone_blocks() const {
  int n = 0;
  for (int b : scale_blocks) n += b;
  return n;
}

int ArchitecturePlan::spatial_divisor() const {
  int d = 1;
  for (int s = 1; s < scale_count(); ++s) d *= squeeze_factor;
  return d * cr.spread_factor;
}

void ArchitecturePlan::validate() const {
  if (input_channels <= 0) throw ConfigError("plan: input_channels must be positive");
  if (initial_pad_channels < input_channels) {
    throw ConfigError("plan: initial_pad_channels must be >= input_channels");
  }
  if (initial_pad_channels % 2 != 0) throw ConfigError("plan: initial_pad_channels must be even");
  if (scale_blocks.empty()) throw ConfigError("plan: at least one scale is required");
  for (int b : scale_blocks) {
    if (b < 0) throw ConfigError("plan: block counts must be non-negative");
  }
  if (squeeze_factor != 2) throw ConfigError("plan: squeeze_factor must be 2");
  if (convs_per_block < 1) throw ConfigError("plan: convs_per_block must be >= 1");
  if (cr.spread_factor != 2) throw ConfigError("plan: cr.spread_factor must be 2");
  if (cr.block_count < 0) throw ConfigError("plan: cr.block_count must be non-negative");
  if (cr.target_channels <= 0) throw ConfigError("plan: cr.target_channels must be positive");
  const int backbone = backbone_channels();
  if (cr.padded_channels() < backbone) {
    throw ConfigError("plan: backbone emits " + std::to_string(backbone) +
                      " channels, more than cr.target_channels * spread^2 = " +
                      std::to_string(cr.padded_channels()));
  }
  if (cr.target_channels >= backbone) {
    throw ConfigError("plan: cr.target_channels must be below the backbone channel count " +
                      std::to_string(backbone));
  }
}

ArchitecturePlan default_plan() { return ArchitecturePlan{}; }

void to_json(nlohmann::json& j, const ChannelRefinePlan& p) {
  j = nlohmann::json{{"target_channels", p.target_channels},
                     {"spread_factor", p.spread_factor},
                     {"block_count", p.block_count},
                     {"pointwise", p.pointwise}};
}

void from_json(const nlohmann::json& j, ChannelRefinePlan& p) {
  ChannelRefinePlan d;
  p.target_channels = j.value("target_channels", d.target_channels);
  p.spread_factor = j.value("spread_factor", d.spread_factor);
  p.block_count = j.value("block_count", d.block_count);
  p.pointwise = j.value("pointwise", d.pointwise);
}

void to_json(nlohmann::json& j, const ArchitecturePlan& p) {
  j = nlohmann::json{{"input_channels", p.input_channels},
                     {"initial_pad_channels", p.initial_pad_channels},
                     {"scale_blocks", p.scale_blocks},
                     {"squeeze_factor", p.squeeze_factor},
                     {"convs_per_block", p.convs_per_block},
                     {"channel_refine", p.cr},
                     {"lambda_matting", p.lambda_matting},
                     {"lambda_cycle", p.lambda_cycle}};
}

void from_json(const nlohmann::json& j, ArchitecturePlan& p) {
  ArchitecturePlan d;
  p.input_channels = j.value("input_channels", d.input_channels);
  p.initial_pad_channels = j.value("initial_pad_channels", d.initial_pad_channels);
  p.scale_blocks = j.value("scale_blocks", d.scale_blocks);
  p.squeeze_factor = j.value("squeeze_factor", d.squeeze_factor);
  p.convs_per_block = j.value("convs_per_block", d.convs_per_block);
  p.cr = j.contains("channel_refine") ? j.at("channel_refine").get<ChannelRefinePlan>() : d.cr;
  p.lambda_matting = j.value("lambda_matting", d.lambda_matting);
  p.lambda_cycle = j.value("lambda_cycle", d.lambda_cycle);
}

ArchitecturePlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan file " + path);
  ArchitecturePlan plan;
  try {
    plan = nlohmann::json::parse(in).get<ArchitecturePlan>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("plan file " + path + ": " + e.what());
  }
  plan.validate();
  return plan;
}

}  // namespace capvst
