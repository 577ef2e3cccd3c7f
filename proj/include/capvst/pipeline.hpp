#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "capvst/channel_refine.hpp"
#include "capvst/cwct.hpp"
#include "capvst/revnet.hpp"

namespace capvst {

// Failure inside the pipeline, tagged with the stage that raised it
// ("load", "encode", "style-stats", "transfer", "decode", "save", ...).
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message, int frame = -1);

  const std::string& stage() const { return stage_; }
  // Index of the failing video frame, or -1.
  int frame() const { return frame_; }
  // The message without the stage/frame prefix.
  const std::string& detail() const { return detail_; }

 private:
  std::string stage_;
  std::string detail_;
  int frame_ = -1;
};

struct TransferOptions {
  std::optional<double> eps;
  // Image-resolution label map; resampled to latent resolution internally.
  const RegionMask* content_mask = nullptr;
};

// Shared, immutable weights plus the encode/transfer/decode chain. All const
// members are safe to call from several threads at once.
class StylizationEngine {
 public:
  explicit StylizationEngine(NetworkWeights weights);

  const NetworkWeights& weights() const { return weights_; }

  // forward + channel refinement.
  Tensor encode(const Tensor& image) const;
  // Inverse of encode; raw values, no clamping.
  Tensor decode(const Tensor& latent) const;

  // Latent statistics of a style image, optionally per region of its
  // image-resolution mask. Each call bumps style_stat_count().
  StyleModel prepare_style(const Tensor& style_image, const RegionMask* style_mask,
                           std::optional<double> eps) const;
  std::size_t style_stat_count() const { return style_stats_computed_.load(); }

  // Unmasked transfer of an already encoded content latent.
  Tensor transfer_latent(const Tensor& content_latent, const StyleModel& style,
                         std::optional<double> eps) const;

  // Unclamped stylized image.
  Tensor stylize(const Tensor& content, const StyleModel& style,
                 const TransferOptions& opts = {}) const;
  Tensor stylize(const Tensor& content, const Tensor& style,
                 const TransferOptions& opts = {}) const;

  // stylize(stylize(content, style), content).
  Tensor cycle_reconstruct(const Tensor& content, const Tensor& style,
                           std::optional<double> eps = std::nullopt) const;

  // Frames share one style model. content_masks is empty, holds one mask for
  // every frame, or one mask per frame. threads = 0 picks the hardware count.
  std::vector<Tensor> stylize_video(const std::vector<Tensor>& frames, const StyleModel& style,
                                    const std::vector<RegionMask>& content_masks,
                                    std::optional<double> eps, unsigned threads = 0) const;

 private:
  NetworkWeights weights_;
  mutable std::atomic<std::size_t> style_stats_computed_{0};
};

// Everything a file-driven run needs. Either weights_path, or plan_path
// (optional, default plan otherwise) plus seed.
struct StylizeJob {
  std::vector<std::string> content_paths;
  std::string style_path;
  std::string style_b_path;
  double alpha = 0.0;
  std::vector<std::string> content_mask_paths;
  std::string style_mask_path;
  std::string weights_path;
  std::string plan_path;
  std::uint64_t seed = 0;
  std::optional<double> eps;
  std::vector<std::string> output_paths;
  unsigned threads = 0;

  void validate() const;
};

NetworkWeights weights_for_job(const StylizeJob& job);

// Stylizes every content path (a one-element list is an image, longer lists
// are video frames) and writes the clamped outputs. Returns the number of
// style-statistics computations performed.
std::size_t run_stylize_job(const StylizeJob& job);

}  // namespace capvst
