#include "capvst/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <utility>

#include "capvst/io.hpp"

namespace capvst {

namespace {

std::string format_pipeline_message(const std::string& stage, const std::string& message,
                                    int frame) {
  std::string prefix = frame >= 0 ? "frame " + std::to_string(frame) + ", " : std::string();
  return prefix + "stage '" + stage + "': " + message;
}

template <typename F>
auto staged(const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

RegionMask to_latent(const RegionMask& mask, const Tensor& image, const Tensor& latent) {
  if (mask.height != image.height() || mask.width != image.width()) {
    throw ShapeError("mask is " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " but image is " + image.shape_string());
  }
  return mask.resized(latent.height(), latent.width());
}

}  // namespace

PipelineError::PipelineError(std::string stage, const std::string& message, int frame)
    : Error(format_pipeline_message(stage, message, frame)), stage_(std::move(stage)),
      detail_(message),
      frame_(frame) {}

StylizationEngine::StylizationEngine(NetworkWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
}

Tensor StylizationEngine::encode(const Tensor& image) const {
  return cr_forward(forward(image, weights_), weights_);
}

Tensor StylizationEngine::decode(const Tensor& latent) const {
  return backward(cr_backward(latent, weights_), weights_);
}

StyleModel StylizationEngine::prepare_style(const Tensor& style_image,
                                            const RegionMask* style_mask,
                                            std::optional<double> eps) const {
  const Tensor f_s = staged("encode-style", [&] { return encode(style_image); });
  return staged("style-stats", [&] {
    std::optional<RegionMask> latent_mask;
    if (style_mask) latent_mask = to_latent(*style_mask, style_image, f_s);
    StyleModel model = build_style_model(f_s, latent_mask ? &*latent_mask : nullptr, eps);
    style_stats_computed_.fetch_add(1);
    return model;
  });
}

Tensor StylizationEngine::transfer_latent(const Tensor& content_latent, const StyleModel& style,
                                          std::optional<double> eps) const {
  return transfer(content_latent, style, nullptr, eps);
}

Tensor StylizationEngine::stylize(const Tensor& content, const StyleModel& style,
                                  const TransferOptions& opts) const {
  const Tensor f_c = staged("encode", [&] { return encode(content); });
  const Tensor f_cs = staged("transfer", [&] {
    if (!opts.content_mask) return transfer(f_c, style, nullptr, opts.eps);
    const RegionMask latent_mask = to_latent(*opts.content_mask, content, f_c);
    return transfer(f_c, style, &latent_mask, opts.eps);
  });
  Tensor out = staged("decode", [&] { return decode(f_cs); });
  if (!out.all_finite()) throw PipelineError("decode", "stylized image has non-finite values");
  return out;
}

Tensor StylizationEngine::stylize(const Tensor& content, const Tensor& style,
                                  const TransferOptions& opts) const {
  return stylize(content, prepare_style(style, nullptr, opts.eps), opts);
}

Tensor StylizationEngine::cycle_reconstruct(const Tensor& content, const Tensor& style,
                                            std::optional<double> eps) const {
  TransferOptions opts;
  opts.eps = eps;
  const Tensor stylized = stylize(content, style, opts);
  return stylize(stylized, content, opts);
}

std::vector<Tensor> StylizationEngine::stylize_video(const std::vector<Tensor>& frames,
                                                     const StyleModel& style,
                                                     const std::vector<RegionMask>& content_masks,
                                                     std::optional<double> eps,
                                                     unsigned threads) const {
  if (frames.empty()) throw PipelineError("video", "no frames given");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames[0])) {
      throw PipelineError("video", "frame shape " + frames[i].shape_string() + " differs from " +
                                       frames[0].shape_string(), int(i));
    }
  }
  if (content_masks.size() > 1 && content_masks.size() != frames.size()) {
    throw PipelineError("video", "need one content mask per frame or a single shared mask");
  }

  std::vector<Tensor> out(frames.size());
  std::vector<std::exception_ptr> failures(frames.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < frames.size(); i = next.fetch_add(1)) {
      try {
        TransferOptions opts;
        opts.eps = eps;
        if (!content_masks.empty()) {
          opts.content_mask = &content_masks[content_masks.size() == 1 ? 0 : i];
        }
        out[i] = stylize(frames[i], style, opts);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(frames.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const PipelineError& e) {
      throw PipelineError(e.stage(), e.detail(), int(i));
    } catch (const std::exception& e) {
      throw PipelineError("video", e.what(), int(i));
    }
  }
  return out;
}

void StylizeJob::validate() const {
  if (content_paths.empty()) throw ConfigError("no content image given");
  if (style_path.empty()) throw ConfigError("no style image given");
  if (output_paths.size() != content_paths.size()) {
    throw ConfigError("need one output path per content image");
  }
  if (!style_b_path.empty() && !(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1]");
  }
  const bool has_content_mask = !content_mask_paths.empty();
  if (has_content_mask != !style_mask_path.empty()) {
    throw ConfigError("content and style masks must be given together");
  }
  if (content_mask_paths.size() > 1 && content_mask_paths.size() != content_paths.size()) {
    throw ConfigError("need one content mask per frame or a single shared mask");
  }
  if (eps && !(*eps > 0.0)) throw ConfigError("eps must be positive");
}

NetworkWeights weights_for_job(const StylizeJob& job) {
  if (!job.weights_path.empty()) return load_weights(job.weights_path);
  const ArchitecturePlan plan = job.plan_path.empty() ? default_plan() : load_plan(job.plan_path);
  return init_weights(plan, RngSeed{job.seed}, InitMode::kRandom);
}

std::size_t run_stylize_job(const StylizeJob& job) {
  staged("config", [&] {
    job.validate();
    return 0;
  });
  const StylizationEngine engine(staged("load", [&] { return weights_for_job(job); }));

  std::vector<Tensor> frames;
  std::vector<RegionMask> content_masks;
  std::optional<RegionMask> style_mask;
  Tensor style_a;
  Tensor style_b;
  staged("load", [&] {
    auto read_rgb = [](const std::string& path) {
      Tensor t = read_image(path);
      if (t.channels() != 3) throw IoError(path + ": expected a color PPM (P6)");
      return t;
    };
    for (const auto& p : job.content_paths) frames.push_back(read_rgb(p));
    for (const auto& p : job.content_mask_paths) content_masks.push_back(read_mask(p));
    if (!job.style_mask_path.empty()) style_mask = read_mask(job.style_mask_path);
    style_a = read_rgb(job.style_path);
    if (!job.style_b_path.empty()) style_b = read_rgb(job.style_b_path);
    return 0;
  });

  const RegionMask* smask = style_mask ? &*style_mask : nullptr;
  StyleModel style = engine.prepare_style(style_a, smask, job.eps);
  if (!job.style_b_path.empty()) {
    const StyleModel b = engine.prepare_style(style_b, smask, job.eps);
    style = staged("interpolate", [&] { return interpolate_models(style, b, job.alpha); });
  }

  const auto outputs = engine.stylize_video(frames, style, content_masks, job.eps, job.threads);
  staged("save", [&] {
    for (std::size_t i = 0; i < outputs.size(); ++i) write_image(job.output_paths[i], outputs[i]);
    return 0;
  });
  return engine.style_stat_count();
}

}  // namespace capvst
