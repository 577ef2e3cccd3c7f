#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capvst/io.hpp"
#include "capvst/matting.hpp"
#include "capvst/metrics.hpp"
#include "capvst/pipeline.hpp"
#include "capvst/selftest.hpp"

using namespace capvst;

namespace {

struct WeightArgs {
  std::string weights;
  std::string plan;
  std::uint64_t seed = 0;
};

void add_weight_flags(CLI::App* cmd, WeightArgs& w) {
  cmd->add_option("--weights", w.weights, "CAPW weight file");
  cmd->add_option("--plan", w.plan, "architecture plan (JSON) for seeded weights");
  cmd->add_option("--seed", w.seed, "seed for generated weights");
}

NetworkWeights resolve_weights(const WeightArgs& w) {
  StylizeJob job;
  job.weights_path = w.weights;
  job.plan_path = w.plan;
  job.seed = w.seed;
  return weights_for_job(job);
}

std::optional<double> optional_eps(double eps) {
  return eps > 0.0 ? std::optional<double>(eps) : std::nullopt;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capvst: reversible photorealistic style transfer"};
  app.require_subcommand(1);

  // stylize / video share the job flags.
  StylizeJob job;
  WeightArgs wargs;
  double eps = 0.0;
  auto add_job_flags = [&](CLI::App* cmd, bool frames) {
    auto* content = cmd->add_option("--content", job.content_paths,
                                    frames ? "content frames (PPM), in order" : "content image (PPM)");
    content->required();
    cmd->add_option("--style", job.style_path, "style image (PPM)")->required();
    cmd->add_option("--style-b", job.style_b_path, "second style for interpolation");
    cmd->add_option("--alpha", job.alpha, "share of the second style, in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--content-mask", job.content_mask_paths, "content label map(s) (PGM)");
    cmd->add_option("--style-mask", job.style_mask_path, "style label map (PGM)");
    cmd->add_option("--eps", eps, "absolute covariance regularizer (default: trace-relative)");
    cmd->add_option("--out", job.output_paths, "output path(s)")->required();
    cmd->add_option("--threads", job.threads, "worker threads for frames (0 = all cores)");
    add_weight_flags(cmd, wargs);
    if (!frames) {
      content->expected(1);
      cmd->get_option("--out")->expected(1);
    }
  };
  auto* stylize_cmd = app.add_subcommand("stylize", "stylize one image");
  add_job_flags(stylize_cmd, false);
  auto* video_cmd = app.add_subcommand("video", "stylize a frame sequence with one style");
  add_job_flags(video_cmd, true);

  auto* metrics_cmd = app.add_subcommand("metrics", "image and video metrics");
  metrics_cmd->require_subcommand(1);
  std::string path_a, path_b;
  auto* ssim_cmd = metrics_cmd->add_subcommand("ssim", "structural similarity of two images");
  ssim_cmd->add_option("a", path_a)->required();
  ssim_cmd->add_option("b", path_b)->required();

  std::string prev_path, next_path, flow_path, valid_path, heatmap_path;
  auto* temporal_cmd = metrics_cmd->add_subcommand("temporal", "flow-warped temporal error");
  temporal_cmd->add_option("--prev", prev_path, "previous stylized frame")->required();
  temporal_cmd->add_option("--next", next_path, "next stylized frame")->required();
  temporal_cmd->add_option("--flow", flow_path, ".flo from previous to next")->required();
  temporal_cmd->add_option("--valid", valid_path, "valid mask PGM (255 = valid)");
  temporal_cmd->add_option("--heatmap", heatmap_path, "write the error map as PGM");

  std::string cycle_content, cycle_style, cycle_out;
  WeightArgs cycle_weights;
  double cycle_eps = 0.0;
  auto* cycle_cmd = metrics_cmd->add_subcommand(
      "cycle", "L1 between the content and its cycle reconstruction through the style");
  cycle_cmd->add_option("--content", cycle_content)->required();
  cycle_cmd->add_option("--style", cycle_style)->required();
  cycle_cmd->add_option("--eps", cycle_eps);
  cycle_cmd->add_option("--out", cycle_out, "write the reconstruction");
  add_weight_flags(cycle_cmd, cycle_weights);

  std::string lap_image, lap_out;
  int lap_radius = kDefaultWindowRadius;
  double lap_eps = kDefaultMattingEps;
  auto* lap_cmd = app.add_subcommand("laplacian", "dump the matting Laplacian as triplets");
  lap_cmd->add_option("--content", lap_image, "image (PPM)")->required();
  lap_cmd->add_option("--out", lap_out, "triplet file ('-' for stdout)")->required();
  lap_cmd->add_option("--radius", lap_radius);
  lap_cmd->add_option("--eps-matting", lap_eps);

  std::uint64_t selftest_seed = 0;
  auto* selftest_cmd = app.add_subcommand("selftest", "run the built-in invariant checks");
  selftest_cmd->add_option("--seed", selftest_seed);

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "cWCT vs eigendecomposition WCT timing");
  bench_cmd->add_option("--reps", bench.reps);
  bench_cmd->add_option("--side", bench.side, "features are C x side x side");
  bench_cmd->add_option("--seed", bench.seed);

  std::string init_out;
  bool zero_residual = false;
  WeightArgs init_args;
  auto* init_cmd = app.add_subcommand("init-weights", "write seeded untrained weights");
  init_cmd->add_option("--plan", init_args.plan);
  init_cmd->add_option("--seed", init_args.seed);
  init_cmd->add_option("--out", init_out)->required();
  init_cmd->add_flag("--zero-residual", zero_residual, "zero the last conv of every block");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stylize_cmd->parsed() || video_cmd->parsed()) {
      job.weights_path = wargs.weights;
      job.plan_path = wargs.plan;
      job.seed = wargs.seed;
      job.eps = optional_eps(eps);
      const std::size_t stat_runs = run_stylize_job(job);
      print({{"frames", job.content_paths.size()}, {"style_stat_computations", stat_runs}});
    } else if (ssim_cmd->parsed()) {
      print({{"ssim", ssim(read_image(path_a), read_image(path_b))}});
    } else if (temporal_cmd->parsed()) {
      const FlowField flow = read_flow(flow_path, valid_path);
      const TemporalError e = temporal_error(read_image(prev_path), read_image(next_path), flow);
      if (!heatmap_path.empty()) {
        Tensor map = e.heatmap;
        float peak = 0.0f;
        for (float v : map.data()) peak = std::max(peak, v);
        if (peak > 0.0f)
          for (float& v : map.data()) v /= peak;
        write_image(heatmap_path, map);
      }
      print({{"temporal_error", e.mean}, {"valid_pixels", e.valid_pixels}});
    } else if (cycle_cmd->parsed()) {
      const StylizationEngine engine(resolve_weights(cycle_weights));
      const Tensor content = read_image(cycle_content);
      const Tensor rec = engine.cycle_reconstruct(content, read_image(cycle_style),
                                                  optional_eps(cycle_eps));
      if (!cycle_out.empty()) write_image(cycle_out, rec);
      print({{"cycle_loss", cycle_loss(clamp01(rec), content)},
             {"cycle_loss_raw", cycle_loss(rec, content)}});
    } else if (lap_cmd->parsed()) {
      const Tensor image = read_image(lap_image);
      const Tensor bounded = bounded_for_laplacian(image);
      const SparseLaplacian lap = build_laplacian(bounded, lap_radius, lap_eps);
      if (lap_out == "-") {
        write_triplets(std::cout, lap);
      } else {
        std::ofstream out(lap_out);
        if (!out) throw IoError("cannot write " + lap_out);
        write_triplets(out, lap);
        print({{"n", lap.n},
               {"nonzeros", lap.entries.size()},
               {"height", lap.height},
               {"width", lap.width},
               {"downsampled", !bounded.same_shape(image)}});
      }
    } else if (selftest_cmd->parsed()) {
      const auto report = run_selftest(selftest_seed);
      print(report);
      return report.at("passed").get<bool>() ? 0 : 1;
    } else if (bench_cmd->parsed()) {
      const auto report = run_bench(bench);
      print(report);
      return report.at("passed").get<bool>() ? 0 : 1;
    } else if (init_cmd->parsed()) {
      const ArchitecturePlan plan = init_args.plan.empty() ? default_plan() : load_plan(init_args.plan);
      const NetworkWeights w = init_weights(
          plan, RngSeed{init_args.seed}, zero_residual ? InitMode::kZeroResidual : InitMode::kRandom);
      save_weights(init_out, w);
      print({{"parameter_count", w.parameter_count()}, {"blocks", w.blocks.size()}});
    }
  } catch (const std::exception& e) {
    std::cerr << "capvst: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
