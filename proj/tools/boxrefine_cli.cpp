// boxrefine: command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boxrefine/boxrefine.hpp"

namespace fs = std::filesystem;
using namespace boxrefine;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

/// Flags shared by refine, baseline and sweep; unset flags leave the config alone.
struct Overrides {
  std::string config_file;
  std::optional<std::string> bundle, boxes, out, mode, backend, endpoint;
  std::optional<double> lambda, beta, jitter, mislabel, box_spill;
  std::optional<std::uint64_t> noise_seed, oracle_seed;
  std::optional<int> window, erode, dilate, parallelism;
  std::optional<std::size_t> max_views;
  bool no_noise = false;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_file, "JSON config file");
    app->add_option("--bundle", bundle, "scene bundle directory");
    app->add_option("--boxes", boxes, "boxes JSON to use instead of the manifest boxes");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("--lambda", lambda, "box noise level");
    app->add_option("--noise-seed", noise_seed, "box noise seed");
    app->add_flag("--no-noise", no_noise, "use the boxes as given");
    app->add_option("--mode", mode, "merged | single_combined");
    app->add_option("--beta", beta, "background weight");
    app->add_option("--window", window, "background prompt window, pixels");
    app->add_option("--backend", backend, "oracle | remote");
    app->add_option("--endpoint", endpoint, "remote segmenter URL (default: $SEGMENTER_ENDPOINT)");
    app->add_option("--erode", erode, "oracle erosion radius, pixels");
    app->add_option("--dilate", dilate, "oracle dilation radius, pixels");
    app->add_option("--jitter", jitter, "oracle score jitter");
    app->add_option("--mislabel", mislabel, "oracle mislabel probability");
    app->add_option("--box-spill", box_spill, "oracle score for non-target pixels inside the box");
    app->add_option("--oracle-seed", oracle_seed, "oracle noise seed");
    app->add_option("--max-views", max_views, "cap on selected views per instance");
    app->add_option("-j,--parallelism", parallelism, "worker threads");
  }

  PipelineConfig build() const {
    PipelineConfig cfg = config_file.empty() ? PipelineConfig{} : load_config_file(config_file);
    if (bundle) cfg.bundle = *bundle;
    if (boxes) cfg.boxes_file = fs::path(*boxes);
    if (out) cfg.output_dir = *out;
    if (no_noise) cfg.noise.reset();
    if (lambda || noise_seed) {
      NoiseConfig n = cfg.noise.value_or(NoiseConfig{});
      if (lambda) n.lambda = *lambda;
      if (noise_seed) n.seed = *noise_seed;
      cfg.noise = n;
    }
    if (mode) cfg.segmenter.mode = parse_mode(*mode);
    if (beta) cfg.segmenter.beta = *beta;
    if (window) cfg.segmenter.window = *window;
    if (backend) cfg.segmenter.backend = parse_backend(*backend);
    if (endpoint) cfg.segmenter.endpoint = *endpoint;
    if (erode) cfg.oracle_noise.erode_px = *erode;
    if (dilate) cfg.oracle_noise.dilate_px = *dilate;
    if (jitter) cfg.oracle_noise.jitter = *jitter;
    if (mislabel) cfg.oracle_noise.mislabel = *mislabel;
    if (box_spill) cfg.oracle_noise.box_spill = *box_spill;
    if (oracle_seed) cfg.oracle_noise.seed = *oracle_seed;
    if (max_views) cfg.max_views = *max_views;
    if (parallelism) cfg.parallelism = *parallelism;
    return cfg;
  }
};

void print_metrics(const RunResult& r) {
  if (!r.eval) {
    std::printf("%s: %zu points labelled (no ground truth)\n", r.method.c_str(), r.vote.labels.labels.size());
    return;
  }
  std::printf("%s: wrong_points=%zu wrong_superpoints=%zu mean_iou=%.6g ap=%.6g ap50=%.6g ap25=%.6g\n",
              r.method.c_str(), r.eval->wrong_points, r.eval->wrong_superpoints, r.eval->mean_iou, r.eval->ap,
              r.eval->ap50, r.eval->ap25);
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("'" + tok + "' is not a number");
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refines noisy 3D instance boxes into point-wise instance labels"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic scene bundles with ground truth");
  SynthConfig scfg;
  std::string synth_out;
  int synth_count = 1;
  bool no_occlusion = false, no_rgb = false;
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--seed", scfg.seed, "random seed (first scene of a suite)");
  synth->add_option("--count", synth_count, "number of scenes; > 1 writes scene_NNNN sub-bundles");
  synth->add_option("--objects", scfg.object_count, "objects per scene");
  synth->add_option("--tables", scfg.table_count, "how many objects are tables");
  synth->add_option("--views", scfg.view_count, "camera views per scene");
  synth->add_option("--density", scfg.points_per_m2, "surface samples per square metre");
  synth->add_option("--width", scfg.image_width, "image width");
  synth->add_option("--height", scfg.image_height, "image height");
  synth->add_option("--normal-noise", scfg.normal_noise_deg, "normal noise, degrees");
  synth->add_option("--patch-size", scfg.patch_size, "ship per-face patch superpoints of this size, metres");
  synth->add_option("--contact-gap", scfg.contact_gap, "unsampled support margin around object footprints, metres");
  synth->add_flag("--no-occlusion", no_occlusion, "do not stack objects");
  synth->add_flag("--no-rgb", no_rgb, "skip colour images");

  // superpoints
  auto* spcmd = app.add_subcommand("superpoints", "compute superpoints and store them in the bundle");
  std::string sp_bundle, sp_out;
  SegParams sp_params;
  bool split_gt = false;
  spcmd->add_option("--bundle", sp_bundle, "scene bundle")->required();
  spcmd->add_option("-o,--out", sp_out, "output bundle (default: in place)");
  spcmd->add_option("--knn", sp_params.knn, "graph neighbours per point");
  spcmd->add_option("--k,--threshold-k", sp_params.threshold_k, "merge threshold constant");
  spcmd->add_option("--min-size", sp_params.min_size, "minimum superpoint size");
  spcmd->add_flag("--split-by-gt", split_gt, "split superpoints along ground-truth labels");

  // perturb-boxes
  auto* perturb = app.add_subcommand("perturb-boxes", "write noisy boxes derived from ground truth");
  std::string pb_bundle, pb_out;
  NoiseConfig pb_noise;
  bool pb_no_clamp = false;
  perturb->add_option("--bundle", pb_bundle, "scene bundle with gt labels")->required();
  perturb->add_option("-o,--out", pb_out, "boxes JSON path")->required();
  perturb->add_option("--lambda", pb_noise.lambda, "noise level in [0, 1]");
  perturb->add_option("--seed", pb_noise.seed, "noise seed");
  perturb->add_flag("--no-clamp", pb_no_clamp, "do not grow boxes to cover the tight box");

  // refine / baseline
  auto* refine = app.add_subcommand("refine", "label points from boxes with multi-view prompting");
  Overrides refine_ov;
  refine_ov.add_to(refine);
  auto* baseline = app.add_subcommand("baseline", "label points with the smallest containing box");
  Overrides baseline_ov;
  baseline_ov.add_to(baseline);

  // eval
  auto* evalcmd = app.add_subcommand("eval", "score a label file against a bundle's ground truth");
  std::string ev_bundle, ev_labels, ev_report, ev_out;
  evalcmd->add_option("--bundle", ev_bundle, "scene bundle with gt labels")->required();
  evalcmd->add_option("--pred,--labels", ev_labels, "int32 label file")->required();
  evalcmd->add_option("--report", ev_report, "run report supplying instance ranking scores");
  evalcmd->add_option("-o,--out,--json", ev_out, "write the metrics JSON here");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run refinement and baseline over a parameter grid");
  Overrides sweep_ov;
  sweep_ov.add_to(sweep);
  std::string sw_lambdas, sw_betas, sw_seeds, sw_modes, sw_bundles;
  sweep->add_option("--lambdas", sw_lambdas, "comma-separated noise levels");
  sweep->add_option("--betas", sw_betas, "comma-separated background weights");
  sweep->add_option("--seeds", sw_seeds, "comma-separated box noise seeds");
  sweep->add_option("--modes", sw_modes, "comma-separated prompt modes");
  sweep->add_option("--bundles", sw_bundles, "comma-separated bundles or suite directories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      scfg.occlusion = !no_occlusion;
      scfg.with_rgb = !no_rgb;
      try {
        check_config(scfg);
      } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
      }
      Diagnostics d;
      if (synth_count > 1) {
        const auto dirs = run_stage("synth", d, [&] { return generate_suite(synth_count, scfg, scfg.seed, synth_out); });
        std::printf("wrote %zu bundles under %s\n", dirs.size(), synth_out.c_str());
      } else {
        if (synth_count < 1) throw ConfigError("--count must be >= 1");
        run_stage("synth", d, [&] { save_scene_bundle(generate_scene(scfg), synth_out); });
        std::printf("wrote %s\n", synth_out.c_str());
      }
    } else if (*spcmd) {
      if (!fs::exists(sp_bundle)) throw ConfigError("bundle " + sp_bundle + " does not exist");
      if (sp_params.knn < 1 || sp_params.min_size < 1 || !(sp_params.threshold_k > 0)) {
        throw ConfigError("knn and min-size must be >= 1, threshold-k > 0");
      }
      Diagnostics d;
      Scene scene = run_stage("load", d, [&] { return load_scene_bundle(sp_bundle); });
      run_stage("superpoints", d, [&] {
        auto sp = compute_superpoints(scene, sp_params);
        if (split_gt) {
          if (!scene.has_gt()) throw PreconditionError("--split-by-gt needs gt labels");
          sp = split_by_labels(sp, scene.gt_labels);
        }
        scene.superpoints = std::move(sp);
      });
      const std::string dest = sp_out.empty() ? sp_bundle : sp_out;
      run_stage("write", d, [&] { save_scene_bundle(scene, dest); });
      std::printf("%d superpoints written to %s\n", scene.superpoints->superpoint_count, dest.c_str());
    } else if (*perturb) {
      if (!fs::exists(pb_bundle)) throw ConfigError("bundle " + pb_bundle + " does not exist");
      if (!(pb_noise.lambda >= 0.0 && pb_noise.lambda <= 1.0)) throw ConfigError("--lambda must lie in [0, 1]");
      pb_noise.clamp_to_cover = !pb_no_clamp;
      Diagnostics d;
      const Scene scene = run_stage("load", d, [&] { return load_scene_bundle(pb_bundle); });
      const auto boxes = run_stage("box-noise", d, [&] { return perturb_scene_boxes(scene, pb_noise); });
      run_stage("write", d, [&] { save_boxes_json(pb_out, boxes); });
      std::printf("%zu boxes written to %s\n", boxes.size(), pb_out.c_str());
    } else if (*refine) {
      print_metrics(run_refinement(refine_ov.build()));
    } else if (*baseline) {
      print_metrics(run_baseline(baseline_ov.build()));
    } else if (*evalcmd) {
      if (!fs::exists(ev_bundle)) throw ConfigError("bundle " + ev_bundle + " does not exist");
      if (!fs::exists(ev_labels)) throw ConfigError("labels " + ev_labels + " do not exist");
      Diagnostics d;
      const Scene scene = run_stage("load", d, [&] { return load_scene_bundle(ev_bundle); });
      const auto labels = run_stage("load", d, [&] { return read_i32_array(ev_labels); });
      std::map<InstanceId, double> scores;
      if (!ev_report.empty()) {
        run_stage("load", d, [&] {
          const auto rep = nlohmann::json::parse(io_detail::read_file(ev_report));
          for (const auto& inst : rep.at("instances")) {
            if (!inst.at("score").is_null()) scores[inst.at("instance").get<InstanceId>()] = inst.at("score").get<double>();
          }
        });
      }
      const auto e = run_stage("eval", d, [&] {
        if (!scene.has_gt()) throw PreconditionError("bundle has no gt labels");
        return evaluate(labels, scores, scene.gt_labels, scene.superpoints);
      });
      const std::string text = eval_json(e).dump(2) + "\n";
      if (!ev_out.empty()) run_stage("write", d, [&] { write_text(ev_out, text); });
      std::fputs(text.c_str(), stdout);
    } else if (*sweep) {
      PipelineConfig cfg = sweep_ov.build();
      if (!sw_lambdas.empty()) cfg.sweep.lambdas = parse_doubles(sw_lambdas);
      if (!sw_betas.empty()) cfg.sweep.betas = parse_doubles(sw_betas);
      if (!sw_seeds.empty()) {
        cfg.sweep.seeds.clear();
        for (const auto& s : split_list(sw_seeds)) {
          try {
            cfg.sweep.seeds.push_back(std::stoull(s));
          } catch (const std::exception&) {
            throw ConfigError("seed '" + s + "' is not an unsigned integer");
          }
        }
      }
      if (!sw_modes.empty()) {
        cfg.sweep.modes.clear();
        for (const auto& m : split_list(sw_modes)) cfg.sweep.modes.push_back(parse_mode(m));
      }
      if (!sw_bundles.empty()) {
        const auto list = split_list(sw_bundles);
        cfg.sweep.bundles.assign(list.begin(), list.end());
      }
      if (cfg.output_dir.empty()) throw ConfigError("sweep needs an output directory (--out)");
      const auto res = run_sweep(cfg);
      Diagnostics d;
      run_stage("write", d, [&] { write_sweep_outputs(res, cfg, cfg.output_dir); });
      for (const auto& t : sweep_table(res)) {
        std::printf("%-26s lambda=%-5.3g beta=%-5s wrong_points=%-10.6g ap=%.6g ap50=%.6g ap25=%.6g\n",
                    t.method.c_str(), t.lambda, t.beta ? csv_number(*t.beta).c_str() : "-", t.wrong_points, t.ap,
                    t.ap50, t.ap25);
      }
      if (res.failed > 0) std::fprintf(stderr, "%zu of %zu cells failed\n", res.failed, res.rows.size());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const StageError& e) {
    std::fprintf(stderr, "stage failure: %s\n", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
