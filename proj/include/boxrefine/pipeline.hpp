#pragma once

// End-to-end orchestration: load, superpoints, box noise, candidates, view
// cover, prompting, confidence vote, evaluation. Also the smallest-box
// baseline and the (bundle x mode x lambda x beta x seed) sweep.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "boxrefine/box_noise.hpp"
#include "boxrefine/bundle_io.hpp"
#include "boxrefine/candidates.hpp"
#include "boxrefine/confidence.hpp"
#include "boxrefine/error.hpp"
#include "boxrefine/eval.hpp"
#include "boxrefine/oracle_segmenter.hpp"
#include "boxrefine/parallel.hpp"
#include "boxrefine/pipeline_config.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/remote_segmenter.hpp"
#include "boxrefine/scene.hpp"
#include "boxrefine/superpoints.hpp"
#include "boxrefine/view_select.hpp"

namespace boxrefine {

using ojson = nlohmann::ordered_json;

/// Rounds to 6 significant digits so serialized reports are byte-stable.
inline double round6(double v) {
  if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct Diagnostics {
  std::vector<StageTiming> timings;
  std::size_t segment_calls = 0;
};

/// Runs `fn`, records its wall time, and tags any failure with the stage name.
template <typename Fn>
auto run_stage(const char* name, Diagnostics& diag, Fn&& fn) -> decltype(fn()) {
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&] {
    diag.timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto out = fn();
      record();
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline std::unique_ptr<Segmenter> make_segmenter(const PipelineConfig& cfg, const Scene& scene) {
  if (cfg.segmenter.backend == BackendKind::Remote) {
    const std::string endpoint = resolve_endpoint(cfg.segmenter);
    if (endpoint.empty()) throw ConfigError("remote backend selected but no endpoint (set SEGMENTER_ENDPOINT)");
    RemoteOptions opts;
    opts.pool_size = cfg.parallelism;
    return std::make_unique<RemoteSegmenter>(endpoint, opts);
  }
  return std::make_unique<OracleSegmenter>(scene, cfg.oracle_noise, cfg.oracle_footprint);
}

/// Loads the bundle and makes sure it carries superpoints.
inline Scene load_prepared_scene(const PipelineConfig& cfg, Diagnostics& diag) {
  Scene scene = run_stage("load", diag, [&] { return load_scene_bundle(cfg.bundle); });
  if (!scene.superpoints) {
    run_stage("superpoints", diag, [&] { scene.superpoints = compute_superpoints(scene, cfg.seg_params); });
  }
  return scene;
}

inline std::vector<InstanceBox> resolve_boxes(const PipelineConfig& cfg, const Scene& scene, Diagnostics& diag) {
  return run_stage("box-noise", diag, [&] {
    if (cfg.boxes_file) return load_boxes_json(*cfg.boxes_file);
    if (cfg.noise) return perturb_scene_boxes(scene, *cfg.noise);
    return scene.boxes;
  });
}

struct RunResult {
  std::string method;  // "refined" or "baseline"
  std::vector<InstanceBox> boxes;
  CandidateMap candidates;
  std::optional<ViewCover> cover;
  std::optional<ConfidenceTable> confidence;
  VoteResult vote;
  std::optional<EvalReport> eval;
  Diagnostics diag;
};

/// Refinement on an already prepared scene (superpoints present).
inline RunResult refine_scene(const Scene& scene, const PipelineConfig& cfg, Diagnostics diag = {}) {
  RunResult r;
  r.method = "refined";
  r.boxes = resolve_boxes(cfg, scene, diag);
  r.candidates = run_stage("candidate-init", diag, [&] { return build_candidate_map(scene, r.boxes); });
  r.cover = run_stage("view-select", diag, [&] {
    return build_view_cover(r.candidates, scene, cfg.visibility, cfg.max_views);
  });

  std::vector<std::vector<ScoreMask>> masks(r.candidates.instances.size());
  run_stage("prompting", diag, [&] {
    auto segmenter = make_segmenter(cfg, scene);
    struct Job {
      std::size_t inst, slot;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < r.cover->instances.size(); ++i) {
      masks[i].resize(r.cover->instances[i].views.size());
      for (std::size_t m = 0; m < masks[i].size(); ++m) jobs.push_back({i, m});
    }
    std::map<std::int32_t, const CameraView*> view_by_id;
    for (const auto& v : scene.views) view_by_id[v.id] = &v;
    std::atomic<std::size_t> calls{0};
    const int threads = segmenter->thread_safe() ? cfg.parallelism : 1;
    parallel_for(jobs.size(), threads, [&](std::size_t j) {
      const auto& iv = r.cover->instances[jobs[j].inst];
      const std::int32_t vid = iv.views[jobs[j].slot];
      const std::size_t vidx = r.cover->cache.view_index(vid);
      std::vector<Pixel> pixels;
      pixels.reserve(iv.visible[jobs[j].slot].size());
      for (auto p : iv.visible[jobs[j].slot]) {
        const auto& pr = r.cover->cache.projection(p, vidx);
        pixels.push_back({pr.x, pr.y});
      }
      const CameraView& view = *view_by_id.at(vid);
      masks[jobs[j].inst][jobs[j].slot] = instance_view_mask(*segmenter, view, pixels, cfg.segmenter);
      calls += cfg.segmenter.mode == PromptMode::SingleCombined
                   ? 1
                   : 1 + background_window_prompts(pixels, view.width, view.height, cfg.segmenter.window).size();
    });
    diag.segment_calls = calls;
  });

  r.vote = run_stage("confidence-vote", diag, [&] {
    r.confidence = compute_confidence(scene, r.candidates, *r.cover, masks);
    return assign_labels(scene, *r.confidence, r.boxes);
  });
  if (scene.has_gt()) {
    r.eval = run_stage("eval", diag, [&] {
      return evaluate(r.vote.labels.labels, r.vote.instance_scores, scene.gt_labels, scene.superpoints);
    });
  }
  r.diag = std::move(diag);
  return r;
}

inline RunResult baseline_scene(const Scene& scene, const PipelineConfig& cfg, Diagnostics diag = {}) {
  RunResult r;
  r.method = "baseline";
  r.boxes = resolve_boxes(cfg, scene, diag);
  r.candidates = run_stage("candidate-init", diag, [&] { return build_candidate_map(scene, r.boxes); });
  r.vote = run_stage("baseline-assign", diag, [&] {
    return baseline_assign(scene.points.size(), r.candidates, r.boxes);
  });
  if (scene.has_gt()) {
    r.eval = run_stage("eval", diag, [&] {
      return evaluate(r.vote.labels.labels, r.vote.instance_scores, scene.gt_labels, scene.superpoints);
    });
  }
  r.diag = std::move(diag);
  return r;
}

// ---------------------------------------------------------------------------
// Reports

inline ojson eval_json(const EvalReport& e) {
  ojson j;
  j["wrong_points"] = e.wrong_points;
  j["wrong_superpoints"] = e.wrong_superpoints;
  j["point_count"] = e.point_count;
  j["superpoint_count"] = e.superpoint_count;
  j["mean_iou"] = round6(e.mean_iou);
  j["ap"] = round6(e.ap);
  j["ap50"] = round6(e.ap50);
  j["ap25"] = round6(e.ap25);
  ojson iou = ojson::object();
  for (const auto& [id, v] : e.per_instance_iou) iou[std::to_string(id)] = round6(v);
  j["per_instance_iou"] = iou;
  return j;
}

inline ojson config_json(const PipelineConfig& cfg) {
  ojson j;
  j["bundle"] = cfg.bundle.string();
  j["boxes"] = cfg.boxes_file ? ojson(cfg.boxes_file->string()) : ojson(nullptr);
  if (cfg.noise) {
    j["noise"] = {{"lambda", round6(cfg.noise->lambda)},
                  {"seed", cfg.noise->seed},
                  {"clamp_to_cover", cfg.noise->clamp_to_cover}};
  } else {
    j["noise"] = nullptr;
  }
  j["segmenter"] = {{"mode", to_string(cfg.segmenter.mode)},
                    {"beta", round6(cfg.segmenter.beta)},
                    {"window", cfg.segmenter.window},
                    {"backend", cfg.segmenter.backend == BackendKind::Oracle ? "oracle" : "remote"}};
  const auto& o = cfg.oracle_noise;
  j["oracle_noise"] = {{"erode_px", o.erode_px},        {"dilate_px", o.dilate_px},
                       {"jitter", round6(o.jitter)},    {"mislabel", round6(o.mislabel)},
                       {"box_spill", round6(o.box_spill)}, {"seed", o.seed}};
  j["seg_params"] = {{"knn", cfg.seg_params.knn},
                     {"threshold_k", round6(cfg.seg_params.threshold_k)},
                     {"min_size", cfg.seg_params.min_size}};
  j["visibility"] = {{"abs_m", round6(cfg.visibility.abs_m)}, {"rel", round6(cfg.visibility.rel)}};
  j["max_views"] = cfg.max_views ? ojson(*cfg.max_views) : ojson(nullptr);
  return j;
}

/// Bin edges for the superpoint confidence histograms in the run report.
/// Confidences lie in [-beta, 1]; values outside [-1, 1] land in the end bins.
inline std::vector<double> confidence_histogram_edges() {
  std::vector<double> edges;
  for (int k = -5; k <= 5; ++k) edges.push_back(k / 5.0);
  return edges;
}

inline ojson confidence_histogram(const std::vector<Confidence>& conf) {
  const auto edges = confidence_histogram_edges();
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  std::size_t unobserved = 0;
  for (const auto& c : conf) {
    if (!c) {
      ++unobserved;
      continue;
    }
    const auto b = std::upper_bound(edges.begin(), edges.end(), *c) - edges.begin() - 1;
    counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1))]++;
  }
  ojson h;
  h["unobserved"] = unobserved;
  h["counts"] = counts;
  return h;
}

/// Deterministic run report: no timings, fixed key order, 6 significant digits.
inline ojson run_report(const RunResult& r, const PipelineConfig& cfg) {
  ojson j;
  j["method"] = r.method;
  j["config"] = config_json(cfg);
  std::map<InstanceId, std::size_t> labelled_per_instance;
  for (auto l : r.vote.labels.labels) {
    if (l != kBackground) labelled_per_instance[l]++;
  }
  ojson inst = ojson::array();
  for (std::size_t i = 0; i < r.candidates.instances.size(); ++i) {
    const auto& c = r.candidates.instances[i];
    ojson e;
    e["instance"] = c.instance;
    e["candidate_points"] = c.points.size();
    e["candidate_superpoints"] = c.superpoints.size();
    if (r.cover) {
      const auto& iv = r.cover->instances[i];
      e["views"] = iv.views;
      e["gains"] = iv.gains;
      e["uncovered_points"] = iv.uncovered.size();
    }
    const auto lit = labelled_per_instance.find(c.instance);
    e["labelled_points"] = lit == labelled_per_instance.end() ? 0 : lit->second;
    const auto it = r.vote.instance_scores.find(c.instance);
    e["score"] = it == r.vote.instance_scores.end() ? ojson(nullptr) : ojson(round6(it->second));
    if (r.confidence) e["superpoint_confidence_histogram"] = confidence_histogram(r.confidence->instances[i].sp_conf);
    inst.push_back(e);
  }
  j["instances"] = inst;
  if (r.confidence) {
    ojson edges = ojson::array();
    for (double x : confidence_histogram_edges()) edges.push_back(round6(x));
    j["confidence_histogram_edges"] = edges;
  }
  std::size_t labelled = 0;
  for (auto l : r.vote.labels.labels) labelled += l != kBackground ? 1 : 0;
  j["labelled_points"] = labelled;
  j["fallback_superpoints"] = r.vote.fallback_superpoints;
  j["metrics"] = r.eval ? eval_json(*r.eval) : ojson(nullptr);
  return j;
}

inline ojson diagnostics_json(const RunResult& r) {
  ojson j;
  ojson t = ojson::array();
  double total = 0.0;
  for (const auto& s : r.diag.timings) {
    t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    total += s.seconds;
  }
  j["timings"] = t;
  j["total_seconds"] = total;
  j["segment_calls"] = r.diag.segment_calls;
  std::size_t uncovered = 0;
  if (r.cover) {
    for (const auto& iv : r.cover->instances) uncovered += iv.uncovered.size();
  }
  j["uncovered_points"] = uncovered;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  io_detail::write_file(path, text.data(), text.size());
}

/// labels.i32, boxes.json, report.json and diagnostics.json under `dir`.
inline void write_run_outputs(const RunResult& r, const PipelineConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_i32_array(dir / "labels.i32", r.vote.labels.labels);
  save_boxes_json(dir / "boxes.json", r.boxes);
  write_text(dir / "report.json", run_report(r, cfg).dump(2) + "\n");
  write_text(dir / "diagnostics.json", diagnostics_json(r).dump(2) + "\n");
}

inline RunResult run_refinement(const PipelineConfig& cfg) {
  validate_config(cfg);
  Diagnostics diag;
  const Scene scene = load_prepared_scene(cfg, diag);
  RunResult r = refine_scene(scene, cfg, std::move(diag));
  if (!cfg.output_dir.empty()) run_stage("write", r.diag, [&] { write_run_outputs(r, cfg, cfg.output_dir); });
  return r;
}

inline RunResult run_baseline(const PipelineConfig& cfg) {
  validate_config(cfg);
  Diagnostics diag;
  const Scene scene = load_prepared_scene(cfg, diag);
  RunResult r = baseline_scene(scene, cfg, std::move(diag));
  if (!cfg.output_dir.empty()) run_stage("write", r.diag, [&] { write_run_outputs(r, cfg, cfg.output_dir); });
  return r;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRow {
  std::string bundle;
  PromptMode mode = PromptMode::Merged;
  double lambda = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::optional<EvalReport> refined;
  std::optional<EvalReport> baseline;
  std::string error;  // empty when the cell succeeded
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t failed = 0;
};

/// A directory without a manifest but with scene sub-bundles expands to them, sorted.
inline std::vector<std::filesystem::path> expand_bundles(const std::vector<std::filesystem::path>& in) {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  for (const auto& p : in) {
    if (fs::is_directory(p) && !fs::exists(p / "manifest.json")) {
      std::vector<fs::path> subs;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) subs.push_back(e.path());
      }
      std::sort(subs.begin(), subs.end());
      out.insert(out.end(), subs.begin(), subs.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

inline SweepResult run_sweep(const PipelineConfig& cfg) {
  const auto& g = cfg.sweep;
  if (g.lambdas.empty()) throw ConfigError("sweep: lambda list is empty");
  const std::vector<double> betas = g.betas.empty() ? std::vector<double>{cfg.segmenter.beta} : g.betas;
  const std::vector<std::uint64_t> seeds =
      g.seeds.empty() ? std::vector<std::uint64_t>{cfg.noise ? cfg.noise->seed : 0} : g.seeds;
  const std::vector<PromptMode> modes = g.modes.empty() ? std::vector<PromptMode>{cfg.segmenter.mode} : g.modes;
  const auto bundles = expand_bundles(g.bundles.empty() ? std::vector<std::filesystem::path>{cfg.bundle} : g.bundles);
  if (bundles.empty()) throw ConfigError("sweep: no bundles found");
  {
    PipelineConfig check = cfg;
    check.bundle = bundles.front();
    validate_config(check);
  }
  if (cfg.segmenter.backend == BackendKind::Remote && resolve_endpoint(cfg.segmenter).empty()) {
    throw ConfigError("remote backend selected but no endpoint (set SEGMENTER_ENDPOINT)");
  }

  SweepResult res;
  for (const auto& bundle : bundles) {
    PipelineConfig base = cfg;
    base.bundle = bundle;
    base.output_dir.clear();
    base.boxes_file.reset();
    const std::size_t first = res.rows.size();
    for (auto mode : modes) {
      for (double lambda : g.lambdas) {
        for (double beta : betas) {
          for (auto seed : seeds) {
            SweepRow row;
            row.bundle = bundle.string();
            row.mode = mode;
            row.lambda = lambda;
            row.beta = beta;
            row.seed = seed;
            res.rows.push_back(row);
          }
        }
      }
    }
    auto cell_config = [&](const SweepRow& row) {
      PipelineConfig c = base;
      c.noise = NoiseConfig{row.lambda, row.seed, cfg.noise ? cfg.noise->clamp_to_cover : true};
      c.segmenter.mode = row.mode;
      c.segmenter.beta = row.beta;
      c.parallelism = 1;
      return c;
    };

    Scene scene;
    try {
      Diagnostics d;
      scene = load_prepared_scene(base, d);
    } catch (const std::exception& e) {
      for (std::size_t i = first; i < res.rows.size(); ++i) res.rows[i].error = e.what();
      continue;
    }

    // Baseline depends only on (lambda, seed).
    std::map<std::pair<double, std::uint64_t>, std::size_t> base_index;
    std::vector<std::pair<double, std::uint64_t>> base_keys;
    for (std::size_t i = first; i < res.rows.size(); ++i) {
      const auto key = std::make_pair(res.rows[i].lambda, res.rows[i].seed);
      if (base_index.emplace(key, base_keys.size()).second) base_keys.push_back(key);
    }
    std::vector<std::optional<EvalReport>> base_eval(base_keys.size());
    std::vector<std::string> base_err(base_keys.size());
    parallel_for(base_keys.size(), cfg.parallelism, [&](std::size_t k) {
      SweepRow probe;
      probe.lambda = base_keys[k].first;
      probe.seed = base_keys[k].second;
      probe.mode = modes.front();
      probe.beta = betas.front();
      try {
        base_eval[k] = baseline_scene(scene, cell_config(probe)).eval;
      } catch (const std::exception& e) {
        base_err[k] = e.what();
      }
    });

    parallel_for(res.rows.size() - first, cfg.parallelism, [&](std::size_t k) {
      SweepRow& row = res.rows[first + k];
      const std::size_t b = base_index.at({row.lambda, row.seed});
      row.baseline = base_eval[b];
      try {
        row.refined = refine_scene(scene, cell_config(row)).eval;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (row.error.empty() && !base_err[b].empty()) row.error = "baseline: " + base_err[b];
    });
  }
  for (const auto& r : res.rows) res.failed += r.error.empty() ? 0 : 1;
  return res;
}

inline ojson sweep_row_json(const SweepRow& r) {
  ojson j;
  j["bundle"] = r.bundle;
  j["mode"] = to_string(r.mode);
  j["lambda"] = round6(r.lambda);
  j["beta"] = round6(r.beta);
  j["seed"] = r.seed;
  j["status"] = r.error.empty() ? "ok" : "error";
  if (!r.error.empty()) j["error"] = r.error;
  j["refined"] = r.refined ? eval_json(*r.refined) : ojson(nullptr);
  j["baseline"] = r.baseline ? eval_json(*r.baseline) : ojson(nullptr);
  return j;
}

struct TableLine {
  std::string method;
  double lambda = 0.0;
  std::optional<double> beta;
  std::size_t cells = 0;
  double wrong_points = 0, wrong_superpoints = 0, ap = 0, ap50 = 0, ap25 = 0;
};

/// Suite means per (method, lambda[, beta]) over successful cells: the
/// method x lambda x metric layout of the results tables.
inline std::vector<TableLine> sweep_table(const SweepResult& s) {
  std::map<std::tuple<int, std::string, double, double>, TableLine> acc;
  auto add = [&](int order, const std::string& method, double lambda, std::optional<double> beta,
                 const EvalReport& e) {
    auto& t = acc[{order, method, lambda, beta.value_or(-1.0)}];
    t.method = method;
    t.lambda = lambda;
    t.beta = beta;
    ++t.cells;
    t.wrong_points += static_cast<double>(e.wrong_points);
    t.wrong_superpoints += static_cast<double>(e.wrong_superpoints);
    t.ap += e.ap;
    t.ap50 += e.ap50;
    t.ap25 += e.ap25;
  };
  std::set<std::tuple<std::string, double, std::uint64_t>> baseline_seen;
  for (const auto& r : s.rows) {
    if (!r.error.empty()) continue;
    if (r.baseline && baseline_seen.insert({r.bundle, r.lambda, r.seed}).second) {
      add(0, "baseline", r.lambda, std::nullopt, *r.baseline);
    }
    if (r.refined) add(1, std::string("refined/") + to_string(r.mode), r.lambda, r.beta, *r.refined);
  }
  std::vector<TableLine> out;
  for (auto& [k, t] : acc) {
    const double n = static_cast<double>(t.cells);
    t.wrong_points /= n;
    t.wrong_superpoints /= n;
    t.ap /= n;
    t.ap50 /= n;
    t.ap25 /= n;
    out.push_back(t);
  }
  return out;
}

inline ojson sweep_report(const SweepResult& s, const PipelineConfig& cfg) {
  ojson j;
  j["config"] = config_json(cfg);
  ojson rows = ojson::array();
  for (const auto& r : s.rows) rows.push_back(sweep_row_json(r));
  j["rows"] = rows;
  ojson table = ojson::array();
  for (const auto& t : sweep_table(s)) {
    ojson e;
    e["method"] = t.method;
    e["lambda"] = round6(t.lambda);
    e["beta"] = t.beta ? ojson(round6(*t.beta)) : ojson(nullptr);
    e["cells"] = t.cells;
    e["wrong_points"] = round6(t.wrong_points);
    e["wrong_superpoints"] = round6(t.wrong_superpoints);
    e["ap"] = round6(t.ap);
    e["ap50"] = round6(t.ap50);
    e["ap25"] = round6(t.ap25);
    table.push_back(e);
  }
  j["table"] = table;
  j["failed_cells"] = s.failed;
  return j;
}

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string sweep_csv(const SweepResult& s) {
  std::string out =
      "bundle,mode,lambda,beta,seed,status,refined_wrong_points,refined_wrong_superpoints,refined_ap,refined_ap50,"
      "refined_ap25,baseline_wrong_points,baseline_wrong_superpoints,baseline_ap,baseline_ap50,baseline_ap25\n";
  auto metrics = [](const std::optional<EvalReport>& e) {
    if (!e) return std::string(",,,,");
    return std::to_string(e->wrong_points) + "," + std::to_string(e->wrong_superpoints) + "," + csv_number(e->ap) +
           "," + csv_number(e->ap50) + "," + csv_number(e->ap25);
  };
  for (const auto& r : s.rows) {
    std::string bundle = r.bundle;
    if (bundle.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : bundle) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      bundle = q + "\"";
    }
    out += bundle + "," + to_string(r.mode) + "," + csv_number(r.lambda) + "," + csv_number(r.beta) + "," +
           std::to_string(r.seed) + "," + (r.error.empty() ? "ok" : "error") + "," + metrics(r.refined) + "," +
           metrics(r.baseline) + "\n";
  }
  return out;
}

/// sweep.json and sweep.csv under `dir`.
inline void write_sweep_outputs(const SweepResult& s, const PipelineConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "sweep.json", sweep_report(s, cfg).dump(2) + "\n");
  write_text(dir / "sweep.csv", sweep_csv(s));
}

}  // namespace boxrefine
