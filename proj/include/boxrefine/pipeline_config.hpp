#pragma once

// Pipeline configuration and its JSON form.
//
// {
//   "bundle": "scene_dir",
//   "boxes": "boxes.json",                       optional, overrides manifest boxes
//   "noise": {"lambda": 0.3, "seed": 0, "clamp_to_cover": true},   null: use boxes as given
//   "segmenter": {"mode": "merged", "beta": 0.5, "window": 32,
//                 "backend": "oracle", "endpoint": ""},
//   "oracle_noise": {"erode_px": 0, "dilate_px": 0, "jitter": 0, "mislabel": 0,
//                    "box_spill": 0, "seed": 0},
//   "oracle_footprint": 3,
//   "seg_params": {"knn": 10, "threshold_k": 0.05, "min_size": 20},
//   "visibility": {"abs_m": 0.02, "rel": 0.01},
//   "max_views": null,
//   "output_dir": "out",
//   "parallelism": 1,
//   "sweep": {"bundles": [...], "lambdas": [...], "betas": [...], "seeds": [...],
//             "modes": ["merged", "single_combined"]}
// }
//
// Every key is optional; unknown keys are rejected.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxrefine/box_noise.hpp"
#include "boxrefine/camera.hpp"
#include "boxrefine/error.hpp"
#include "boxrefine/oracle_segmenter.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/superpoints.hpp"

namespace boxrefine {

struct SweepGrid {
  std::vector<std::filesystem::path> bundles;  // empty: the config's bundle
  std::vector<double> lambdas;
  std::vector<double> betas;
  std::vector<std::uint64_t> seeds;
  std::vector<PromptMode> modes;  // empty: the config's mode
};

struct PipelineConfig {
  std::filesystem::path bundle;
  std::optional<std::filesystem::path> boxes_file;
  std::optional<NoiseConfig> noise;
  SegmenterConfig segmenter;
  OracleNoise oracle_noise;
  int oracle_footprint = 3;
  SegParams seg_params;
  VisibilityTolerance visibility;
  std::optional<std::size_t> max_views;
  std::filesystem::path output_dir;
  int parallelism = 1;
  SweepGrid sweep;
};

inline PromptMode parse_mode(const std::string& s) {
  if (s == "merged" || s == "MERGED") return PromptMode::Merged;
  if (s == "single_combined" || s == "SINGLE_COMBINED") return PromptMode::SingleCombined;
  throw ConfigError("unknown prompt mode '" + s + "' (expected merged or single_combined)");
}

inline BackendKind parse_backend(const std::string& s) {
  if (s == "oracle" || s == "ORACLE") return BackendKind::Oracle;
  if (s == "remote" || s == "REMOTE") return BackendKind::Remote;
  throw ConfigError("unknown segmenter backend '" + s + "' (expected oracle or remote)");
}

namespace config_detail {

using nlohmann::json;

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

}  // namespace config_detail

/// Applies the fields present in `j` on top of `cfg`.
inline void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j) {
  using config_detail::only_keys;
  using config_detail::read;
  only_keys(j, "", {"bundle", "boxes", "noise", "segmenter", "oracle_noise", "oracle_footprint", "seg_params",
                    "visibility", "max_views", "output_dir", "parallelism", "sweep"});
  std::string s;
  if (j.contains("bundle")) {
    read(j, "bundle", s, "");
    cfg.bundle = s;
  }
  if (j.contains("boxes")) {
    if (j["boxes"].is_null()) {
      cfg.boxes_file.reset();
    } else {
      read(j, "boxes", s, "");
      cfg.boxes_file = s;
    }
  }
  if (j.contains("noise")) {
    if (j["noise"].is_null()) {
      cfg.noise.reset();
    } else {
      const auto& n = j["noise"];
      only_keys(n, "noise", {"lambda", "seed", "clamp_to_cover"});
      NoiseConfig nc = cfg.noise.value_or(NoiseConfig{});
      read(n, "lambda", nc.lambda, "noise");
      read(n, "seed", nc.seed, "noise");
      read(n, "clamp_to_cover", nc.clamp_to_cover, "noise");
      cfg.noise = nc;
    }
  }
  if (j.contains("segmenter")) {
    const auto& g = j["segmenter"];
    only_keys(g, "segmenter", {"mode", "beta", "window", "backend", "endpoint"});
    if (g.contains("mode")) {
      read(g, "mode", s, "segmenter");
      cfg.segmenter.mode = parse_mode(s);
    }
    if (g.contains("backend")) {
      read(g, "backend", s, "segmenter");
      cfg.segmenter.backend = parse_backend(s);
    }
    read(g, "beta", cfg.segmenter.beta, "segmenter");
    read(g, "window", cfg.segmenter.window, "segmenter");
    read(g, "endpoint", cfg.segmenter.endpoint, "segmenter");
  }
  if (j.contains("oracle_noise")) {
    const auto& o = j["oracle_noise"];
    only_keys(o, "oracle_noise", {"erode_px", "dilate_px", "jitter", "mislabel", "box_spill", "seed"});
    read(o, "erode_px", cfg.oracle_noise.erode_px, "oracle_noise");
    read(o, "dilate_px", cfg.oracle_noise.dilate_px, "oracle_noise");
    read(o, "jitter", cfg.oracle_noise.jitter, "oracle_noise");
    read(o, "mislabel", cfg.oracle_noise.mislabel, "oracle_noise");
    read(o, "box_spill", cfg.oracle_noise.box_spill, "oracle_noise");
    read(o, "seed", cfg.oracle_noise.seed, "oracle_noise");
  }
  read(j, "oracle_footprint", cfg.oracle_footprint, "");
  if (j.contains("seg_params")) {
    const auto& p = j["seg_params"];
    only_keys(p, "seg_params", {"knn", "threshold_k", "min_size"});
    read(p, "knn", cfg.seg_params.knn, "seg_params");
    read(p, "threshold_k", cfg.seg_params.threshold_k, "seg_params");
    read(p, "min_size", cfg.seg_params.min_size, "seg_params");
  }
  if (j.contains("visibility")) {
    const auto& v = j["visibility"];
    only_keys(v, "visibility", {"abs_m", "rel"});
    read(v, "abs_m", cfg.visibility.abs_m, "visibility");
    read(v, "rel", cfg.visibility.rel, "visibility");
  }
  if (j.contains("max_views")) {
    if (j["max_views"].is_null()) {
      cfg.max_views.reset();
    } else {
      std::size_t mv = 0;
      read(j, "max_views", mv, "");
      cfg.max_views = mv;
    }
  }
  if (j.contains("output_dir")) {
    read(j, "output_dir", s, "");
    cfg.output_dir = s;
  }
  read(j, "parallelism", cfg.parallelism, "");
  if (j.contains("sweep")) {
    const auto& w = j["sweep"];
    only_keys(w, "sweep", {"bundles", "lambdas", "betas", "seeds", "modes"});
    std::vector<std::string> strs;
    if (w.contains("bundles")) {
      read(w, "bundles", strs, "sweep");
      cfg.sweep.bundles.assign(strs.begin(), strs.end());
    }
    read(w, "lambdas", cfg.sweep.lambdas, "sweep");
    read(w, "betas", cfg.sweep.betas, "sweep");
    read(w, "seeds", cfg.sweep.seeds, "sweep");
    if (w.contains("modes")) {
      strs.clear();
      read(w, "modes", strs, "sweep");
      cfg.sweep.modes.clear();
      for (const auto& m : strs) cfg.sweep.modes.push_back(parse_mode(m));
    }
  }
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  PipelineConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

/// Range and existence checks; `need_bundle` is false for subcommands that
/// take their inputs elsewhere.
inline void validate_config(const PipelineConfig& cfg, bool need_bundle = true) {
  namespace fs = std::filesystem;
  if (need_bundle) {
    if (cfg.bundle.empty()) throw ConfigError("no bundle given");
    if (!fs::exists(cfg.bundle)) throw ConfigError("bundle " + cfg.bundle.string() + " does not exist");
  }
  if (cfg.boxes_file && !fs::exists(*cfg.boxes_file)) {
    throw ConfigError("boxes file " + cfg.boxes_file->string() + " does not exist");
  }
  if (cfg.noise && !(cfg.noise->lambda >= 0.0 && cfg.noise->lambda <= 1.0)) {
    throw ConfigError("noise.lambda must lie in [0, 1]");
  }
  if (!(cfg.segmenter.beta >= 0.0)) throw ConfigError("segmenter.beta must be >= 0");
  if (cfg.segmenter.window < 1) throw ConfigError("segmenter.window must be >= 1");
  const auto& o = cfg.oracle_noise;
  if (o.erode_px < 0 || o.dilate_px < 0) throw ConfigError("oracle_noise erode/dilate must be >= 0");
  if (!(o.jitter >= 0.0 && o.jitter <= 1.0)) throw ConfigError("oracle_noise.jitter must lie in [0, 1]");
  if (!(o.mislabel >= 0.0 && o.mislabel <= 1.0)) throw ConfigError("oracle_noise.mislabel must lie in [0, 1]");
  if (!(o.box_spill >= 0.0 && o.box_spill <= 1.0)) throw ConfigError("oracle_noise.box_spill must lie in [0, 1]");
  if (cfg.oracle_footprint < 1) throw ConfigError("oracle_footprint must be >= 1");
  if (cfg.seg_params.knn < 1 || cfg.seg_params.min_size < 1 || !(cfg.seg_params.threshold_k > 0.0)) {
    throw ConfigError("seg_params: knn and min_size must be >= 1, threshold_k > 0");
  }
  if (!(cfg.visibility.abs_m >= 0.0) || !(cfg.visibility.rel >= 0.0)) {
    throw ConfigError("visibility tolerances must be >= 0");
  }
  if (cfg.max_views && *cfg.max_views == 0) throw ConfigError("max_views must be >= 1");
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  for (double l : cfg.sweep.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep.lambdas entries must lie in [0, 1]");
  }
  for (double b : cfg.sweep.betas) {
    if (!(b >= 0.0)) throw ConfigError("sweep.betas entries must be >= 0");
  }
}

}  // namespace boxrefine
