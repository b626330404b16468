#include "odf/config.hpp"

#include <fstream>

#include "json.hpp"
#include "odf/serialize.hpp"

namespace odf {

using nlohmann::json;

static json to_json(const ExperimentConfig& c) {
  json j;
  j["domain"] = {{"sphere_radius", c.domain.sphere_radius},
                 {"depth_clamp", c.domain.depth_clamp},
                 {"nonintersect_sentinel", c.domain.nonintersect_sentinel}};
  j["sampling"] = {{"n_rays", c.sampling.n_rays},
                   {"aug", c.sampling.aug},
                   {"perturb_max", c.sampling.perturb_max},
                   {"balance", c.sampling.balance},
                   {"n_cameras", c.sampling.n_cameras},
                   {"image_size", c.sampling.image_size},
                   {"focal", c.sampling.focal}};
  j["train"] = {{"mode", c.train.mode},
                {"layers", c.train.layers},
                {"width", c.train.width},
                {"latent_dim", c.train.latent_dim},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"latent_lr", c.train.latent_lr},
                {"lambda_depth", c.train.lambda_depth},
                {"lambda_reg", c.train.lambda_reg},
                {"holdout_fraction", c.train.holdout_fraction}};
  j["inference"] = {{"iterations", c.inference.iterations},
                    {"depth_map_iterations", c.inference.depth_map_iterations},
                    {"surface_margin", c.inference.surface_margin}};
  j["forward"] = {{"lattice_n", c.forward.lattice_n},
                  {"steps_adjust", c.forward.steps_adjust},
                  {"smooth_iterations", c.forward.smooth_iterations},
                  {"smooth_weight", c.forward.smooth_weight},
                  {"udf_dirs", c.forward.udf_dirs},
                  {"sdf_dirs", c.forward.sdf_dirs},
                  {"voxel_n", c.forward.voxel_n}};
  j["metrics"] = {{"fscore_threshold", c.metrics.fscore_threshold},
                  {"eval_points", c.metrics.eval_points}};
  j["seed"] = c.seed;
  return j;
}

template <typename T>
static void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

static ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("domain")) {
    const json& d = j["domain"];
    maybe(d, "sphere_radius", c.domain.sphere_radius);
    maybe(d, "depth_clamp", c.domain.depth_clamp);
    maybe(d, "nonintersect_sentinel", c.domain.nonintersect_sentinel);
  }
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    maybe(s, "n_rays", c.sampling.n_rays);
    maybe(s, "aug", c.sampling.aug);
    maybe(s, "perturb_max", c.sampling.perturb_max);
    maybe(s, "balance", c.sampling.balance);
    maybe(s, "n_cameras", c.sampling.n_cameras);
    maybe(s, "image_size", c.sampling.image_size);
    maybe(s, "focal", c.sampling.focal);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    maybe(t, "mode", c.train.mode);
    maybe(t, "layers", c.train.layers);
    maybe(t, "width", c.train.width);
    maybe(t, "latent_dim", c.train.latent_dim);
    maybe(t, "epochs", c.train.epochs);
    maybe(t, "batch_size", c.train.batch_size);
    maybe(t, "lr", c.train.lr);
    maybe(t, "latent_lr", c.train.latent_lr);
    maybe(t, "lambda_depth", c.train.lambda_depth);
    maybe(t, "lambda_reg", c.train.lambda_reg);
    maybe(t, "holdout_fraction", c.train.holdout_fraction);
  }
  if (j.contains("inference")) {
    const json& i = j["inference"];
    maybe(i, "iterations", c.inference.iterations);
    maybe(i, "depth_map_iterations", c.inference.depth_map_iterations);
    maybe(i, "surface_margin", c.inference.surface_margin);
  }
  if (j.contains("forward")) {
    const json& f = j["forward"];
    maybe(f, "lattice_n", c.forward.lattice_n);
    maybe(f, "steps_adjust", c.forward.steps_adjust);
    maybe(f, "smooth_iterations", c.forward.smooth_iterations);
    maybe(f, "smooth_weight", c.forward.smooth_weight);
    maybe(f, "udf_dirs", c.forward.udf_dirs);
    maybe(f, "sdf_dirs", c.forward.sdf_dirs);
    maybe(f, "voxel_n", c.forward.voxel_n);
  }
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    maybe(m, "fscore_threshold", c.metrics.fscore_threshold);
    maybe(m, "eval_points", c.metrics.eval_points);
  }
  maybe(j, "seed", c.seed);
  return c;
}

std::string ExperimentConfig::to_json_text() const { return to_json(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  return config_from_json(json::parse(text));
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_json_text() << "\n";
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(to_json(*this).dump())); }

std::string manifest_path(const std::string& artifact_path) {
  return artifact_path + ".manifest.json";
}

void write_manifest(const std::string& artifact_path, const ExperimentConfig& config,
                    const std::string& extras_json) {
  json j;
  j["config"] = to_json(config);
  j["config_hash"] = config.hash();
  j["extras"] = json::parse(extras_json);
  std::ofstream out(manifest_path(artifact_path));
  if (!out) throw std::runtime_error("cannot write manifest for: " + artifact_path);
  out << j.dump(2) << "\n";
}

std::string manifest_config_hash(const std::string& artifact_path) {
  std::ifstream in(manifest_path(artifact_path));
  if (!in) return "";
  json j;
  try {
    in >> j;
    return j.value("config_hash", "");
  } catch (const std::exception&) {
    return "";
  }
}

}  // namespace odf
