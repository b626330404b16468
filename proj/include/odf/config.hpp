#pragma once

#include <cstdint>
#include <string>

#include "odf/odf.hpp"

namespace odf {

// Full serialized configuration of one experiment. Round-trips losslessly
// through JSON; its hash is embedded in output manifests so `eval` can refuse
// cross-config comparisons.
struct ExperimentConfig {
  DomainConfig domain;

  struct Sampling {
    uint64_t n_rays = 100000;
    std::string aug = "none";  // subset of "abc"
    double perturb_max = 0.1;
    bool balance = true;
    int n_cameras = 8;
    int image_size = 256;
    double focal = 100.0;
  } sampling;

  struct Train {
    std::string mode = "overfit";  // or "autodecoder"
    int layers = 8;
    int width = 256;
    int latent_dim = 256;  // used in autodecoder mode only
    int epochs = 30;
    int batch_size = 256;
    double lr = 1e-4;
    double latent_lr = 1e-3;
    double lambda_depth = 5.0;
    double lambda_reg = 1e-4;
    double holdout_fraction = 0.05;
  } train;

  struct Inference {
    int iterations = 3;
    int depth_map_iterations = 4;
    double surface_margin = 0.01;
  } inference;

  struct Forward {
    int lattice_n = 64;
    int steps_adjust = 1;
    int smooth_iterations = 5;
    double smooth_weight = 0.5;
    int udf_dirs = 1024;
    int sdf_dirs = 64;
    int voxel_n = 32;
  } forward;

  struct Metrics {
    double fscore_threshold = 0.005;
    uint64_t eval_points = 30000;
  } metrics;

  uint64_t seed = 0;

  std::string to_json_text() const;
  static ExperimentConfig from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static ExperimentConfig load(const std::string& path);

  // FNV-1a of the canonical serialization, as hex.
  std::string hash() const;
};

// Output manifests: the config, its hash, and free-form extras such as input
// dataset hashes. Written next to every CLI artifact.
void write_manifest(const std::string& artifact_path, const ExperimentConfig& config,
                    const std::string& extras_json = "{}");
// Returns the config hash recorded in the manifest of an artifact, or "".
std::string manifest_config_hash(const std::string& artifact_path);
std::string manifest_path(const std::string& artifact_path);

}  // namespace odf
