#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "odf/net.hpp"
#include "odf/sampling.hpp"

namespace odf::net {

enum class TrainMode { overfit, autodecoder };

struct TrainConfig {
  TrainMode mode = TrainMode::overfit;
  int epochs = 30;
  int batch_size = 256;
  uint64_t seed = 1;
  uint64_t shuffle_seed = 0;  // 0: derive from seed; holdout split always uses seed
  float lr = 1e-4f;           // network weights
  float latent_lr = 1e-3f;    // latent codes / latent inference
  float lr_final_scale = 1.0f;  // exponential decay to lr * scale by the last epoch
  LossConfig<float> loss;
  double holdout_fraction = 0.05;
  // Gradient accumulation granularity. Chunks are reduced in index order, so
  // results do not depend on the worker count.
  int chunk_size = 64;
  int log_every = 0;  // epochs between progress lines; 0 = silent

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (holdout_fraction < 0.0 || holdout_fraction >= 0.5) {
      throw std::invalid_argument("holdout_fraction must be in [0, 0.5)");
    }
  }
};

// Per-instance 256-d (configurable) codes for the autodecoder.
struct LatentTable {
  int dim = 0;
  std::vector<std::string> ids;
  Mat<float> codes;  // [dim x count]

  int count() const { return int(ids.size()); }
  int find(const std::string& id) const;
  // Adds a code initialized from N(0, 0.01^2); returns its index.
  int add(const std::string& id, uint64_t seed);
};

struct TrainStats {
  double initial_val_loss = 0.0;
  double final_val_loss = 0.0;
  double final_train_loss = 0.0;
  int64_t steps = 0;
  std::vector<double> epoch_val_loss;
};

// Joint optimization of the network weights (and latent codes in autodecoder
// mode) with Adam. `instances` supplies one dataset per shape; overfit mode
// expects exactly one. Recursion is never used here. Throws NumericalError on
// a non-finite loss.
TrainStats train(Mlp<float>& model, std::span<const RayDataset* const> instances,
                 LatentTable* latents, const TrainConfig& cfg, std::ostream* log = nullptr);

// Optimizes a fresh latent code against a frozen model using the same loss
// (loss clamp, lambda weights, latent_lr); used for unseen instances.
Col<float> infer_latent(const Mlp<float>& model, const RayDataset& rays, const TrainConfig& cfg,
                        std::ostream* log = nullptr);

// Mean total loss over a dataset with fixed parameters (no gradients).
double evaluate_loss(const Mlp<float>& model, const RayDataset& rays,
                     const Eigen::Ref<const Col<float>>& latent, const LossConfig<float>& cfg);

// One explicit gradient evaluation over whole datasets (the training batch
// machinery without the optimizer); exposed for gradient verification.
struct BatchGradient {
  LossParts<float> parts;
  Col<float> param_grad;
  Mat<float> latent_grad;  // [dim x instances] when latents are supplied
};
BatchGradient batch_gradient(const Mlp<float>& model,
                             std::span<const RayDataset* const> instances,
                             const LatentTable* latents, const LossConfig<float>& loss_cfg,
                             int chunk_size = 64);

// --- checkpoints (ODFM) --------------------------------------------------------
// header: magic "ODFM", version, architecture fields, parameter count, latent
// count; then parameters as little-endian float32 in declaration order, then
// the latent table keyed by instance id.

struct Checkpoint {
  MlpConfig config;
  Col<float> params;
  LatentTable latents;
};

void save_checkpoint(const std::string& path, const Mlp<float>& model,
                     const LatentTable* latents = nullptr);
Checkpoint load_checkpoint(const std::string& path);
bool is_checkpoint_file(const std::string& path);

}  // namespace odf::net
