#include "odf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>

#include "odf/serialize.hpp"

namespace odf::net {

int LatentTable::find(const std::string& id) const {
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return int(i);
  }
  return -1;
}

int LatentTable::add(const std::string& id, uint64_t seed) {
  int existing = find(id);
  if (existing >= 0) return existing;
  Rng rng(seed, 40 + ids.size());
  Col<float> code(dim);
  for (int i = 0; i < dim; ++i) code(i) = float(rng.next_gaussian() * 0.01);
  codes.conservativeResize(dim, int(ids.size()) + 1);
  codes.col(int(ids.size())) = code;
  ids.push_back(id);
  return int(ids.size()) - 1;
}

namespace {

struct SampleRef {
  uint32_t instance;
  uint32_t ray;
};

// Fisher-Yates with the project RNG so shuffles replay across platforms.
void shuffle_refs(std::vector<SampleRef>& refs, Rng& rng) {
  for (size_t i = refs.size(); i > 1; --i) {
    size_t j = rng.next_below(i);
    std::swap(refs[i - 1], refs[j]);
  }
}

struct BatchBuffers {
  Mat<float> X;
  Row<float> depth_label, intersect_label;
  std::vector<uint32_t> instance_of;  // per column
};

void fill_batch(const std::vector<const RayDataset*>& instances, const LatentTable* latents,
                std::span<const SampleRef> refs, int input_dim, BatchBuffers& buf) {
  const int B = int(refs.size());
  buf.X.resize(input_dim, B);
  buf.depth_label.resize(B);
  buf.intersect_label.resize(B);
  buf.instance_of.resize(size_t(B));
  for (int c = 0; c < B; ++c) {
    const SampleRef& ref = refs[size_t(c)];
    const LabeledRay& r = instances[ref.instance]->rays[ref.ray];
    buf.X(0, c) = float(r.ray.origin.x);
    buf.X(1, c) = float(r.ray.origin.y);
    buf.X(2, c) = float(r.ray.origin.z);
    buf.X(3, c) = float(r.ray.dir.x());
    buf.X(4, c) = float(r.ray.dir.y());
    buf.X(5, c) = float(r.ray.dir.z());
    if (latents != nullptr && latents->dim > 0) {
      buf.X.block(6, c, latents->dim, 1) = latents->codes.col(int(ref.instance));
    }
    buf.depth_label(c) = float(r.depth);
    buf.intersect_label(c) = r.intersects ? 1.0f : 0.0f;
    buf.instance_of[size_t(c)] = ref.instance;
  }
}

struct ChunkOutputs {
  LossParts<float> parts;
  int count = 0;
};

// Forward/loss/backward over one batch, chunked for parallelism with a fixed
// reduction order. Returns mean loss parts; accumulates the parameter
// gradient into `grad` and per-instance latent grads into `latent_grad`.
LossParts<float> batch_grad(const Mlp<float>& model, const BatchBuffers& buf,
                            const LossConfig<float>& loss_cfg, int chunk_size,
                            std::vector<Mlp<float>::Workspace>& ws, Col<float>& grad,
                            Mat<float>* latent_grad, const LatentTable* latents) {
  const int B = int(buf.X.cols());
  const int n_chunks = (B + chunk_size - 1) / chunk_size;
  if (int(ws.size()) < n_chunks) ws.resize(size_t(n_chunks));
  std::vector<ChunkOutputs> outs(static_cast<size_t>(n_chunks));
  const bool want_dinput = latent_grad != nullptr;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < n_chunks; ++c) {
    const int c0 = c * chunk_size;
    const int bc = std::min(chunk_size, B - c0);
    Mlp<float>::Workspace& w = ws[size_t(c)];
    model.forward(buf.X.middleCols(c0, bc), w);
    Row<float> d_depth, d_logit;
    Row<float> depth_label = buf.depth_label.segment(c0, bc);
    Row<float> intersect_label = buf.intersect_label.segment(c0, bc);
    outs[size_t(c)].parts = loss_forward_backward<float>(w.depth_raw, w.conf_logit, depth_label,
                                                         intersect_label, loss_cfg, d_depth, d_logit);
    outs[size_t(c)].count = bc;
    model.backward(w, d_depth, d_logit, want_dinput);
  }

  LossParts<float> batch_parts;
  grad.setZero();
  for (int c = 0; c < n_chunks; ++c) {
    const float weight = float(outs[size_t(c)].count) / float(B);
    grad += weight * ws[size_t(c)].grad;
    batch_parts.depth += weight * outs[size_t(c)].parts.depth;
    batch_parts.prob += weight * outs[size_t(c)].parts.prob;
    if (want_dinput) {
      const int c0 = c * chunk_size;
      for (int k = 0; k < outs[size_t(c)].count; ++k) {
        int inst = int(buf.instance_of[size_t(c0 + k)]);
        // chunk dinput is d(chunk mean)/dx; rescale to d(batch mean)/dx
        latent_grad->col(inst) += weight * ws[size_t(c)].dinput.block(6, k, latents->dim, 1);
      }
    }
  }

  // latent regularization: lambda_reg * mean_batch ||z_i||^2
  if (want_dinput && latents != nullptr && latents->dim > 0) {
    float inv_b = 1.0f / float(B);
    for (uint32_t inst : buf.instance_of) {
      batch_parts.reg += loss_cfg.lambda_reg * latents->codes.col(int(inst)).squaredNorm() * inv_b;
    }
    std::vector<int> hits(size_t(latents->count()), 0);
    for (uint32_t inst : buf.instance_of) hits[inst]++;
    for (int j = 0; j < latents->count(); ++j) {
      if (hits[size_t(j)] > 0) {
        latent_grad->col(j) +=
            loss_cfg.lambda_reg * 2.0f * float(hits[size_t(j)]) * inv_b * latents->codes.col(j);
      }
    }
  }
  return batch_parts;
}

double eval_mean_loss(const Mlp<float>& model, const std::vector<const RayDataset*>& instances,
                      const LatentTable* latents, std::span<const SampleRef> refs,
                      const LossConfig<float>& loss_cfg) {
  if (refs.empty()) return 0.0;
  const int input_dim = model.config().input_dim();
  BatchBuffers buf;
  Mlp<float>::Workspace ws;
  double acc = 0.0;
  const size_t block = 4096;
  for (size_t start = 0; start < refs.size(); start += block) {
    size_t n = std::min(block, refs.size() - start);
    fill_batch(instances, latents, refs.subspan(start, n), input_dim, buf);
    model.forward(buf.X, ws);
    Row<float> d_depth, d_logit;
    LossParts<float> parts = loss_forward_backward<float>(
        ws.depth_raw, ws.conf_logit, buf.depth_label, buf.intersect_label, loss_cfg, d_depth,
        d_logit);
    float reg = 0.0f;
    if (latents != nullptr && latents->dim > 0) {
      for (uint32_t inst : buf.instance_of) {
        reg += loss_cfg.lambda_reg * latents->codes.col(int(inst)).squaredNorm() / float(n);
      }
    }
    acc += double(parts.depth + parts.prob + reg) * double(n);
  }
  return acc / double(refs.size());
}

}  // namespace

TrainStats train(Mlp<float>& model, std::span<const RayDataset* const> instances,
                 LatentTable* latents, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (instances.empty()) throw std::invalid_argument("train: no datasets");
  for (const RayDataset* d : instances) {
    if (d == nullptr || d->empty()) throw std::invalid_argument("train: empty dataset");
  }
  if (cfg.mode == TrainMode::overfit && instances.size() != 1) {
    throw std::invalid_argument("train: overfit mode expects exactly one dataset");
  }
  if (cfg.mode == TrainMode::autodecoder &&
      (latents == nullptr || latents->count() != int(instances.size()))) {
    throw std::invalid_argument("train: autodecoder mode needs one latent per instance");
  }
  if (cfg.mode == TrainMode::overfit && model.config().latent_dim != 0) {
    throw std::invalid_argument("train: overfit model must not take a latent input");
  }

  std::vector<const RayDataset*> inst(instances.begin(), instances.end());
  LatentTable* lat = cfg.mode == TrainMode::autodecoder ? latents : nullptr;

  std::vector<SampleRef> all;
  for (uint32_t i = 0; i < inst.size(); ++i) {
    for (uint32_t r = 0; r < inst[i]->rays.size(); ++r) all.push_back({i, r});
  }
  Rng split_rng(cfg.seed, 77);
  shuffle_refs(all, split_rng);
  size_t holdout = size_t(double(all.size()) * cfg.holdout_fraction);
  if (holdout == 0 && cfg.holdout_fraction > 0 && all.size() > 20) holdout = 1;
  std::vector<SampleRef> val(all.begin(), all.begin() + holdout);
  std::vector<SampleRef> trainset(all.begin() + holdout, all.end());
  if (trainset.empty()) throw std::invalid_argument("train: dataset too small for the holdout");

  TrainStats stats;
  stats.initial_val_loss = eval_mean_loss(model, inst, lat, val.empty() ? trainset : val, cfg.loss);

  Adam<float> opt(model.param_count(), cfg.lr);
  std::unique_ptr<Adam<float>> latent_opt;
  if (lat != nullptr) {
    latent_opt = std::make_unique<Adam<float>>(lat->dim * lat->count(), cfg.latent_lr);
  }

  const int input_dim = model.config().input_dim();
  BatchBuffers buf;
  std::vector<Mlp<float>::Workspace> ws;
  Col<float> grad(model.param_count());
  Mat<float> latent_grad;

  const uint64_t shuffle_seed = cfg.shuffle_seed != 0 ? cfg.shuffle_seed : cfg.seed;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_final_scale != 1.0f && cfg.epochs > 1) {
      float frac = float(epoch) / float(cfg.epochs - 1);
      opt.set_lr(cfg.lr * std::pow(cfg.lr_final_scale, frac));
    }
    Rng epoch_rng(shuffle_seed, 1000 + uint64_t(epoch));
    shuffle_refs(trainset, epoch_rng);
    double epoch_loss = 0.0;
    size_t epoch_count = 0;
    for (size_t start = 0; start < trainset.size(); start += size_t(cfg.batch_size)) {
      size_t n = std::min(size_t(cfg.batch_size), trainset.size() - start);
      fill_batch(inst, lat, std::span(trainset).subspan(start, n), input_dim, buf);
      if (lat != nullptr) latent_grad = Mat<float>::Zero(lat->dim, lat->count());
      LossParts<float> parts = batch_grad(model, buf, cfg.loss, cfg.chunk_size, ws, grad,
                                          lat != nullptr ? &latent_grad : nullptr, lat);
      float total = parts.total();
      if (!std::isfinite(total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(stats.steps));
      }
      opt.step(model.params(), grad);
      if (lat != nullptr) {
        Eigen::Map<Col<float>> codes_flat(lat->codes.data(), lat->dim * lat->count());
        Eigen::Map<Col<float>> grad_flat(latent_grad.data(), lat->dim * lat->count());
        Col<float> codes_vec = codes_flat;
        Col<float> grad_vec = grad_flat;
        latent_opt->step(codes_vec, grad_vec);
        codes_flat = codes_vec;
      }
      ++stats.steps;
      epoch_loss += double(total) * double(n);
      epoch_count += n;
    }
    stats.final_train_loss = epoch_loss / double(epoch_count);
    double v = eval_mean_loss(model, inst, lat, val.empty() ? trainset : val, cfg.loss);
    stats.epoch_val_loss.push_back(v);
    if (log != nullptr && cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs)) {
      (*log) << "epoch " << epoch + 1 << "/" << cfg.epochs << "  train " << stats.final_train_loss
             << "  val " << v << "\n";
    }
  }
  stats.final_val_loss =
      cfg.epochs > 0 ? stats.epoch_val_loss.back() : stats.initial_val_loss;
  return stats;
}

Col<float> infer_latent(const Mlp<float>& model, const RayDataset& rays, const TrainConfig& cfg,
                        std::ostream* log) {
  cfg.validate();
  if (rays.empty()) throw std::invalid_argument("infer_latent: empty ray set");
  const int dim = model.config().latent_dim;
  if (dim <= 0) throw std::invalid_argument("infer_latent: model has no latent input");

  LatentTable table;
  table.dim = dim;
  table.add("query", cfg.seed);

  std::vector<const RayDataset*> inst{&rays};
  std::vector<SampleRef> refs;
  refs.reserve(rays.size());
  for (uint32_t r = 0; r < rays.size(); ++r) refs.push_back({0, r});

  Adam<float> opt(dim, cfg.latent_lr);
  BatchBuffers buf;
  std::vector<Mlp<float>::Workspace> ws;
  Col<float> grad(model.param_count());
  Mat<float> latent_grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng(cfg.seed, 5000 + uint64_t(epoch));
    shuffle_refs(refs, epoch_rng);
    for (size_t start = 0; start < refs.size(); start += size_t(cfg.batch_size)) {
      size_t n = std::min(size_t(cfg.batch_size), refs.size() - start);
      fill_batch(inst, &table, std::span(refs).subspan(start, n), model.config().input_dim(), buf);
      latent_grad = Mat<float>::Zero(dim, 1);
      LossParts<float> parts =
          batch_grad(model, buf, cfg.loss, cfg.chunk_size, ws, grad, &latent_grad, &table);
      if (!std::isfinite(parts.total())) throw NumericalError("non-finite loss in infer_latent");
      Col<float> z = table.codes.col(0);
      Col<float> gz = latent_grad.col(0);
      opt.step(z, gz);
      table.codes.col(0) = z;
    }
    if (log != nullptr && cfg.log_every > 0 && epoch % cfg.log_every == 0) {
      (*log) << "latent epoch " << epoch + 1 << "/" << cfg.epochs << "\n";
    }
  }
  return table.codes.col(0);
}

BatchGradient batch_gradient(const Mlp<float>& model,
                             std::span<const RayDataset* const> instances,
                             const LatentTable* latents, const LossConfig<float>& loss_cfg,
                             int chunk_size) {
  std::vector<const RayDataset*> inst(instances.begin(), instances.end());
  std::vector<SampleRef> refs;
  for (uint32_t i = 0; i < inst.size(); ++i) {
    for (uint32_t r = 0; r < inst[i]->rays.size(); ++r) refs.push_back({i, r});
  }
  BatchBuffers buf;
  fill_batch(inst, latents, refs, model.config().input_dim(), buf);
  BatchGradient out;
  out.param_grad.resize(model.param_count());
  if (latents != nullptr) out.latent_grad = Mat<float>::Zero(latents->dim, latents->count());
  std::vector<Mlp<float>::Workspace> ws;
  out.parts = batch_grad(model, buf, loss_cfg, chunk_size, ws, out.param_grad,
                         latents != nullptr ? &out.latent_grad : nullptr, latents);
  return out;
}

double evaluate_loss(const Mlp<float>& model, const RayDataset& rays,
                     const Eigen::Ref<const Col<float>>& latent, const LossConfig<float>& cfg) {
  if (rays.empty()) throw std::invalid_argument("evaluate_loss: empty ray set");
  LatentTable table;
  if (latent.size() > 0) {
    table.dim = int(latent.size());
    table.ids.push_back("query");
    table.codes = latent;
  }
  std::vector<const RayDataset*> inst{&rays};
  std::vector<SampleRef> refs;
  for (uint32_t r = 0; r < rays.size(); ++r) refs.push_back({0, r});
  return eval_mean_loss(model, inst, latent.size() > 0 ? &table : nullptr, refs, cfg);
}

// --- checkpoints -----------------------------------------------------------------

static constexpr char kCkptMagic[4] = {'O', 'D', 'F', 'M'};
static constexpr uint32_t kCkptVersion = 1;

void save_checkpoint(const std::string& path, const Mlp<float>& model,
                     const LatentTable* latents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const MlpConfig& cfg = model.config();
  write_magic(out, kCkptMagic);
  write_pod<uint32_t>(out, kCkptVersion);
  write_pod<uint32_t>(out, uint32_t(cfg.layers));
  write_pod<uint32_t>(out, uint32_t(cfg.width));
  write_pod<uint32_t>(out, uint32_t(cfg.latent_dim));
  write_pod<uint32_t>(out, uint32_t(cfg.branch_after));
  write_pod<uint32_t>(out, uint32_t(cfg.skip_layer()));
  write_pod<uint64_t>(out, uint64_t(model.param_count()));
  uint32_t n_latents = latents != nullptr ? uint32_t(latents->count()) : 0;
  write_pod<uint32_t>(out, n_latents);
  out.write(reinterpret_cast<const char*>(model.params().data()),
            std::streamsize(sizeof(float)) * model.param_count());
  for (uint32_t i = 0; i < n_latents; ++i) {
    write_string(out, latents->ids[i]);
    out.write(reinterpret_cast<const char*>(latents->codes.col(int(i)).data()),
              std::streamsize(sizeof(float)) * latents->dim);
  }
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  expect_magic(in, kCkptMagic, "ODFM");
  uint32_t version = read_pod<uint32_t>(in);
  if (version != kCkptVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config.layers = int(read_pod<uint32_t>(in));
  ckpt.config.width = int(read_pod<uint32_t>(in));
  ckpt.config.latent_dim = int(read_pod<uint32_t>(in));
  ckpt.config.branch_after = int(read_pod<uint32_t>(in));
  ckpt.config.skip_at = int(read_pod<uint32_t>(in));
  uint64_t n_params = read_pod<uint64_t>(in);
  uint32_t n_latents = read_pod<uint32_t>(in);
  ckpt.params.resize(Eigen::Index(n_params));
  in.read(reinterpret_cast<char*>(ckpt.params.data()), std::streamsize(sizeof(float) * n_params));
  ckpt.latents.dim = ckpt.config.latent_dim;
  if (n_latents > 0) ckpt.latents.codes.resize(ckpt.latents.dim, int(n_latents));
  for (uint32_t i = 0; i < n_latents; ++i) {
    ckpt.latents.ids.push_back(read_string(in));
    in.read(reinterpret_cast<char*>(ckpt.latents.codes.col(int(i)).data()),
            std::streamsize(sizeof(float)) * ckpt.latents.dim);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  Mlp<float> probe(ckpt.config);
  if (uint64_t(probe.param_count()) != n_params) {
    throw std::runtime_error("checkpoint parameter count does not match its architecture");
  }
  return ckpt;
}

bool is_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char buf[4];
  in.read(buf, 4);
  return in && std::memcmp(buf, kCkptMagic, 4) == 0;
}

}  // namespace odf::net
