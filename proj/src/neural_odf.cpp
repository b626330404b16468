#include "odf/neural_odf.hpp"

namespace odf {

NeuralOdf::NeuralOdf(net::Mlp<float> model, const DomainConfig& domain,
                     std::optional<net::Col<float>> latent)
    : OdfBackend(domain), model_(std::move(model)), latent_(std::move(latent)) {
  const int latent_dim = model_.config().latent_dim;
  if (latent_dim == 0 && latent_.has_value()) {
    throw std::invalid_argument("NeuralOdf: latent supplied to an overfit model");
  }
  if (latent_dim > 0 && (!latent_.has_value() || latent_->size() != latent_dim)) {
    throw std::invalid_argument("NeuralOdf: autodecoder model needs a latent of matching size");
  }
}

NeuralOdf NeuralOdf::from_checkpoint(const net::Checkpoint& ckpt, const DomainConfig& domain,
                                     const std::string& instance_id) {
  net::Mlp<float> model(ckpt.config);
  model.params() = ckpt.params;
  std::optional<net::Col<float>> latent;
  if (ckpt.config.latent_dim > 0) {
    if (ckpt.latents.count() == 0) {
      throw std::runtime_error("checkpoint has a latent input but no latent table");
    }
    int idx = instance_id.empty() ? 0 : ckpt.latents.find(instance_id);
    if (idx < 0) throw std::runtime_error("unknown latent instance id: " + instance_id);
    latent = ckpt.latents.codes.col(idx);
  }
  return NeuralOdf(std::move(model), domain, std::move(latent));
}

OdfSample NeuralOdf::query(const Ray& ray) const {
  count_query();
  net::Mat<float> X(model_.config().input_dim(), 1);
  X(0, 0) = float(ray.origin.x);
  X(1, 0) = float(ray.origin.y);
  X(2, 0) = float(ray.origin.z);
  X(3, 0) = float(ray.dir.x());
  X(4, 0) = float(ray.dir.y());
  X(5, 0) = float(ray.dir.z());
  if (latent_.has_value()) X.block(6, 0, latent_->size(), 1) = *latent_;
  net::Row<float> depth_raw, confidence;
  model_.evaluate(X, depth_raw, confidence);
  OdfSample s;
  s.depth = std::max(0.0, double(depth_raw(0)));
  s.confidence = double(confidence(0));
  return s;
}

}  // namespace odf
