#pragma once

#include <optional>

#include "odf/net.hpp"
#include "odf/odf.hpp"
#include "odf/trainer.hpp"

namespace odf {

// ODF backend over a trained MLP (optionally conditioned on a latent code).
// Holds an immutable snapshot of the parameters; safe to query from many
// threads. Negative raw depths are reported as zero so OdfSample's
// nonnegativity holds.
class NeuralOdf : public OdfBackend {
 public:
  NeuralOdf(net::Mlp<float> model, const DomainConfig& domain = {},
            std::optional<net::Col<float>> latent = std::nullopt);

  static NeuralOdf from_checkpoint(const net::Checkpoint& ckpt, const DomainConfig& domain = {},
                                   const std::string& instance_id = "");

  OdfSample query(const Ray& ray) const override;

  const net::Mlp<float>& model() const { return model_; }
  const std::optional<net::Col<float>>& latent() const { return latent_; }

 private:
  net::Mlp<float> model_;
  std::optional<net::Col<float>> latent_;
};

}  // namespace odf
