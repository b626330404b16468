#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "odf/mesh.hpp"
#include "odf/net.hpp"
#include "odf/neural_odf.hpp"
#include "odf/sampling.hpp"
#include "odf/trainer.hpp"
#include "support/analytic.hpp"

using namespace odf;
using namespace odf::net;

namespace {

// scalar loss of the full model on a fixed batch (double build)
template <typename T>
T model_loss(const Mlp<T>& model, const Mat<T>& X, const Row<T>& depth_label,
             const Row<T>& intersect_label, const LossConfig<T>& cfg,
             typename Mlp<T>::Workspace& ws) {
  model.forward(X, ws);
  Row<T> dd, dl;
  LossParts<T> parts = loss_forward_backward<T>(ws.depth_raw, ws.conf_logit, depth_label,
                                                intersect_label, cfg, dd, dl);
  return parts.total();
}

MlpConfig small_cfg(int latent_dim) {
  MlpConfig c;
  c.layers = 4;
  c.width = 8;
  c.latent_dim = latent_dim;
  return c;
}

struct FdProblem {
  MlpConfig cfg;
  Mlp<double> model;
  Mat<double> X;
  Row<double> depth_label, intersect_label;
  LossConfig<double> loss;

  explicit FdProblem(uint64_t seed, int latent_dim = 0)
      : cfg(small_cfg(latent_dim)), model(cfg) {
    model.init_params(seed);
    Rng rng(seed, 31);
    // non-zero heads so their gradients are exercised too
    for (int i = 0; i < model.param_count(); ++i) {
      if (model.params()(i) == 0.0) model.params()(i) = rng.uniform(-0.3, 0.3);
    }
    const int B = 5;
    X.resize(cfg.input_dim(), B);
    for (int c = 0; c < B; ++c) {
      for (int r = 0; r < cfg.input_dim(); ++r) X(r, c) = rng.uniform(-1.0, 1.0);
    }
    depth_label.resize(B);
    intersect_label.resize(B);
    for (int c = 0; c < B; ++c) {
      depth_label(c) = rng.uniform(0.05, 0.45);  // away from the clamp kink
      intersect_label(c) = rng.next_double() < 0.5 ? 0.0 : 1.0;
    }
  }
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("mlp: zero-initialized heads answer confidence 0.5 and depth 0") {
  Mlp<float> model(MlpConfig{4, 16, 0, 2, 0});
  model.init_params(3);
  Rng rng(4);
  Mat<float> X(6, 3);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 6; ++r) X(r, c) = float(rng.uniform(-1.0, 1.0));
  }
  Row<float> depth, conf;
  model.evaluate(X, depth, conf);
  for (int c = 0; c < 3; ++c) {
    CHECK(depth(c) == 0.0f);
    CHECK(conf(c) == 0.5f);
  }
}

TEST_CASE("mlp: forward is deterministic and batching matches single calls") {
  Mlp<float> model(MlpConfig{4, 16, 0, 2, 0});
  model.init_params(7);
  Rng rng(8);
  Mat<float> X(6, 3);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 6; ++r) X(r, c) = float(rng.uniform(-1.0, 1.0));
  }
  Row<float> d1, c1, d2, c2;
  model.evaluate(X, d1, c1);
  model.evaluate(X, d2, c2);
  CHECK(d1 == d2);
  CHECK(c1 == c2);
  for (int c = 0; c < 3; ++c) {
    Row<float> ds, cs;
    model.evaluate(X.col(c), ds, cs);
    CHECK(ds(0) == d1(c));
    CHECK(cs(0) == c1(c));
  }
}

TEST_CASE("mlp config validation and default skip placement") {
  MlpConfig too_small;
  too_small.layers = 2;
  CHECK_THROWS_AS(too_small.validate(), std::invalid_argument);
  MlpConfig bad_branch;
  bad_branch.branch_after = 9;
  CHECK_THROWS_AS(bad_branch.validate(), std::invalid_argument);
  MlpConfig eight;  // default architecture: input re-concatenated at layer 4 of 8
  CHECK(eight.skip_layer() == 4);
  MlpConfig four;
  four.layers = 4;
  CHECK(four.skip_layer() == 2);
}

TEST_CASE("loss: sentinel labels plus the clamp neutralize far predictions") {
  LossConfig<double> cfg;
  Row<double> depth_raw(1), logit(1), depth_label(1), intersect(1), dd, dl;
  depth_raw << 0.9;
  logit << -2.0;
  depth_label << 0.5;  // miss sentinel
  intersect << 0.0;
  LossParts<double> parts =
      loss_forward_backward<double>(depth_raw, logit, depth_label, intersect, cfg, dd, dl);
  CHECK(parts.depth == 0.0);
  CHECK(dd(0) == 0.0);

  depth_raw << 37.0;  // anywhere at or past the clamp changes nothing
  LossParts<double> far =
      loss_forward_backward<double>(depth_raw, logit, depth_label, intersect, cfg, dd, dl);
  CHECK(far.depth == parts.depth);
  CHECK(far.prob == parts.prob);
}

TEST_CASE("loss: the stated arithmetic, 5 * 0.01 + 0.2 = 0.25") {
  LossConfig<double> cfg;  // lambda_depth = 5
  const double logit_v = -std::log(std::exp(0.2) - 1.0);  // BCE(y=1) = 0.2
  Row<double> depth_raw(1), logit(1), depth_label(1), intersect(1), dd, dl;
  depth_raw << 0.4;
  depth_label << 0.3;
  logit << logit_v;
  intersect << 1.0;
  LossParts<double> parts =
      loss_forward_backward<double>(depth_raw, logit, depth_label, intersect, cfg, dd, dl);
  CHECK(parts.depth == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(parts.prob == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(parts.total() == doctest::Approx(0.25).epsilon(1e-9));

  depth_raw << 0.3;  // perfect prediction, near-certain confidence
  logit << 40.0;
  LossParts<double> ideal =
      loss_forward_backward<double>(depth_raw, logit, depth_label, intersect, cfg, dd, dl);
  CHECK(ideal.total() < 1e-12);
}

TEST_CASE("loss: zero gradients when lambda1 = 0 and labels equal predictions") {
  Row<float> depth_raw(1), logit(1), depth_label(1), intersect(1), dd, dl;
  depth_raw << 0.0f;
  logit << 0.0f;
  depth_label << 0.7f;
  intersect << 0.5f;  // soft label equal to sigmoid(0)
  LossConfig<float> cfg;
  cfg.lambda_depth = 0.0f;
  loss_forward_backward<float>(depth_raw, logit, depth_label, intersect, cfg, dd, dl);
  CHECK(dd(0) == 0.0f);
  CHECK(dl(0) == 0.0f);
}

TEST_CASE("gradcheck: layer norm primitive against central differences") {
  const int H = 8, B = 5;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, 55);
    Mat<double> z(H, B), w(H, B);
    Col<double> gamma(H), beta(H);
    for (int i = 0; i < H; ++i) {
      gamma(i) = rng.uniform(0.5, 1.5);
      beta(i) = rng.uniform(-0.5, 0.5);
      for (int c = 0; c < B; ++c) {
        z(i, c) = rng.uniform(-2.0, 2.0);
        w(i, c) = rng.uniform(-1.0, 1.0);
      }
    }
    auto loss_of = [&](const Mat<double>& zz, const Col<double>& g, const Col<double>& b) {
      Mat<double> normed, out;
      Row<double> inv_sigma;
      layer_norm_forward<double>(zz, g, b, normed, inv_sigma, out);
      return (out.array() * w.array()).sum();
    };
    Mat<double> normed, out;
    Row<double> inv_sigma;
    layer_norm_forward<double>(z, gamma, beta, normed, inv_sigma, out);
    Col<double> dgamma, dbeta;
    Mat<double> dz;
    layer_norm_backward<double>(w, normed, inv_sigma, gamma, dgamma, dbeta, dz);

    const double h = 1e-6;
    for (int i = 0; i < H; ++i) {
      for (int c = 0; c < B; ++c) {
        Mat<double> zp = z, zm = z;
        zp(i, c) += h;
        zm(i, c) -= h;
        double fd = (loss_of(zp, gamma, beta) - loss_of(zm, gamma, beta)) / (2 * h);
        CHECK(rel_err(fd, dz(i, c)) < 1e-4);
      }
      Col<double> gp = gamma, gm = gamma;
      gp(i) += h;
      gm(i) -= h;
      CHECK(rel_err((loss_of(z, gp, beta) - loss_of(z, gm, beta)) / (2 * h), dgamma(i)) < 1e-4);
      Col<double> bp = beta, bm = beta;
      bp(i) += h;
      bm(i) -= h;
      CHECK(rel_err((loss_of(z, gamma, bp) - loss_of(z, gamma, bm)) / (2 * h), dbeta(i)) < 1e-4);
    }
  }
}

TEST_CASE("gradcheck: full model parameter gradients (double build)") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    FdProblem p(seed);
    Mlp<double>::Workspace ws;
    p.model.forward(p.X, ws);
    Row<double> dd, dl;
    loss_forward_backward<double>(ws.depth_raw, ws.conf_logit, p.depth_label, p.intersect_label,
                                  p.loss, dd, dl);
    p.model.backward(ws, dd, dl, false);
    Col<double> analytic = ws.grad;

    const double h = 1e-5;
    Rng pick(seed, 91);
    Mlp<double>::Workspace fdws;
    for (int k = 0; k < 40; ++k) {  // random subset of the parameter vector
      int i = int(pick.next_below(uint64_t(p.model.param_count())));
      double saved = p.model.params()(i);
      p.model.params()(i) = saved + h;
      double lp = model_loss(p.model, p.X, p.depth_label, p.intersect_label, p.loss, fdws);
      p.model.params()(i) = saved - h;
      double lm = model_loss(p.model, p.X, p.depth_label, p.intersect_label, p.loss, fdws);
      p.model.params()(i) = saved;
      double fd = (lp - lm) / (2 * h);
      CHECK(rel_err(fd, analytic(i)) < 1e-4);
    }
  }
}

TEST_CASE("gradcheck: input and latent-code gradients (double build)") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    FdProblem p(seed, 4);  // 6 ray dims + 4 latent dims
    Mlp<double>::Workspace ws;
    p.model.forward(p.X, ws);
    Row<double> dd, dl;
    loss_forward_backward<double>(ws.depth_raw, ws.conf_logit, p.depth_label, p.intersect_label,
                                  p.loss, dd, dl);
    p.model.backward(ws, dd, dl, true);
    Mat<double> analytic = ws.dinput;

    const double h = 1e-5;
    Mlp<double>::Workspace fdws;
    for (int r = 0; r < p.cfg.input_dim(); ++r) {
      for (int c = 0; c < int(p.X.cols()); ++c) {
        Mat<double> Xp = p.X, Xm = p.X;
        Xp(r, c) += h;
        Xm(r, c) -= h;
        double fd = (model_loss(p.model, Xp, p.depth_label, p.intersect_label, p.loss, fdws) -
                     model_loss(p.model, Xm, p.depth_label, p.intersect_label, p.loss, fdws)) /
                    (2 * h);
        CHECK(rel_err(fd, analytic(r, c)) < 1e-4);
      }
    }
  }
}

TEST_CASE("latent gradient carries exactly the 2*lambda*z regularizer at zero heads") {
  MlpConfig cfg{4, 16, 8, 2, 0};
  Mlp<float> model(cfg);
  model.init_params(5);  // trunk random, heads zero: no data gradient reaches the input

  RayDataset one;
  one.rays.push_back(LabeledRay{Ray({0.1, 0.2, 0.3}, Vec3{0, 0, 1}), 0.4, true});
  const RayDataset* sets[1] = {&one};
  LatentTable latents;
  latents.dim = 8;
  latents.add("a", 77);
  LossConfig<float> loss;
  BatchGradient g = batch_gradient(model, sets, &latents, loss);
  for (int i = 0; i < 8; ++i) {
    CHECK(g.latent_grad(i, 0) == 2.0f * loss.lambda_reg * latents.codes(i, 0));
  }
}

TEST_CASE("Adam minimizes a quadratic") {
  Col<float> x(3);
  x << 4.0f, -3.0f, 2.0f;
  Adam<float> opt(3, 0.1f);
  for (int i = 0; i < 2000; ++i) {
    Col<float> grad = 2.0f * x;
    opt.step(x, grad);
  }
  CHECK(x.norm() < 1e-3);
}

TEST_CASE("train: zero epochs leaves the model unchanged") {
  TriMesh sphere = make_icosphere(2);
  Bvh bvh = Bvh::build(sphere);
  RayDataset data = sample_rays_from_mesh(sphere, bvh, 512, 3);
  Mlp<float> model(MlpConfig{4, 16, 0, 2, 0});
  model.init_params(9);
  Col<float> before = model.params();
  TrainConfig cfg;
  cfg.epochs = 0;
  const RayDataset* sets[1] = {&data};
  TrainStats stats = train(model, sets, nullptr, cfg);
  CHECK(model.params() == before);
  CHECK(stats.steps == 0);
}

TEST_CASE("train: rejects bad inputs and aborts on non-finite loss") {
  TriMesh sphere = make_icosphere(2);
  Bvh bvh = Bvh::build(sphere);
  RayDataset data = sample_rays_from_mesh(sphere, bvh, 256, 3);
  Mlp<float> model(MlpConfig{4, 16, 0, 2, 0});
  model.init_params(1);
  TrainConfig cfg;
  cfg.epochs = 1;

  std::vector<const RayDataset*> none;
  CHECK_THROWS_AS(train(model, none, nullptr, cfg), std::invalid_argument);

  RayDataset poisoned = data;
  poisoned.rays[0].ray.origin.x = std::numeric_limits<double>::quiet_NaN();
  const RayDataset* sets[1] = {&poisoned};
  cfg.holdout_fraction = 0.0;
  CHECK_THROWS_AS(train(model, sets, nullptr, cfg), NumericalError);
}

TEST_CASE("train: bitwise deterministic given the seed") {
  TriMesh sphere = make_icosphere(2);
  Bvh bvh = Bvh::build(sphere);
  RayDataset data = sample_rays_from_mesh(sphere, bvh, 2048, 3);
  const RayDataset* sets[1] = {&data};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 5;

  Mlp<float> a(MlpConfig{4, 16, 0, 2, 0});
  a.init_params(9);
  Mlp<float> b(MlpConfig{4, 16, 0, 2, 0});
  b.init_params(9);
  train(a, sets, nullptr, cfg);
  train(b, sets, nullptr, cfg);
  CHECK(a.params() == b.params());
}

TEST_CASE("train: batch-order permutation only perturbs the final loss slightly") {
  TriMesh sphere = make_icosphere(3);
  Bvh bvh = Bvh::build(sphere);
  RayDataset data = sample_rays_from_mesh(sphere, bvh, 10000, 3);
  const RayDataset* sets[1] = {&data};

  auto run = [&](uint64_t shuffle_seed) {
    Mlp<float> model(MlpConfig{3, 32, 0, 2, 0});
    model.init_params(11);  // same weights and split; only the shuffle stream changes
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 42;
    cfg.shuffle_seed = shuffle_seed;
    cfg.lr = 1e-3f;
    return train(model, sets, nullptr, cfg).final_val_loss;
  };
  double la = run(100), lb = run(200);
  CHECK(std::abs(la - lb) / std::max(la, lb) < 0.10);
}

TEST_CASE("train: sphere overfit reaches held-out clamped depth MSE < 1e-3") {
  TriMesh sphere = make_icosphere(3);
  Bvh bvh = Bvh::build(sphere);
  RayDataset base = sample_rays_from_mesh(sphere, bvh, 50000, 17);
  AugmentConfig aug = AugmentConfig::parse("abc", 0.1);
  RayDataset data = augment_rays(base, &sphere, &bvh, aug, 17);
  const RayDataset* sets[1] = {&data};

  Mlp<float> model(MlpConfig{4, 128, 0, 2, 0});
  model.init_params(13);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.lr = 1e-3f;
  cfg.batch_size = 256;
  TrainStats stats = train(model, sets, nullptr, cfg);
  CHECK(stats.final_val_loss < stats.initial_val_loss);

  RayDataset heldout = sample_rays_from_mesh(sphere, bvh, 5000, 999);
  NeuralOdf neural(std::move(model));
  double mse = 0.0;
  for (const LabeledRay& r : heldout.rays) {
    OdfSample s = neural.query(r.ray);
    double err = clamp_depth(s.depth, 0.5) - clamp_depth(r.depth, 0.5);
    mse += err * err;
  }
  mse /= double(heldout.rays.size());
  CHECK(mse < 1e-3);
}

TEST_CASE("train: autodecoder separates per-instance latents") {
  std::vector<RayDataset> datasets;
  for (int i = 0; i < 5; ++i) {
    double radius = 0.6 + 0.1 * i;
    TriMesh sphere = make_icosphere(2);
    for (Vec3& v : sphere.vertices) v = v * radius;
    Bvh bvh = Bvh::build(sphere);
    datasets.push_back(sample_rays_from_mesh(sphere, bvh, 3000, 100 + uint64_t(i)));
  }
  std::vector<const RayDataset*> sets;
  for (const RayDataset& d : datasets) sets.push_back(&d);

  Mlp<float> model(MlpConfig{4, 32, 8, 2, 0});
  model.init_params(21);
  LatentTable latents;
  latents.dim = 8;
  for (int i = 0; i < 5; ++i) latents.add("shape" + std::to_string(i), 50);
  TrainConfig cfg;
  cfg.mode = TrainMode::autodecoder;
  cfg.epochs = 4;
  cfg.lr = 1e-3f;
  TrainStats stats = train(model, sets, &latents, cfg);
  CHECK(stats.final_val_loss < stats.initial_val_loss);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      CHECK((latents.codes.col(i) - latents.codes.col(j)).norm() > 0.0f);
    }
  }
}

TEST_CASE("infer_latent: recovers a training instance within 2x of its loss") {
  std::vector<RayDataset> datasets;
  for (int i = 0; i < 3; ++i) {
    double radius = 0.6 + 0.15 * i;
    TriMesh sphere = make_icosphere(2);
    for (Vec3& v : sphere.vertices) v = v * radius;
    Bvh bvh = Bvh::build(sphere);
    datasets.push_back(sample_rays_from_mesh(sphere, bvh, 4000, 300 + uint64_t(i)));
  }
  std::vector<const RayDataset*> sets;
  for (const RayDataset& d : datasets) sets.push_back(&d);

  Mlp<float> model(MlpConfig{4, 32, 8, 2, 0});
  model.init_params(23);
  LatentTable latents;
  latents.dim = 8;
  for (int i = 0; i < 3; ++i) latents.add("s" + std::to_string(i), 60);
  TrainConfig cfg;
  cfg.mode = TrainMode::autodecoder;
  cfg.epochs = 20;
  cfg.lr = 1e-3f;
  train(model, sets, &latents, cfg);

  TrainConfig infer_cfg = cfg;
  infer_cfg.epochs = 30;
  Col<float> recovered = infer_latent(model, datasets[1], infer_cfg);
  double recovered_loss = evaluate_loss(model, datasets[1], recovered, cfg.loss);
  double trained_loss = evaluate_loss(model, datasets[1], latents.codes.col(1), cfg.loss);
  CHECK(recovered_loss < 2.0 * trained_loss + 1e-6);

  RayDataset empty;
  CHECK_THROWS_AS(infer_latent(model, empty, infer_cfg), std::invalid_argument);
}

TEST_CASE("NeuralOdf: latent contract and nonnegative depths") {
  Mlp<float> overfit(MlpConfig{4, 16, 0, 2, 0});
  overfit.init_params(2);
  CHECK_THROWS_AS(NeuralOdf(overfit, {}, Col<float>::Zero(4)), std::invalid_argument);

  Mlp<float> coded(MlpConfig{4, 16, 4, 2, 0});
  coded.init_params(2);
  CHECK_THROWS_AS(NeuralOdf(coded, {}), std::invalid_argument);
  NeuralOdf backend(coded, {}, Col<float>::Zero(4));
  OdfSample s = backend.query(Ray({0, 0, 0}, Vec3{1, 0, 0}));
  CHECK(s.depth >= 0.0);
  CHECK(s.confidence > 0.0);
  CHECK(s.confidence < 1.0);
}
