#include "odf/inference.hpp"

#include <algorithm>

namespace odf {

std::pair<double, bool> single_inference(const OdfBackend& backend, const Ray& ray, double clamp) {
  OdfSample s = backend.query(ray);
  return {clamp_depth(s.depth, clamp), s.intersects()};
}

InferenceResult recursive_inference(const OdfBackend& backend, const Ray& ray,
                                    const InferenceConfig& cfg) {
  cfg.validate();

  auto [d0, m0] = single_inference(backend, ray, cfg.clamp);
  double along = d0;  // signed distance walked along the ray direction
  bool mask = m0;

  for (int iter = 1; iter < cfg.iterations; ++iter) {
    Vec3 x = ray.at(along);
    auto [d_fwd, m_fwd] = single_inference(backend, Ray(x, ray.dir), cfg.clamp);
    auto [d_bwd, m_bwd] = single_inference(backend, Ray(x, -ray.dir), cfg.clamp);
    if (d_fwd <= d_bwd) {
      along += d_fwd;
      mask = m_fwd;
    } else {
      along -= d_bwd;
      mask = m_bwd;
    }
  }

  Vec3 x = ray.at(along);
  auto [d_fwd, m_fwd] = single_inference(backend, Ray(x, ray.dir), cfg.clamp);
  auto [d_bwd, m_bwd] = single_inference(backend, Ray(x, -ray.dir), cfg.clamp);
  mask = mask && std::min(d_fwd, d_bwd) < cfg.surface_margin;

  return InferenceResult{x, along, mask};
}

std::vector<InferenceResult> batch_recursive_inference(const OdfBackend& backend,
                                                       std::span<const Ray> rays,
                                                       const InferenceConfig& cfg) {
  cfg.validate();
  std::vector<InferenceResult> out(rays.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < long(rays.size()); ++i) {
    out[size_t(i)] = recursive_inference(backend, rays[size_t(i)], cfg);
  }
  return out;
}

}  // namespace odf
