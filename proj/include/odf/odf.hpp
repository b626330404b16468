#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "odf/bvh.hpp"
#include "odf/mesh.hpp"
#include "odf/vec3.hpp"

namespace odf {

// What any ODF backend returns for a ray: first-hit depth along the ray plus
// an intersection confidence (exactly 0 or 1 for the oracle, (0,1) for the
// neural backend). Misses carry the 0.5 sentinel depth used for labeling.
struct OdfSample {
  double depth = 0.0;
  double confidence = 0.0;

  bool intersects() const { return confidence > 0.5; }
};

// Shared constants: the enclosing sphere, the depth clamp, and the
// non-intersecting sentinel. Flows through sampling, training, inference and
// the forward maps; nothing else hardcodes these values.
struct DomainConfig {
  double sphere_radius = 1.3;
  double depth_clamp = 0.5;
  double nonintersect_sentinel = 0.5;

  void validate() const {
    if (sphere_radius <= 0.0) throw std::invalid_argument("sphere_radius must be > 0");
    if (depth_clamp <= 0.0 || depth_clamp > 2.0 * sphere_radius) {
      throw std::invalid_argument("depth_clamp must be in (0, 2*sphere_radius]");
    }
  }
};

inline double clamp_depth(double d, double clamp) {
  if (clamp <= 0.0) throw std::invalid_argument("clamp_depth: clamp must be > 0");
  return d < clamp ? d : clamp;
}

// Query interface shared by the exact and neural backends. Backends are
// immutable after construction; concurrent read-only queries are safe.
// The query counter is instrumentation for the forward-map complexity checks.
class OdfBackend {
 public:
  virtual ~OdfBackend() = default;

  virtual OdfSample query(const Ray& ray) const = 0;

  virtual std::vector<OdfSample> batch_query(std::span<const Ray> rays) const {
    std::vector<OdfSample> out(rays.size());
    for (size_t i = 0; i < rays.size(); ++i) out[i] = query(rays[i]);
    return out;
  }

  const DomainConfig& domain() const { return domain_; }

  uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }
  void reset_query_count() const { queries_.store(0, std::memory_order_relaxed); }

 protected:
  explicit OdfBackend(const DomainConfig& domain) : domain_(domain) { domain_.validate(); }
  void count_query(uint64_t n = 1) const { queries_.fetch_add(n, std::memory_order_relaxed); }

  DomainConfig domain_;

 private:
  mutable std::atomic<uint64_t> queries_{0};
};

// Labeling oracle: BVH-accelerated first hit with the self-intersection guard
// (hits with t < 1e-6 discarded). Returns the sentinel sample on a miss.
OdfSample ray_cast(const Bvh& bvh, const TriMesh& mesh, const Ray& ray,
                   const DomainConfig& domain = {}, const CastPolicy& policy = kLabelPolicy);

// Same contract via the O(faces) loop; oracle for BVH equivalence tests.
OdfSample ray_cast_brute(const TriMesh& mesh, const Ray& ray, const DomainConfig& domain = {},
                         const CastPolicy& policy = kLabelPolicy);

// Exact (non-neural) ODF over a normalized triangle mesh. Uses watertight
// surface semantics (t >= 0), so a ray starting on the surface reports depth
// ~0 in both directions -- the behavior recursive inference depends on.
class ExactOdf : public OdfBackend {
 public:
  explicit ExactOdf(TriMesh mesh, const DomainConfig& domain = {},
                    const CastPolicy& policy = kSurfacePolicy);

  OdfSample query(const Ray& ray) const override;
  std::vector<OdfSample> batch_query(std::span<const Ray> rays) const override;

  const TriMesh& mesh() const { return mesh_; }
  const Bvh& bvh() const { return bvh_; }

 private:
  TriMesh mesh_;
  Bvh bvh_;
  CastPolicy policy_;
};

std::shared_ptr<ExactOdf> exact_odf(TriMesh mesh, const DomainConfig& domain = {});

}  // namespace odf
