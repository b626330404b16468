#pragma once

#include <span>
#include <utility>
#include <vector>

#include "odf/odf.hpp"

namespace odf {

// Recursive inference parameters: n query rounds, the depth clamp, and the
// surface margin below which the final residual counts as "arrived".
struct InferenceConfig {
  int iterations = 3;            // 3 for point clouds, 4 for depth rendering
  double clamp = 0.5;
  double surface_margin = 0.01;  // about one lattice cell at n=128

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (surface_margin <= 0.0) throw std::invalid_argument("surface_margin must be > 0");
    if (clamp <= 0.0) throw std::invalid_argument("clamp must be > 0");
  }
};

struct InferenceResult {
  Vec3 surface_point;
  double total_depth = 0.0;  // signed accumulation of steps along the ray direction
  bool mask = false;
};

// One clamped query: (min(depth, clamp), intersection bit).
std::pair<double, bool> single_inference(const OdfBackend& backend, const Ray& ray, double clamp);

// Iterative refinement along the ray: the first round steps forward by the
// clamped depth; later rounds evaluate forward and backward queries and step
// by the smaller one (ties go forward); a final forward/backward pair gates
// the mask on the residual being below the surface margin.
InferenceResult recursive_inference(const OdfBackend& backend, const Ray& ray,
                                    const InferenceConfig& cfg = {});

// Elementwise recursive_inference, parallel over rays; output is identical
// regardless of worker count.
std::vector<InferenceResult> batch_recursive_inference(const OdfBackend& backend,
                                                       std::span<const Ray> rays,
                                                       const InferenceConfig& cfg = {});

}  // namespace odf
