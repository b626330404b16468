#pragma once

#include <vector>

#include "odf/mesh.hpp"
#include "odf/vec3.hpp"

namespace odf {

// First-hit result of a ray-mesh intersection query.
struct Hit {
  double t = -1.0;
  int face = -1;
  bool ok() const { return face >= 0; }
};

// Minimum accepted hit distance. Labeling discards near-zero hits so rays that
// start on the surface (augmentation strategies) are measured against the next
// surface; the exact inference backend accepts t ~ 0 so that on-surface
// queries report zero depth (reported depth is clamped to >= 0).
struct CastPolicy {
  double t_min = 1e-6;
};

inline constexpr CastPolicy kLabelPolicy{1e-6};
inline constexpr CastPolicy kSurfacePolicy{-1e-9};

// Watertight-enough Moller-Trumbore test in double precision.
// Returns t >= policy.t_min, or a miss.
Hit intersect_triangle(const TriMesh& mesh, int face, const Ray& ray, const CastPolicy& policy);

// Reference O(faces) intersection loop. Shares the per-triangle test and tie
// rule (smallest t, then lowest face index) with the BVH path so the two are
// comparable bit for bit.
Hit intersect_brute(const TriMesh& mesh, const Ray& ray, const CastPolicy& policy = kLabelPolicy);

// Axis-aligned bounding-box binary tree, median split, <= 4 faces per leaf.
class Bvh {
 public:
  struct Node {
    Vec3 box_min, box_max;
    int left = -1;       // internal: child index; leaf: first face slot
    int right = -1;      // internal: child index; leaf: -1
    int count = 0;       // leaf: number of faces; internal: 0
    bool is_leaf() const { return count > 0; }
  };

  static Bvh build(const TriMesh& mesh);

  Hit intersect(const TriMesh& mesh, const Ray& ray, const CastPolicy& policy = kLabelPolicy) const;

  bool empty() const { return nodes_.empty(); }
  int depth() const;
  int node_count() const { return int(nodes_.size()); }
  int max_leaf_size() const;
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return face_order_; }

 private:
  std::vector<Node> nodes_;
  std::vector<int> face_order_;  // face indices, grouped per leaf
};

}  // namespace odf
