#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odf/camera.hpp"
#include "odf/odf.hpp"
#include "odf/rng.hpp"

namespace odf {

// A 5D ray with its ground-truth labels. Non-intersecting rays carry the
// sentinel depth from DomainConfig.
struct LabeledRay {
  Ray ray;
  double depth = 0.0;
  bool intersects = false;
};

enum class Provenance : uint8_t { mesh = 0, depth_maps = 1 };

struct DatasetCounts {
  uint64_t strategy_a = 0;
  uint64_t strategy_b = 0;
  uint64_t aug_a = 0;
  uint64_t aug_b = 0;
  uint64_t aug_c = 0;
  uint64_t depth_pixels = 0;
};

struct RayDataset {
  std::vector<LabeledRay> rays;
  Provenance provenance = Provenance::mesh;
  uint64_t seed = 0;
  DatasetCounts counts;

  size_t size() const { return rays.size(); }
  bool empty() const { return rays.empty(); }
  double intersect_fraction() const;
};

// Recursive-property augmentations. Perturbations stay below perturb_max
// (0.1 single-instance, 0.01 generalization); each enabled strategy adds
// ratio * base_size rays.
struct AugmentConfig {
  bool enable_a = false;
  bool enable_b = false;
  bool enable_c = false;
  double perturb_max = 0.1;
  double ratio = 1.0;

  static AugmentConfig parse(const std::string& letters, double perturb_max = 0.1);
  bool any() const { return enable_a || enable_b || enable_c; }
};

// Mesh-to-rays sampling: 60% free rays (origin uniform in the domain ball,
// direction uniform on S^2), 40% surface-anchored rays (end point area-uniform
// on the mesh). Every ray is labeled by the exact ray-cast oracle. The free-ray
// pool is rebalanced until its intersecting fraction lands in [0.4, 0.6]
// (when the geometry allows it).
RayDataset sample_rays_from_mesh(const TriMesh& mesh, const Bvh& bvh, uint64_t n_total,
                                 uint64_t seed, const DomainConfig& domain = {},
                                 bool balance = true);

// One labeled ray per pixel of each depth map; origins are the camera centers.
RayDataset sample_rays_from_depth_maps(const std::vector<DepthImage>& maps,
                                       const DomainConfig& domain = {});

// Appends augmented rays to a copy of `base`. With a mesh oracle every
// augmented label is re-verified by ray casting; without one (depth-map
// provenance) only strategy (a) is available and labels follow the
// Recursive Property arithmetically.
RayDataset augment_rays(const RayDataset& base, const TriMesh* mesh, const Bvh* bvh,
                        const AugmentConfig& aug, uint64_t seed, const DomainConfig& domain = {});

// --- ODFR on-disk format ------------------------------------------------------
// header: magic "ODFR", version u32, count u64, seed u64, provenance u8;
// per ray: ox,oy,oz,dx,dy,dz,depth as float64 plus one intersect byte.

void save_ray_dataset(const std::string& path, const RayDataset& dataset);
RayDataset load_ray_dataset(const std::string& path);
void export_ray_dataset_csv(const std::string& path, const RayDataset& dataset);

}  // namespace odf
