#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odf/camera.hpp"
#include "odf/inference.hpp"
#include "odf/jc_table.hpp"
#include "odf/odf.hpp"
#include "odf/rng.hpp"

namespace odf {

// --- depth maps -----------------------------------------------------------------

// Recursive inference per pixel (4 rounds by default since cameras sit far
// out on the enclosing sphere). Background pixels are 0.
DepthImage render_depth_map(const OdfBackend& backend, const Camera& camera,
                            const InferenceConfig& cfg = InferenceConfig{4, 0.5, 0.01});

// --- point clouds ----------------------------------------------------------------

// Casts n_rays (origins uniform in the domain ball, directions uniform on
// S^2), runs recursive inference, and keeps the surface points of mask-true
// rays. Throws when nothing survives.
std::vector<Vec3> extract_point_cloud(const OdfBackend& backend, size_t n_rays, uint64_t seed,
                                      const InferenceConfig& cfg = {},
                                      std::optional<size_t> fps_count = std::nullopt);

// Greedy farthest-point downsampling, seeded at the first point.
std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, size_t count);

void save_point_cloud(const std::string& path, std::span<const Vec3> points,
                      const std::string& comment = "");
std::vector<Vec3> load_point_cloud(const std::string& path);

// --- UDF / SDF -------------------------------------------------------------------

// min over N sampled directions of the recursive-inference depth, restricted
// to mask-true directions; +inf when nothing intersects.
double udf_query(const OdfBackend& backend, const Vec3& x, int n_dirs, Rng& rng,
                 const InferenceConfig& cfg = {});

// -1 when all N direction queries report intersection (interior of a closed
// surface), +1 otherwise. Raw backend queries, no recursion.
int sdf_sign_query(const OdfBackend& backend, const Vec3& x, int n_dirs, Rng& rng);

// --- voxel occupancy --------------------------------------------------------------

struct VoxelGrid {
  int n = 0;  // cells per axis over [-1, 1]^3
  Vec3 origin{-1.0, -1.0, -1.0};
  double cell = 0.0;  // 2 / n
  std::vector<uint8_t> occupancy;

  size_t index(int i, int j, int k) const { return (size_t(k) * n + j) * n + i; }
  bool at(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  Vec3 center(int i, int j, int k) const {
    return origin + Vec3{(i + 0.5) * cell, (j + 0.5) * cell, (k + 0.5) * cell};
  }
  size_t occupied_count() const;
};

VoxelGrid voxelize(const OdfBackend& backend, int n, int n_dirs, uint64_t seed);

// Run-length-encoded binary with a JSON header.
void save_voxel_grid(const std::string& path, const VoxelGrid& grid,
                     const std::string& config_hash = "");
VoxelGrid load_voxel_grid(const std::string& path);

// --- jumping cubes -----------------------------------------------------------------

struct JumpingCubesConfig {
  int n = 64;           // lattice cells per axis over [-R, R]^3, R = domain sphere radius
  int steps_adjust = 1;  // b in the column-jumping schedule
  int smooth_iterations = 5;
  double smooth_weight = 0.5;
  bool midpoint_vertices = false;  // table-debug mode: crossings at edge midpoints
  InferenceConfig inference;       // reserved for neural-specific tuning of tau

  void validate() const {
    if (n < 2) throw std::invalid_argument("JumpingCubesConfig: n must be >= 2");
    if (steps_adjust < 0) throw std::invalid_argument("JumpingCubesConfig: b must be >= 0");
  }
};

// Depths for the n+1 lattice vertices of one column, following the jumping
// schedule: query, fill `steps` vertices by the Recursive Property, advance.
// Positions are derived from integer vertex indices so a forced steps=1 walk
// reproduces dense per-vertex evaluation bit for bit. Misses fill the
// sentinel default. Returns the number of backend queries made.
int jc_column(const OdfBackend& backend, const Vec3& start, int axis, int n, double spacing,
              int steps_adjust, std::span<double> out_depths);

// Per-axis edge crossing bits and sub-cell offsets for an n^3-cell lattice.
struct EdgeIntersectionGrid {
  int n = 0;
  double radius = 0.0;   // lattice spans [-radius, radius]^3
  double spacing = 0.0;  // 2 * radius / n
  std::vector<uint8_t> bits[3];
  std::vector<float> offsets[3];
  uint64_t backend_queries = 0;

  size_t edge_index(int axis, int i, int j, int k) const {
    const int nx = axis == 0 ? n : n + 1;
    const int ny = axis == 1 ? n : n + 1;
    return (size_t(k) * ny + j) * nx + i;
  }
  bool crossed(int axis, int i, int j, int k) const {
    return bits[axis][edge_index(axis, i, j, k)] != 0;
  }
  double offset(int axis, int i, int j, int k) const {
    return offsets[axis][edge_index(axis, i, j, k)];
  }
  Vec3 vertex(int i, int j, int k) const {
    return Vec3{-radius + i * spacing, -radius + j * spacing, -radius + k * spacing};
  }
  size_t crossed_count() const;
};

// Runs jc_column over the 3 * (n+1)^2 boundary columns. An edge (v, v+axis)
// is crossed when the depth at v along the axis is below the edge length.
EdgeIntersectionGrid build_edge_grid(const OdfBackend& backend, const JumpingCubesConfig& cfg);

// Edge grid -> per-cube 12-bit key -> triangulation (table lookup; cubes with
// ambiguous faces re-derive chords geometrically so neighbors agree) ->
// vertex welding at shared edge crossings -> boundary-pinned Laplacian
// smoothing. Open surfaces keep their boundary; an empty grid gives an empty
// mesh.
TriMesh jumping_cubes(const OdfBackend& backend, const JumpingCubesConfig& cfg);
TriMesh jumping_cubes_from_grid(const EdgeIntersectionGrid& grid, const JumpingCubesConfig& cfg);

// Uniform-weight Jacobi smoothing; boundary vertices never move.
void laplacian_smooth(TriMesh& mesh, int iterations, double weight);

}  // namespace odf
