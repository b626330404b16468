#pragma once

#include <array>
#include <string>
#include <vector>

#include "odf/rng.hpp"
#include "odf/vec3.hpp"

namespace odf {

// Indexed triangle mesh. Open surfaces are first-class: no watertightness
// requirement anywhere in the geometry layer.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
  Vec3 face_vertex(int face, int corner) const { return vertices[faces[face][corner]]; }
  double face_area(int face) const;
  Vec3 bounds_min() const;
  Vec3 bounds_max() const;
};

// Parameters of normalize_mesh, recorded so outputs can be mapped back:
//   normalized = scale * (original - offset)
struct NormalizeInfo {
  double scale = 1.0;
  Vec3 offset{0.0, 0.0, 0.0};
};

// Translates the bounding-box center to the origin and scales uniformly so the
// max vertex norm equals 1.0 (inside the radius-1.3 domain sphere with margin).
NormalizeInfo normalize_mesh(TriMesh& mesh);

// Drops zero-area and repeated-index faces; returns the number removed.
int remove_degenerate_faces(TriMesh& mesh, double min_area = 1e-14);

// --- file I/O -------------------------------------------------------------

// OBJ (ASCII, v/f records only) or binary little-endian PLY, by extension.
TriMesh load_mesh(const std::string& path);
void save_mesh(const std::string& path, const TriMesh& mesh, const std::string& comment = "");

TriMesh load_obj(const std::string& path);
void save_obj(const std::string& path, const TriMesh& mesh, const std::string& comment = "");
TriMesh load_ply(const std::string& path);
void save_ply(const std::string& path, const TriMesh& mesh, const std::string& comment = "");

void save_normalize_sidecar(const std::string& path, const NormalizeInfo& info);
NormalizeInfo load_normalize_sidecar(const std::string& path);

// --- procedural test shapes ------------------------------------------------

// Unit-radius icosphere; `subdivisions` quadruples the face count each level.
TriMesh make_icosphere(int subdivisions);
// Two triangles spanning a square in the z=0 plane, corner norm 1.
TriMesh make_open_quad();
// Open upper hemisphere (z >= 0) of the unit sphere; boundary at the equator.
TriMesh make_half_sphere(int rings = 16, int segments = 48);
// Torus around the z axis; defaults fit inside the unit ball.
TriMesh make_torus(double major = 0.7, double minor = 0.3, int seg_major = 64, int seg_minor = 32);
// Axis-aligned ellipsoid from a subdivided icosphere.
TriMesh make_ellipsoid(double rx, double ry, double rz, int subdivisions = 3);

// Resolves "builtin:<name>" (sphere, quad, halfsphere, torus) or loads a file.
TriMesh resolve_mesh_input(const std::string& spec);

// --- topology helpers -------------------------------------------------------

// Edges incident to exactly one face, grouped into loops.
int boundary_loop_count(const TriMesh& mesh);
// True when every undirected edge is used by exactly two faces.
bool is_watertight(const TriMesh& mesh);

// Area-weighted uniform sampling of the surface.
class SurfaceSampler {
 public:
  explicit SurfaceSampler(const TriMesh& mesh);
  Vec3 sample(Rng& rng) const;
  double total_area() const { return total_area_; }

 private:
  const TriMesh& mesh_;
  std::vector<double> cumulative_;
  double total_area_ = 0.0;
};

}  // namespace odf
