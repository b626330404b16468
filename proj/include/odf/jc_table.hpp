#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odf/vec3.hpp"

namespace odf::jc {

// Unit-cube conventions. Corner c sits at ((c>>0)&1, (c>>1)&1, (c>>2)&1).
// Edge e runs along axis e/4; edges 0-3 are x-edges, 4-7 y-edges, 8-11
// z-edges. Faces are listed with their four boundary edges in cyclic order so
// chord pairings can be classified as crossing or non-crossing.

extern const std::array<std::array<int, 2>, 12> kEdgeCorners;
extern const std::array<std::array<int, 4>, 6> kFaceEdges;

Vec3 corner_coords(int corner);

// The 24 orientation-preserving cube rotations as edge permutations.
const std::vector<std::array<int, 12>>& edge_rotations();

// A run of crossing points connected by face chords: a closed cycle in the
// interior of the surface, or an open chain where the surface boundary cuts
// through the cube.
struct Component {
  std::vector<int> edges;
  bool closed = false;
};

// Geometry-free decomposition with the canonical ambiguity rule (fewest
// components, then fewest open chains, then lexicographic order).
std::vector<Component> decompose_canonical(uint16_t mask);

// Geometry-aware decomposition: faces with three or four crossings pair their
// chords by minimal total squared length over the supplied crossing points
// (ties broken on global edge ids). Both cubes sharing a face see the same
// points and ids, so neighbors always agree on the shared chords.
std::vector<Component> decompose_geometric(uint16_t mask, const std::array<Vec3, 12>& points,
                                           const std::array<int64_t, 12>& global_edge_ids);

// Fan triangulation of every component with at least three crossings.
std::vector<std::array<uint8_t, 3>> fan_triangles(const std::vector<Component>& components);

struct Entry {
  std::vector<std::array<uint8_t, 3>> triangles;
  bool ambiguous = false;   // some face has 3 or 4 crossings
  bool has_chains = false;  // open components (surface boundary in the cube)
};

// Triangulation lookup over all 2^12 edge configurations.
class Table {
 public:
  static Table generate();

  const Entry& entry(uint16_t mask) const { return entries_[mask]; }
  size_t size() const { return entries_.size(); }

  // Number of equivalence classes under the 24 rotations (218).
  int rotation_class_count() const;

  void save(const std::string& path) const;
  static Table load(const std::string& path);

  // Process-wide table: loaded from $ODF_CACHE_DIR/jc_table_v1.bin when
  // present, generated (and cached when possible) otherwise.
  static const Table& cached();

 private:
  std::vector<Entry> entries_;
};

}  // namespace odf::jc
