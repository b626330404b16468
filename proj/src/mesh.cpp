#include "odf/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace odf {

double TriMesh::face_area(int face) const {
  Vec3 a = face_vertex(face, 0);
  Vec3 b = face_vertex(face, 1);
  Vec3 c = face_vertex(face, 2);
  return 0.5 * norm(cross(b - a, c - a));
}

Vec3 TriMesh::bounds_min() const {
  Vec3 lo{1e300, 1e300, 1e300};
  for (const Vec3& v : vertices) lo = min_vec(lo, v);
  return lo;
}

Vec3 TriMesh::bounds_max() const {
  Vec3 hi{-1e300, -1e300, -1e300};
  for (const Vec3& v : vertices) hi = max_vec(hi, v);
  return hi;
}

NormalizeInfo normalize_mesh(TriMesh& mesh) {
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw std::invalid_argument("normalize_mesh: empty mesh");
  }
  Vec3 center = (mesh.bounds_min() + mesh.bounds_max()) * 0.5;
  double max_norm = 0.0;
  for (const Vec3& v : mesh.vertices) max_norm = std::max(max_norm, norm(v - center));
  if (max_norm == 0.0) throw std::invalid_argument("normalize_mesh: degenerate point mesh");
  double scale = 1.0 / max_norm;
  for (Vec3& v : mesh.vertices) v = (v - center) * scale;
  return NormalizeInfo{scale, center};
}

int remove_degenerate_faces(TriMesh& mesh, double min_area) {
  int removed = 0;
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.faces.size());
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    bool repeated = f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
    if (repeated || mesh.face_area(int(i)) < min_area) {
      ++removed;
      continue;
    }
    kept.push_back(f);
  }
  mesh.faces = std::move(kept);
  return removed;
}

// --- OBJ -------------------------------------------------------------------

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open OBJ file: " + path);
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x >> v.y >> v.z;
      if (!ss) throw std::runtime_error("malformed OBJ vertex in " + path);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // accept "i", "i/j", "i/j/k"; only the vertex index is used
        size_t slash = tok.find('/');
        int i = std::stoi(slash == std::string::npos ? tok : tok.substr(0, slash));
        if (i < 0) i = int(mesh.vertices.size()) + i + 1;
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) throw std::runtime_error("OBJ face with <3 vertices in " + path);
      for (size_t k = 2; k < idx.size(); ++k) {
        mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
      }
    }
  }
  for (const auto& f : mesh.faces) {
    for (int i : f) {
      if (i < 0 || i >= int(mesh.vertices.size())) {
        throw std::runtime_error("OBJ face index out of range in " + path);
      }
    }
  }
  return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write OBJ file: " + path);
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << "\n";
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  }
}

// --- PLY (binary little-endian) ---------------------------------------------

TriMesh load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PLY file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
    throw std::runtime_error("not a PLY file: " + path);
  }
  size_t n_verts = 0, n_faces = 0;
  bool doubles = false;
  std::string element;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian") {
        throw std::runtime_error("PLY loader supports binary_little_endian only: " + path);
      }
    } else if (tag == "element") {
      size_t count;
      ss >> element >> count;
      if (element == "vertex") n_verts = count;
      if (element == "face") n_faces = count;
    } else if (tag == "property" && element == "vertex") {
      std::string type;
      ss >> type;
      if (type == "double") doubles = true;
    } else if (tag == "end_header") {
      break;
    }
  }
  TriMesh mesh;
  mesh.vertices.resize(n_verts);
  for (size_t i = 0; i < n_verts; ++i) {
    if (doubles) {
      double xyz[3];
      in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
      mesh.vertices[i] = {xyz[0], xyz[1], xyz[2]};
    } else {
      float xyz[3];
      in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
      mesh.vertices[i] = {xyz[0], xyz[1], xyz[2]};
    }
  }
  mesh.faces.reserve(n_faces);
  for (size_t i = 0; i < n_faces; ++i) {
    unsigned char count;
    in.read(reinterpret_cast<char*>(&count), 1);
    std::vector<int> idx(count);
    in.read(reinterpret_cast<char*>(idx.data()), count * sizeof(int));
    for (size_t k = 2; k < idx.size(); ++k) {
      mesh.faces.push_back({idx[0], int(idx[k - 1]), int(idx[k])});
    }
  }
  if (!in) throw std::runtime_error("truncated PLY file: " + path);
  return mesh;
}

void save_ply(const std::string& path, const TriMesh& mesh, const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PLY file: " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  if (!comment.empty()) out << "comment " << comment << "\n";
  out << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices) {
    double xyz[3] = {v.x, v.y, v.z};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.faces) {
    unsigned char count = 3;
    int idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(&count), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
}

static bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

TriMesh load_mesh(const std::string& path) {
  TriMesh mesh = ends_with(path, ".ply") ? load_ply(path) : load_obj(path);
  remove_degenerate_faces(mesh);
  if (mesh.empty()) throw std::runtime_error("mesh has no usable faces: " + path);
  return mesh;
}

void save_mesh(const std::string& path, const TriMesh& mesh, const std::string& comment) {
  if (ends_with(path, ".ply")) {
    save_ply(path, mesh, comment);
  } else {
    save_obj(path, mesh, comment);
  }
}

void save_normalize_sidecar(const std::string& path, const NormalizeInfo& info) {
  nlohmann::json j;
  j["scale"] = info.scale;
  j["offset"] = {info.offset.x, info.offset.y, info.offset.z};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sidecar: " + path);
  out << j.dump(2) << "\n";
}

NormalizeInfo load_normalize_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sidecar: " + path);
  nlohmann::json j;
  in >> j;
  NormalizeInfo info;
  info.scale = j.at("scale").get<double>();
  auto o = j.at("offset");
  info.offset = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
  return info;
}

// --- procedural shapes -------------------------------------------------------

TriMesh make_icosphere(int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {
      {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (Vec3& v : mesh.vertices) v = normalized(v);
  mesh.faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = normalized((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
      int idx = int(mesh.vertices.size());
      mesh.vertices.push_back(m);
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  return mesh;
}

TriMesh make_open_quad() {
  const double a = std::sqrt(0.5);
  TriMesh mesh;
  mesh.vertices = {{-a, -a, 0}, {a, -a, 0}, {a, a, 0}, {-a, a, 0}};
  mesh.faces = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

TriMesh make_half_sphere(int rings, int segments) {
  TriMesh mesh;
  const double pi = 3.14159265358979323846;
  // rows from equator (z=0) to the pole
  for (int r = 0; r < rings; ++r) {
    double lat = (pi / 2.0) * double(r) / double(rings);
    double z = std::sin(lat), rad = std::cos(lat);
    for (int s = 0; s < segments; ++s) {
      double lon = 2.0 * pi * double(s) / double(segments);
      mesh.vertices.push_back({rad * std::cos(lon), rad * std::sin(lon), z});
    }
  }
  int pole = int(mesh.vertices.size());
  mesh.vertices.push_back({0, 0, 1});
  auto vid = [&](int r, int s) { return r * segments + (s % segments); };
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({vid(r, s), vid(r, s + 1), vid(r + 1, s)});
      mesh.faces.push_back({vid(r, s + 1), vid(r + 1, s + 1), vid(r + 1, s)});
    }
  }
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({vid(rings - 1, s), vid(rings - 1, s + 1), pole});
  }
  return mesh;
}

TriMesh make_torus(double major, double minor, int seg_major, int seg_minor) {
  TriMesh mesh;
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < seg_major; ++i) {
    double u = 2.0 * pi * double(i) / double(seg_major);
    for (int j = 0; j < seg_minor; ++j) {
      double v = 2.0 * pi * double(j) / double(seg_minor);
      double r = major + minor * std::cos(v);
      mesh.vertices.push_back({r * std::cos(u), r * std::sin(u), minor * std::sin(v)});
    }
  }
  auto vid = [&](int i, int j) { return (i % seg_major) * seg_minor + (j % seg_minor); };
  for (int i = 0; i < seg_major; ++i) {
    for (int j = 0; j < seg_minor; ++j) {
      mesh.faces.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
      mesh.faces.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return mesh;
}

TriMesh make_ellipsoid(double rx, double ry, double rz, int subdivisions) {
  TriMesh mesh = make_icosphere(subdivisions);
  for (Vec3& v : mesh.vertices) v = {v.x * rx, v.y * ry, v.z * rz};
  return mesh;
}

TriMesh resolve_mesh_input(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) {
    std::string name = spec.substr(8);
    if (name == "sphere") return make_icosphere(4);
    if (name == "sphere-fine") return make_icosphere(6);
    if (name == "quad") return make_open_quad();
    if (name == "halfsphere") return make_half_sphere();
    if (name == "torus") return make_torus();
    throw std::runtime_error("unknown builtin shape: " + name);
  }
  return load_mesh(spec);
}

// --- topology ---------------------------------------------------------------

namespace {
struct EdgeKey {
  int a, b;
  bool operator<(const EdgeKey& o) const { return a != o.a ? a < o.a : b < o.b; }
};
}  // namespace

static std::map<EdgeKey, int> edge_use_counts(const TriMesh& mesh) {
  std::map<EdgeKey, int> counts;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      counts[EdgeKey{a, b}]++;
    }
  }
  return counts;
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.empty()) return false;
  for (const auto& [edge, count] : edge_use_counts(mesh)) {
    (void)edge;
    if (count != 2) return false;
  }
  return true;
}

int boundary_loop_count(const TriMesh& mesh) {
  auto counts = edge_use_counts(mesh);
  // adjacency over boundary edges only
  std::unordered_map<int, std::vector<int>> adj;
  int boundary_edges = 0;
  for (const auto& [edge, count] : counts) {
    if (count != 1) continue;
    ++boundary_edges;
    adj[edge.a].push_back(edge.b);
    adj[edge.b].push_back(edge.a);
  }
  if (boundary_edges == 0) return 0;
  std::unordered_map<int, bool> visited;
  int loops = 0;
  for (const auto& [v, nbrs] : adj) {
    (void)nbrs;
    if (visited[v]) continue;
    ++loops;
    // BFS over this boundary component
    std::vector<int> stack{v};
    visited[v] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int w : adj[u]) {
        if (!visited[w]) {
          visited[w] = true;
          stack.push_back(w);
        }
      }
    }
  }
  return loops;
}

// --- surface sampling ---------------------------------------------------------

SurfaceSampler::SurfaceSampler(const TriMesh& mesh) : mesh_(mesh) {
  cumulative_.resize(mesh.faces.size());
  double acc = 0.0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    acc += mesh.face_area(int(i));
    cumulative_[i] = acc;
  }
  total_area_ = acc;
  if (total_area_ <= 0.0) throw std::invalid_argument("SurfaceSampler: zero-area mesh");
}

Vec3 SurfaceSampler::sample(Rng& rng) const {
  double target = rng.next_double() * total_area_;
  auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
  int face = int(std::min<size_t>(it - cumulative_.begin(), cumulative_.size() - 1));
  // uniform barycentric point
  double r1 = std::sqrt(rng.next_double());
  double r2 = rng.next_double();
  Vec3 a = mesh_.face_vertex(face, 0);
  Vec3 b = mesh_.face_vertex(face, 1);
  Vec3 c = mesh_.face_vertex(face, 2);
  return a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
}

}  // namespace odf
