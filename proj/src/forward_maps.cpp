#include "odf/forward_maps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include "json.hpp"
#include "odf/serialize.hpp"

namespace odf {

// --- depth maps -----------------------------------------------------------------

DepthImage render_depth_map(const OdfBackend& backend, const Camera& camera,
                            const InferenceConfig& cfg) {
  DepthImage image;
  image.width = camera.width;
  image.height = camera.height;
  image.camera = camera;
  image.values.assign(size_t(camera.width) * camera.height, 0.0f);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      InferenceResult r = recursive_inference(backend, camera.pixel_ray(u, v), cfg);
      if (r.mask && r.total_depth > 0.0) image.at(u, v) = float(r.total_depth);
    }
  }
  return image;
}

// --- point clouds ----------------------------------------------------------------

std::vector<Vec3> extract_point_cloud(const OdfBackend& backend, size_t n_rays, uint64_t seed,
                                      const InferenceConfig& cfg,
                                      std::optional<size_t> fps_count) {
  if (n_rays == 0) throw std::invalid_argument("extract_point_cloud: n_rays must be >= 1");
  const double radius = backend.domain().sphere_radius;
  std::vector<Ray> rays;
  rays.reserve(n_rays);
  Rng rng(seed, 11);
  for (size_t i = 0; i < n_rays; ++i) {
    rays.emplace_back(uniform_ball_sample(rng, radius), uniform_dir_sample(rng));
  }
  std::vector<InferenceResult> results = batch_recursive_inference(backend, rays, cfg);
  std::vector<Vec3> points;
  for (const InferenceResult& r : results) {
    if (r.mask) points.push_back(r.surface_point);
  }
  if (points.empty()) {
    throw std::runtime_error(
        "extract_point_cloud: no ray produced a surface point (degenerate backend?)");
  }
  if (fps_count.has_value() && *fps_count < points.size()) {
    points = farthest_point_sample(points, *fps_count);
  }
  return points;
}

std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, size_t count) {
  if (points.empty() || count == 0) return {};
  count = std::min(count, points.size());
  std::vector<Vec3> out;
  out.reserve(count);
  std::vector<double> dist2(points.size(), std::numeric_limits<double>::infinity());
  size_t pick = 0;
  for (size_t k = 0; k < count; ++k) {
    out.push_back(points[pick]);
    size_t next = 0;
    double best = -1.0;
    for (size_t i = 0; i < points.size(); ++i) {
      double d = norm2(points[i] - points[pick]);
      if (d < dist2[i]) dist2[i] = d;
      if (dist2[i] > best) {
        best = dist2[i];
        next = i;
      }
    }
    pick = next;
  }
  return out;
}

void save_point_cloud(const std::string& path, std::span<const Vec3> points,
                      const std::string& comment) {
  TriMesh cloud;
  cloud.vertices.assign(points.begin(), points.end());
  save_mesh(path, cloud, comment);
}

std::vector<Vec3> load_point_cloud(const std::string& path) {
  TriMesh cloud = [&] {
    // point clouds are vertex-only meshes; bypass the face cleanup in load_mesh
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".ply") == 0) return load_ply(path);
    return load_obj(path);
  }();
  return cloud.vertices;
}

// --- UDF / SDF -------------------------------------------------------------------

double udf_query(const OdfBackend& backend, const Vec3& x, int n_dirs, Rng& rng,
                 const InferenceConfig& cfg) {
  if (n_dirs < 1) throw std::invalid_argument("udf_query: n_dirs must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_dirs; ++i) {
    Ray ray(x, uniform_dir_sample(rng));
    InferenceResult r = recursive_inference(backend, ray, cfg);
    if (r.mask) best = std::min(best, std::max(0.0, r.total_depth));
  }
  return best;
}

int sdf_sign_query(const OdfBackend& backend, const Vec3& x, int n_dirs, Rng& rng) {
  if (n_dirs < 1) throw std::invalid_argument("sdf_sign_query: n_dirs must be >= 1");
  for (int i = 0; i < n_dirs; ++i) {
    if (!backend.query(Ray(x, uniform_dir_sample(rng))).intersects()) return +1;
  }
  return -1;
}

// --- voxel occupancy ---------------------------------------------------------------

size_t VoxelGrid::occupied_count() const {
  size_t c = 0;
  for (uint8_t b : occupancy) c += b != 0;
  return c;
}

VoxelGrid voxelize(const OdfBackend& backend, int n, int n_dirs, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("voxelize: n must be >= 2");
  VoxelGrid grid;
  grid.n = n;
  grid.cell = 2.0 / n;
  grid.occupancy.assign(size_t(n) * n * n, 0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        size_t idx = grid.index(i, j, k);
        Rng rng(seed, 0x5d0f00d + idx);  // per-cell stream keeps parallel runs deterministic
        grid.occupancy[idx] =
            sdf_sign_query(backend, grid.center(i, j, k), n_dirs, rng) < 0 ? 1 : 0;
      }
    }
  }
  return grid;
}

void save_voxel_grid(const std::string& path, const VoxelGrid& grid,
                     const std::string& config_hash) {
  nlohmann::json header;
  header["n"] = grid.n;
  header["origin"] = {grid.origin.x, grid.origin.y, grid.origin.z};
  header["cell"] = grid.cell;
  header["encoding"] = "rle-u32";
  if (!config_hash.empty()) header["config_hash"] = config_hash;
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write voxel grid: " + path);
  const char magic[4] = {'O', 'D', 'F', 'V'};
  write_magic(out, magic);
  write_string(out, header_text);
  // runs of equal occupancy values
  size_t i = 0;
  const size_t total = grid.occupancy.size();
  while (i < total) {
    uint8_t value = grid.occupancy[i];
    size_t j = i;
    while (j < total && grid.occupancy[j] == value && j - i < 0xffffffffull) ++j;
    write_pod<uint32_t>(out, uint32_t(j - i));
    write_pod<uint8_t>(out, value);
    i = j;
  }
  if (!out) throw std::runtime_error("short write on voxel grid: " + path);
}

VoxelGrid load_voxel_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open voxel grid: " + path);
  const char magic[4] = {'O', 'D', 'F', 'V'};
  expect_magic(in, magic, "ODFV");
  nlohmann::json header = nlohmann::json::parse(read_string(in));
  VoxelGrid grid;
  grid.n = header.at("n").get<int>();
  auto o = header.at("origin");
  grid.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
  grid.cell = header.at("cell").get<double>();
  const size_t total = size_t(grid.n) * grid.n * grid.n;
  grid.occupancy.reserve(total);
  while (grid.occupancy.size() < total) {
    uint32_t run = read_pod<uint32_t>(in);
    uint8_t value = read_pod<uint8_t>(in);
    grid.occupancy.insert(grid.occupancy.end(), run, value);
  }
  if (grid.occupancy.size() != total) throw std::runtime_error("voxel grid size mismatch: " + path);
  return grid;
}

// --- jumping cubes -----------------------------------------------------------------

int jc_column(const OdfBackend& backend, const Vec3& start, int axis, int n, double spacing,
              int steps_adjust, std::span<double> out_depths) {
  if (int(out_depths.size()) != n + 1) {
    throw std::invalid_argument("jc_column: output span must hold n+1 vertices");
  }
  Vec3 dir_vec{0.0, 0.0, 0.0};
  dir_vec[axis] = 1.0;
  UnitDir dir(dir_vec);
  const double sentinel = backend.domain().nonintersect_sentinel;
  int queries = 0;
  int i = 0;
  while (i <= n) {
    Vec3 x = start;
    x[axis] += double(i) * spacing;  // from the integer index, never accumulated
    OdfSample s = backend.query(Ray(x, dir));
    ++queries;
    const double depth = s.intersects() ? s.depth : sentinel;
    const int steps = std::max(1, int(std::floor(depth / spacing - double(steps_adjust))));
    for (int k = 0; k < steps && i + k <= n; ++k) {
      out_depths[size_t(i + k)] = s.intersects() ? depth - double(k) * spacing : sentinel;
    }
    i += steps;
  }
  return queries;
}

size_t EdgeIntersectionGrid::crossed_count() const {
  size_t c = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (uint8_t b : bits[axis]) c += b != 0;
  }
  return c;
}

EdgeIntersectionGrid build_edge_grid(const OdfBackend& backend, const JumpingCubesConfig& cfg) {
  cfg.validate();
  EdgeIntersectionGrid grid;
  grid.n = cfg.n;
  grid.radius = backend.domain().sphere_radius;
  grid.spacing = 2.0 * grid.radius / cfg.n;
  const int n = cfg.n;
  for (int axis = 0; axis < 3; ++axis) {
    const size_t edges = size_t(n) * (n + 1) * (n + 1);
    grid.bits[axis].assign(edges, 0);
    grid.offsets[axis].assign(edges, 0.0f);
  }
  const uint64_t queries_before = backend.query_count();

  for (int axis = 0; axis < 3; ++axis) {
    const int u_axis = axis == 0 ? 1 : 0;              // first transverse axis
    const int v_axis = axis == 2 ? 1 : 2;              // second transverse axis
#pragma omp parallel for schedule(static)
    for (int v = 0; v <= n; ++v) {
      std::vector<double> depths(size_t(n) + 1);
      for (int u = 0; u <= n; ++u) {
        Vec3 start{-grid.radius, -grid.radius, -grid.radius};
        start[u_axis] += double(u) * grid.spacing;
        start[v_axis] += double(v) * grid.spacing;
        jc_column(backend, start, axis, n, grid.spacing, cfg.steps_adjust, depths);
        for (int i = 0; i < n; ++i) {
          int coords[3];
          coords[axis] = i;
          coords[u_axis] = u;
          coords[v_axis] = v;
          const double d = depths[size_t(i)];
          if (d < grid.spacing) {
            size_t idx = grid.edge_index(axis, coords[0], coords[1], coords[2]);
            grid.bits[axis][idx] = 1;
            grid.offsets[axis][idx] = float(d / grid.spacing);
          }
        }
      }
    }
  }
  grid.backend_queries = backend.query_count() - queries_before;
  return grid;
}

namespace {

// local cube edge -> (axis, lower-vertex offsets in the two transverse axes)
struct LocalEdge {
  int axis;
  int du[3];  // offset of the edge's lower vertex within the cube
};

constexpr LocalEdge local_edge(int e) {
  const int axis = e / 4;
  const int k = e % 4;
  const int b1 = k & 1, b2 = (k >> 1) & 1;
  LocalEdge le{axis, {0, 0, 0}};
  if (axis == 0) {
    le.du[1] = b1;
    le.du[2] = b2;
  } else if (axis == 1) {
    le.du[0] = b1;
    le.du[2] = b2;
  } else {
    le.du[0] = b1;
    le.du[1] = b2;
  }
  return le;
}

}  // namespace

TriMesh jumping_cubes_from_grid(const EdgeIntersectionGrid& grid, const JumpingCubesConfig& cfg) {
  const int n = grid.n;
  const jc::Table& table = jc::Table::cached();

  TriMesh mesh;
  std::unordered_map<int64_t, int> weld;  // global edge id -> mesh vertex

  auto global_edge_id = [&](int axis, int i, int j, int k) -> int64_t {
    return int64_t(axis) * (int64_t(n) * (n + 1) * (n + 1)) +
           int64_t(grid.edge_index(axis, i, j, k));
  };
  auto crossing_point = [&](int axis, int i, int j, int k) -> Vec3 {
    Vec3 p = grid.vertex(i, j, k);
    double offset = cfg.midpoint_vertices ? 0.5 : grid.offset(axis, i, j, k);
    p[axis] += offset * grid.spacing;
    return p;
  };
  auto weld_vertex = [&](int64_t id, const Vec3& p) -> int {
    auto [it, inserted] = weld.try_emplace(id, int(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(p);
    return it->second;
  };

  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        uint16_t mask = 0;
        std::array<Vec3, 12> points;
        std::array<int64_t, 12> ids;
        std::array<int, 12> vertex_ids;
        for (int e = 0; e < 12; ++e) {
          const LocalEdge le = local_edge(e);
          const int ei = i + le.du[0], ej = j + le.du[1], ek = k + le.du[2];
          if (!grid.crossed(le.axis, ei, ej, ek)) continue;
          mask |= uint16_t(1u << e);
          points[size_t(e)] = crossing_point(le.axis, ei, ej, ek);
          ids[size_t(e)] = global_edge_id(le.axis, ei, ej, ek);
        }
        if (mask == 0) continue;
        const jc::Entry& entry = table.entry(mask);
        std::vector<std::array<uint8_t, 3>> triangles;
        if (entry.ambiguous && !cfg.midpoint_vertices) {
          triangles = jc::fan_triangles(jc::decompose_geometric(mask, points, ids));
        } else {
          triangles = entry.triangles;
        }
        if (triangles.empty()) continue;
        for (int e = 0; e < 12; ++e) {
          if (mask & (1u << e)) vertex_ids[size_t(e)] = weld_vertex(ids[size_t(e)], points[size_t(e)]);
        }
        for (const auto& t : triangles) {
          mesh.faces.push_back({vertex_ids[t[0]], vertex_ids[t[1]], vertex_ids[t[2]]});
        }
      }
    }
  }

  laplacian_smooth(mesh, cfg.smooth_iterations, cfg.smooth_weight);
  return mesh;
}

TriMesh jumping_cubes(const OdfBackend& backend, const JumpingCubesConfig& cfg) {
  cfg.validate();
  EdgeIntersectionGrid grid = build_edge_grid(backend, cfg);
  return jumping_cubes_from_grid(grid, cfg);
}

void laplacian_smooth(TriMesh& mesh, int iterations, double weight) {
  if (iterations <= 0 || mesh.vertices.empty()) return;

  std::vector<std::vector<int>> neighbors(mesh.vertices.size());
  std::map<std::pair<int, int>, int> edge_uses;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      neighbors[size_t(a)].push_back(b);
      neighbors[size_t(b)].push_back(a);
      edge_uses[std::minmax(a, b)]++;
    }
  }
  std::vector<bool> boundary(mesh.vertices.size(), false);
  for (const auto& [edge, uses] : edge_uses) {
    if (uses == 1) {
      boundary[size_t(edge.first)] = true;
      boundary[size_t(edge.second)] = true;
    }
  }
  for (auto& nbrs : neighbors) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }

  std::vector<Vec3> next(mesh.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
      if (boundary[v] || neighbors[v].empty()) {
        next[v] = mesh.vertices[v];
        continue;
      }
      Vec3 mean{0.0, 0.0, 0.0};
      for (int nb : neighbors[v]) mean += mesh.vertices[size_t(nb)];
      mean = mean / double(neighbors[v].size());
      next[v] = mesh.vertices[v] + (mean - mesh.vertices[v]) * weight;
    }
    mesh.vertices.swap(next);
  }
}

}  // namespace odf
