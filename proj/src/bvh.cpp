#include "odf/bvh.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace odf {

Hit intersect_triangle(const TriMesh& mesh, int face, const Ray& ray, const CastPolicy& policy) {
  const Vec3 p0 = mesh.face_vertex(face, 0);
  const Vec3 p1 = mesh.face_vertex(face, 1);
  const Vec3 p2 = mesh.face_vertex(face, 2);
  const Vec3 edge1 = p1 - p0;
  const Vec3 edge2 = p2 - p0;
  const Vec3 pvec = cross(ray.dir.vec(), edge2);
  const double det = dot(edge1, pvec);
  if (det == 0.0) return {};
  const double inv_det = 1.0 / det;
  const Vec3 tvec = ray.origin - p0;
  const double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return {};
  const Vec3 qvec = cross(tvec, edge1);
  const double v = dot(ray.dir.vec(), qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return {};
  const double t = dot(edge2, qvec) * inv_det;
  if (t < policy.t_min) return {};
  return Hit{t, face};
}

static bool hit_improves(const Hit& candidate, const Hit& best) {
  if (!candidate.ok()) return false;
  if (!best.ok()) return true;
  if (candidate.t != best.t) return candidate.t < best.t;
  return candidate.face < best.face;  // deterministic tie rule
}

Hit intersect_brute(const TriMesh& mesh, const Ray& ray, const CastPolicy& policy) {
  Hit best;
  for (int f = 0; f < int(mesh.faces.size()); ++f) {
    Hit h = intersect_triangle(mesh, f, ray, policy);
    if (hit_improves(h, best)) best = h;
  }
  return best;
}

namespace {

struct BuildEntry {
  int face;
  Vec3 centroid;
};

// Splitting to singleton leaves keeps disjoint geometry in disjoint boxes;
// the contract only requires <= 4 faces per leaf.
constexpr int kLeafSize = 1;

}  // namespace

Bvh Bvh::build(const TriMesh& mesh) {
  Bvh bvh;
  const int n = int(mesh.faces.size());
  if (n == 0) return bvh;

  std::vector<BuildEntry> entries(n);
  for (int f = 0; f < n; ++f) {
    Vec3 c = (mesh.face_vertex(f, 0) + mesh.face_vertex(f, 1) + mesh.face_vertex(f, 2)) / 3.0;
    entries[f] = {f, c};
  }

  bvh.face_order_.reserve(n);
  bvh.nodes_.reserve(2 * n);

  // Iterative construction over [begin, end) ranges of `entries`.
  struct Task {
    int node, begin, end;
  };
  bvh.nodes_.push_back({});
  std::vector<Task> stack{{0, 0, n}};
  while (!stack.empty()) {
    Task task = stack.back();
    stack.pop_back();
    Node& node = bvh.nodes_[task.node];
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (int i = task.begin; i < task.end; ++i) {
      for (int corner = 0; corner < 3; ++corner) {
        Vec3 v = mesh.face_vertex(entries[i].face, corner);
        lo = min_vec(lo, v);
        hi = max_vec(hi, v);
      }
    }
    node.box_min = lo;
    node.box_max = hi;
    const int count = task.end - task.begin;
    if (count <= kLeafSize) {
      node.left = int(bvh.face_order_.size());
      node.right = -1;
      node.count = count;
      for (int i = task.begin; i < task.end; ++i) bvh.face_order_.push_back(entries[i].face);
      continue;
    }
    // median split along the widest centroid axis
    Vec3 clo{1e300, 1e300, 1e300}, chi{-1e300, -1e300, -1e300};
    for (int i = task.begin; i < task.end; ++i) {
      clo = min_vec(clo, entries[i].centroid);
      chi = max_vec(chi, entries[i].centroid);
    }
    Vec3 extent = chi - clo;
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    int mid = task.begin + count / 2;
    std::nth_element(entries.begin() + task.begin, entries.begin() + mid,
                     entries.begin() + task.end, [axis](const BuildEntry& a, const BuildEntry& b) {
                       if (a.centroid[axis] != b.centroid[axis]) {
                         return a.centroid[axis] < b.centroid[axis];
                       }
                       return a.face < b.face;
                     });
    int left = int(bvh.nodes_.size());
    bvh.nodes_.push_back({});
    int right = int(bvh.nodes_.size());
    bvh.nodes_.push_back({});
    Node& parent = bvh.nodes_[task.node];  // re-fetch, vector may have grown
    parent.left = left;
    parent.right = right;
    parent.count = 0;
    stack.push_back({right, mid, task.end});
    stack.push_back({left, task.begin, mid});
  }
  return bvh;
}

// Slab test; entry distance written to t_near for ordered traversal.
static bool box_hit(const Vec3& lo, const Vec3& hi, const Ray& ray, double t_max, double& t_near) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    double o = ray.origin[a], d = ray.dir.vec()[a];
    if (d == 0.0) {
      if (o < lo[a] || o > hi[a]) return false;
      continue;
    }
    double inv = 1.0 / d;
    double ta = (lo[a] - o) * inv;
    double tb = (hi[a] - o) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (t1 < 0.0 || t0 > t_max) return false;
  t_near = t0;
  return true;
}

Hit Bvh::intersect(const TriMesh& mesh, const Ray& ray, const CastPolicy& policy) const {
  Hit best;
  if (nodes_.empty()) return best;
  double inf = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  double t_near;
  if (!box_hit(nodes_[0].box_min, nodes_[0].box_max, ray, inf, t_near)) return best;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double best_t = best.ok() ? best.t : inf;
    if (node.is_leaf()) {
      for (int i = 0; i < node.count; ++i) {
        Hit h = intersect_triangle(mesh, face_order_[node.left + i], ray, policy);
        if (hit_improves(h, best)) best = h;
      }
      continue;
    }
    double near_l, near_r;
    bool hit_l = box_hit(nodes_[node.left].box_min, nodes_[node.left].box_max, ray, best_t, near_l);
    bool hit_r = box_hit(nodes_[node.right].box_min, nodes_[node.right].box_max, ray, best_t, near_r);
    if (hit_l && hit_r) {
      // visit the nearer child first
      int first = node.left, second = node.right;
      if (near_r < near_l) std::swap(first, second);
      stack[top++] = second;
      stack[top++] = first;
    } else if (hit_l) {
      stack[top++] = node.left;
    } else if (hit_r) {
      stack[top++] = node.right;
    }
  }
  return best;
}

int Bvh::depth() const {
  if (nodes_.empty()) return 0;
  // recompute by walking; tree is small enough that this is test-only cost
  struct Item {
    int node, depth;
  };
  int max_depth = 0;
  std::vector<Item> stack{{0, 1}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    max_depth = std::max(max_depth, it.depth);
    const Node& n = nodes_[it.node];
    if (!n.is_leaf()) {
      stack.push_back({n.left, it.depth + 1});
      stack.push_back({n.right, it.depth + 1});
    }
  }
  return max_depth;
}

int Bvh::max_leaf_size() const {
  int m = 0;
  for (const Node& n : nodes_) {
    if (n.is_leaf()) m = std::max(m, n.count);
  }
  return m;
}

}  // namespace odf
