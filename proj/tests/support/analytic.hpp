#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <cmath>
#include <limits>
#include <optional>

#include "odf/odf.hpp"
#include "odf/rng.hpp"

namespace odf::testing {

// Closed-form first-hit distance of a ray against the sphere |x| = radius,
// with watertight t >= 0 semantics (on-surface origins report 0).
inline std::optional<double> ray_sphere_depth(const Vec3& origin, const Vec3& dir,
                                              double radius = 1.0) {
  const double b = dot(origin, dir);
  const double c = norm2(origin) - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  const double t1 = -b + s;
  const double eps = -1e-12;
  if (t0 >= eps) return std::max(t0, 0.0);
  if (t1 >= eps) return std::max(t1, 0.0);
  return std::nullopt;
}

// Exact analytic sphere ODF; the reference backend for forward-map tests.
class AnalyticSphereOdf : public OdfBackend {
 public:
  explicit AnalyticSphereOdf(double radius = 1.0, const DomainConfig& domain = {})
      : OdfBackend(domain), radius_(radius) {}

  OdfSample query(const Ray& ray) const override {
    count_query();
    auto t = ray_sphere_depth(ray.origin, ray.dir.vec(), radius_);
    if (!t.has_value()) return OdfSample{domain_.nonintersect_sentinel, 0.0};
    return OdfSample{*t, 1.0};
  }

  double radius() const { return radius_; }

 private:
  double radius_;
};

// Uniform samples on the sphere surface (ground-truth point clouds).
inline std::vector<Vec3> sphere_surface_samples(size_t count, double radius, uint64_t seed) {
  Rng rng(seed, 21);
  std::vector<Vec3> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(uniform_dir_sample(rng).vec() * radius);
  return out;
}

// Generalized winding number of a triangle mesh at point p (sum of signed
// solid angles / 4pi); > 0.5 means inside for closed meshes.
inline double winding_number(const TriMesh& mesh, const Vec3& p) {
  double total = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    Vec3 a = mesh.face_vertex(int(f), 0) - p;
    Vec3 b = mesh.face_vertex(int(f), 1) - p;
    Vec3 c = mesh.face_vertex(int(f), 2) - p;
    double la = norm(a), lb = norm(b), lc = norm(c);
    double det = dot(a, cross(b, c));
    double denom = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
    total += 2.0 * std::atan2(det, denom);
  }
  return total / (4.0 * 3.14159265358979323846);
}

inline bool winding_inside(const TriMesh& mesh, const Vec3& p) {
  return winding_number(mesh, p) > 0.5;
}

}  // namespace odf::testing
