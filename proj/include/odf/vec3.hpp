#pragma once

#include <cmath>
#include <stdexcept>

namespace odf {

// 3D vector. Geometry code is double precision end to end.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  constexpr bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
  return v / n;
}

inline Vec3 min_vec(const Vec3& a, const Vec3& b) {
  return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}
inline Vec3 max_vec(const Vec3& a, const Vec3& b) {
  return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Unit direction on S^2. Construction enforces the norm invariant; queries with
// unnormalized directions are rejected rather than silently normalized.
class UnitDir {
 public:
  static constexpr double kTol = 1e-9;

  UnitDir() : v_{1.0, 0.0, 0.0} {}
  explicit UnitDir(const Vec3& v) : v_(v) {
    if (std::abs(norm(v) - 1.0) > kTol) {
      throw std::invalid_argument("UnitDir requires a unit vector (|norm - 1| <= 1e-9)");
    }
  }

  // Normalizing factory for callers that hold an arbitrary nonzero vector.
  static UnitDir normalize(const Vec3& v) {
    UnitDir d;
    d.v_ = normalized(v);
    return d;
  }

  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }
  double x() const { return v_.x; }
  double y() const { return v_.y; }
  double z() const { return v_.z; }
  UnitDir operator-() const {
    UnitDir d;
    d.v_ = -v_;
    return d;
  }

 private:
  Vec3 v_;
};

inline Vec3 operator*(const UnitDir& d, double s) { return d.vec() * s; }
inline Vec3 operator*(double s, const UnitDir& d) { return d.vec() * s; }

// A 5D query: 3D origin plus a unit direction (stored as 6 scalars).
struct Ray {
  Vec3 origin;
  UnitDir dir;

  Ray() = default;
  Ray(const Vec3& o, const UnitDir& d) : origin(o), dir(d) {}
  Ray(const Vec3& o, const Vec3& d) : origin(o), dir(d) {}

  Vec3 at(double t) const { return origin + dir.vec() * t; }
};

}  // namespace odf
