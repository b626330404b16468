#pragma once

#include <string>
#include <vector>

#include "odf/vec3.hpp"

namespace odf {

// Pinhole camera on the enclosing sphere, principal axis through the origin.
// Depth values attached to its pixels are ray lengths, not z-depths.
struct Camera {
  Vec3 center{1.3, 0.0, 0.0};
  Vec3 look_at{0.0, 0.0, 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  double focal = 100.0;  // pixels
  double cx = 128.0, cy = 128.0;
  int width = 256, height = 256;

  static Camera looking_at_origin(const Vec3& center, int size = 256, double focal = 100.0);

  Vec3 forward() const;
  Vec3 right_axis() const;
  Vec3 down_axis() const;

  // Ray through the center of pixel (u, v); v grows downward.
  Ray pixel_ray(int u, int v) const;
};

// Per-pixel ray-length raster; 0 marks background.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> values;
  Camera camera;

  float at(int u, int v) const { return values[size_t(v) * width + u]; }
  float& at(int u, int v) { return values[size_t(v) * width + u]; }
  bool foreground(int u, int v) const { return at(u, v) > 0.0f; }
};

// Grayscale PFM raster (little-endian float32) with a JSON camera sidecar.
void save_depth_image(const std::string& pfm_path, const DepthImage& image,
                      const std::string& config_hash = "");
DepthImage load_depth_image(const std::string& pfm_path);

// 16-bit grayscale PNG, depths scaled into [0, 65535] for viewing.
void save_depth_png16(const std::string& path, const DepthImage& image);

std::string camera_sidecar_path(const std::string& pfm_path);

}  // namespace odf
