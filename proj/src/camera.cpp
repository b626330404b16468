#include "odf/camera.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace odf {

Camera Camera::looking_at_origin(const Vec3& center, int size, double focal) {
  Camera cam;
  cam.center = center;
  cam.look_at = {0.0, 0.0, 0.0};
  cam.up = std::abs(normalized(center).z) > 0.99 ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0};
  cam.width = cam.height = size;
  cam.cx = size / 2.0;
  cam.cy = size / 2.0;
  cam.focal = focal;
  return cam;
}

Vec3 Camera::forward() const { return normalized(look_at - center); }

Vec3 Camera::right_axis() const {
  Vec3 f = forward();
  Vec3 r = cross(f, up);
  if (norm(r) < 1e-9) r = cross(f, Vec3{0.0, 1.0, 0.0});
  return normalized(r);
}

Vec3 Camera::down_axis() const { return cross(forward(), right_axis()); }

Ray Camera::pixel_ray(int u, int v) const {
  double px = (u + 0.5) - cx;
  double py = (v + 0.5) - cy;
  Vec3 dir = forward() * focal + right_axis() * px + down_axis() * py;
  return Ray(center, UnitDir::normalize(dir));
}

std::string camera_sidecar_path(const std::string& pfm_path) { return pfm_path + ".json"; }

static nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["center"] = {cam.center.x, cam.center.y, cam.center.z};
  j["look_at"] = {cam.look_at.x, cam.look_at.y, cam.look_at.z};
  j["up"] = {cam.up.x, cam.up.y, cam.up.z};
  j["focal"] = cam.focal;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

static Vec3 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

static Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  cam.center = vec_from_json(j.at("center"));
  cam.look_at = vec_from_json(j.at("look_at"));
  cam.up = vec_from_json(j.at("up"));
  cam.focal = j.at("focal").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

void save_depth_image(const std::string& pfm_path, const DepthImage& image,
                      const std::string& config_hash) {
  std::ofstream out(pfm_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PFM: " + pfm_path);
  // negative scale marks little-endian in the PFM header
  out << "Pf\n" << image.width << " " << image.height << "\n-1.0\n";
  // PFM rows are bottom-up
  for (int v = image.height - 1; v >= 0; --v) {
    out.write(reinterpret_cast<const char*>(&image.values[size_t(v) * image.width]),
              image.width * sizeof(float));
  }
  nlohmann::json j = camera_to_json(image.camera);
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  std::ofstream side(camera_sidecar_path(pfm_path));
  side << j.dump(2) << "\n";
}

DepthImage load_depth_image(const std::string& pfm_path) {
  std::ifstream in(pfm_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PFM: " + pfm_path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw std::runtime_error("not a grayscale PFM: " + pfm_path);
  DepthImage image;
  double scale;
  in >> image.width >> image.height >> scale;
  in.get();  // single whitespace after the header
  if (scale > 0) throw std::runtime_error("big-endian PFM unsupported: " + pfm_path);
  image.values.resize(size_t(image.width) * image.height);
  for (int v = image.height - 1; v >= 0; --v) {
    in.read(reinterpret_cast<char*>(&image.values[size_t(v) * image.width]),
            image.width * sizeof(float));
  }
  if (!in) throw std::runtime_error("truncated PFM: " + pfm_path);
  std::ifstream side(camera_sidecar_path(pfm_path));
  if (side) {
    nlohmann::json j;
    side >> j;
    image.camera = camera_from_json(j);
  }
  if (image.camera.width != image.width || image.camera.height != image.height) {
    throw std::runtime_error("depth image dimensions do not match camera intrinsics: " + pfm_path);
  }
  return image;
}

void save_depth_png16(const std::string& path, const DepthImage& image) {
  float max_v = 0.0f;
  for (float v : image.values) max_v = std::max(max_v, v);
  if (max_v <= 0.0f) max_v = 1.0f;

  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("libpng failure writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint16_t> row(image.width);
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      double scaled = image.at(u, v) / max_v;
      row[u] = uint16_t(std::clamp(scaled, 0.0, 1.0) * 65535.0 + 0.5);
      // PNG samples are big-endian
      row[u] = uint16_t((row[u] >> 8) | (row[u] << 8));
    }
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace odf
