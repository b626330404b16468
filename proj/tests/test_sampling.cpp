#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "odf/forward_maps.hpp"
#include "odf/sampling.hpp"
#include "support/analytic.hpp"

using namespace odf;

namespace {

struct MeshOracle {
  TriMesh mesh;
  Bvh bvh;
  explicit MeshOracle(TriMesh m) : mesh(std::move(m)), bvh(Bvh::build(mesh)) {}
  OdfSample label(const Ray& ray) const { return ray_cast(bvh, mesh, ray); }
};

}  // namespace

TEST_CASE("sample_rays_from_mesh: 60/40 split rounds toward strategy a") {
  MeshOracle sphere(make_icosphere(2));
  RayDataset d = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 10, 7);
  CHECK(d.counts.strategy_a == 6);
  CHECK(d.counts.strategy_b == 4);
  CHECK(d.rays.size() == 10);

  RayDataset d7 = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 7, 7);
  CHECK(d7.counts.strategy_a == 5);  // floor(0.4*7) = 2 to strategy b
  CHECK(d7.counts.strategy_b == 2);

  CHECK_THROWS_AS(sample_rays_from_mesh(sphere.mesh, sphere.bvh, 0, 7), std::invalid_argument);
}

TEST_CASE("sample_rays_from_mesh: labels agree with the oracle, strategy b almost always hits") {
  MeshOracle sphere(make_icosphere(3));
  RayDataset d = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 10000, 3);

  size_t b_hits = 0;
  for (size_t i = 0; i < d.rays.size(); ++i) {
    const LabeledRay& r = d.rays[i];
    OdfSample relabel = sphere.label(r.ray);
    CHECK(relabel.intersects() == r.intersects);
    if (r.intersects) {
      CHECK(std::abs(relabel.depth - r.depth) < 1e-6);
    } else {
      CHECK(r.depth == 0.5);
    }
    if (i >= d.counts.strategy_a && r.intersects) ++b_hits;
  }
  // strategy-b rays aim at sampled surface points; occlusion can only move
  // the hit nearer, so they intersect up to epsilon effects
  CHECK(double(b_hits) / double(d.counts.strategy_b) > 0.999);

  // strategy-a pool balanced into [0.4, 0.6]
  size_t a_hits = 0;
  for (size_t i = 0; i < d.counts.strategy_a; ++i) a_hits += d.rays[i].intersects;
  double frac = double(a_hits) / double(d.counts.strategy_a);
  CHECK(frac >= 0.4);
  CHECK(frac <= 0.6);
}

TEST_CASE("sample_rays_from_mesh: balancing kicks in for a small target (torus)") {
  MeshOracle torus(make_torus(0.5, 0.15, 32, 16));
  RayDataset d = sample_rays_from_mesh(torus.mesh, torus.bvh, 4000, 11);
  size_t a_hits = 0;
  for (size_t i = 0; i < d.counts.strategy_a; ++i) a_hits += d.rays[i].intersects;
  double frac = double(a_hits) / double(d.counts.strategy_a);
  CHECK(frac >= 0.4);
  CHECK(frac <= 0.6);
}

TEST_CASE("sample_rays_from_mesh: open quad is hit from both sides") {
  MeshOracle quad(make_open_quad());
  RayDataset d = sample_rays_from_mesh(quad.mesh, quad.bvh, 4000, 5);
  int above = 0, below = 0;
  for (size_t i = d.counts.strategy_a; i < d.rays.size(); ++i) {
    const LabeledRay& r = d.rays[i];
    if (!r.intersects) continue;
    (r.ray.dir.z() < 0.0 ? above : below)++;  // direction sign = approach side
  }
  CHECK(above > 100);
  CHECK(below > 100);
}

TEST_CASE("depth-map sampling: one ray per pixel, shared origins, sentinel background") {
  testing::AnalyticSphereOdf backend(1.0);
  std::vector<DepthImage> maps;
  const int n_cams = 8, size = 16;
  for (int c = 0; c < n_cams; ++c) {
    Rng rng(100 + uint64_t(c));
    Camera cam = Camera::looking_at_origin(uniform_dir_sample(rng).vec() * 1.3, size, 6.25);
    maps.push_back(render_depth_map(backend, cam));
  }
  RayDataset d = sample_rays_from_depth_maps(maps);
  CHECK(d.rays.size() == size_t(n_cams) * size * size);
  CHECK(d.provenance == Provenance::depth_maps);

  std::set<std::array<double, 3>> origins;
  size_t background = 0;
  for (const LabeledRay& r : d.rays) {
    origins.insert({r.ray.origin.x, r.ray.origin.y, r.ray.origin.z});
    if (!r.intersects) {
      ++background;
      CHECK(r.depth == 0.5);
    } else {
      CHECK(r.depth > 0.0);
    }
  }
  CHECK(origins.size() == size_t(n_cams));  // the per-camera origin bias
  CHECK(background > 0);
}

TEST_CASE("depth-map sampling: center pixel of an odd camera sees depth 0.3") {
  testing::AnalyticSphereOdf backend(1.0);
  Camera cam = Camera::looking_at_origin({1.3, 0.0, 0.0}, 65, 26.0);
  DepthImage img = render_depth_map(backend, cam);
  CHECK(img.at(32, 32) == doctest::Approx(0.3).epsilon(1e-6));

  RayDataset d = sample_rays_from_depth_maps({img});
  const LabeledRay& center = d.rays[size_t(32) * 65 + 32];
  CHECK(center.intersects);
  CHECK(center.depth == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("depth-map sampling: dimension mismatch is an error") {
  DepthImage img;
  img.width = 8;
  img.height = 8;
  img.values.assign(64, 0.0f);
  img.camera = Camera::looking_at_origin({1.3, 0, 0}, 16, 10.0);
  CHECK_THROWS_AS(sample_rays_from_depth_maps({img}), std::invalid_argument);
}

TEST_CASE("augment: recursive-property arithmetic for a clean origin shift") {
  // perpendicular ray onto the open quad: depth 0.8, shift +0.05 -> 0.75
  MeshOracle quad(make_open_quad());
  Ray base({0.1, 0.05, -0.8}, Vec3{0, 0, 1});
  OdfSample s = quad.label(base);
  REQUIRE(s.intersects());
  REQUIRE(s.depth == doctest::Approx(0.8));
  OdfSample shifted = quad.label(Ray(base.at(0.05), base.dir));
  CHECK(shifted.depth == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("augment: strategy b construction matches the stated arithmetic") {
  MeshOracle quad(make_open_quad());
  Ray base({0.1, -0.2, -0.5}, Vec3{0, 0, 1});
  OdfSample s = quad.label(base);
  REQUIRE(s.intersects());
  Vec3 p = base.at(s.depth);
  const double delta = 0.02;
  Ray back(p + base.dir * delta, -base.dir);
  OdfSample relabeled = quad.label(back);
  CHECK(relabeled.intersects());
  CHECK(relabeled.depth == doctest::Approx(delta).epsilon(1e-9));
}

TEST_CASE("augment_rays: per-strategy counts, oracle consistency, magnitude bounds") {
  MeshOracle sphere(make_icosphere(3));
  RayDataset base = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 2000, 13);
  AugmentConfig aug = AugmentConfig::parse("abc", 0.1);
  RayDataset d = augment_rays(base, &sphere.mesh, &sphere.bvh, aug, 13);

  CHECK(d.counts.aug_a == base.rays.size());
  CHECK(d.counts.aug_b == base.rays.size());
  CHECK(d.counts.aug_c == base.rays.size());
  CHECK(d.rays.size() == 4 * base.rays.size());

  size_t base_n = base.rays.size();
  for (size_t i = 0; i < d.rays.size(); ++i) {
    const LabeledRay& r = d.rays[i];
    OdfSample relabel = sphere.label(r.ray);
    CHECK(relabel.intersects() == r.intersects);
    if (r.intersects) CHECK(std::abs(relabel.depth - r.depth) < 1e-6);
    if (i >= base_n + d.counts.aug_a && r.intersects) {
      // aug-b depth = delta, aug-c depth = |end - origin|; a nearer surface
      // can only shrink the label
      CHECK(r.depth <= 0.1 + 1e-9);
    }
  }
}

TEST_CASE("augment: aug-a preserves the hit point when no surface is crossed") {
  MeshOracle sphere(make_icosphere(3));
  Rng rng(17);
  int checked = 0;
  while (checked < 300) {
    Ray ray(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
    OdfSample s = sphere.label(ray);
    if (!s.intersects() || s.depth < 0.11) continue;
    double delta = rng.uniform(-0.1, std::min(0.1, s.depth * 0.5));
    Ray moved(ray.at(delta), ray.dir);
    OdfSample relabel = sphere.label(moved);
    if (!relabel.intersects()) continue;
    if (std::abs(relabel.depth - (s.depth - delta)) < 1e-6) {
      // no crossing: the labeled end point must not move
      CHECK(norm(moved.at(relabel.depth) - ray.at(s.depth)) < 1e-9);
      ++checked;
    }
  }
}

TEST_CASE("augment_rays: depth-map provenance supports strategy a only") {
  testing::AnalyticSphereOdf backend(1.0);
  Camera cam = Camera::looking_at_origin({0, 0, 1.3}, 32, 12.0);
  RayDataset base = sample_rays_from_depth_maps({render_depth_map(backend, cam)});

  AugmentConfig only_a = AugmentConfig::parse("a", 0.1);
  RayDataset with_a = augment_rays(base, nullptr, nullptr, only_a, 3);
  CHECK(with_a.rays.size() == 2 * base.rays.size());
  // arithmetic labels still satisfy the analytic oracle
  for (size_t i = base.rays.size(); i < with_a.rays.size(); ++i) {
    const LabeledRay& r = with_a.rays[i];
    auto t = testing::ray_sphere_depth(r.ray.origin, r.ray.dir.vec());
    if (r.intersects) {
      REQUIRE(t.has_value());
      CHECK(std::abs(*t - r.depth) < 1e-5);
    }
  }

  CHECK_THROWS_AS(augment_rays(base, nullptr, nullptr, AugmentConfig::parse("b"), 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(augment_rays(base, nullptr, nullptr, AugmentConfig::parse("abc"), 3),
                  std::invalid_argument);
}

TEST_CASE("ODFR files: byte-identical reruns, lossless round trip, CSV export") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "odf_rays_test";
  fs::create_directories(dir);
  MeshOracle sphere(make_icosphere(2));

  RayDataset a = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 500, 99);
  RayDataset b = sample_rays_from_mesh(sphere.mesh, sphere.bvh, 500, 99);
  std::string pa = (dir / "a.odfr").string(), pb = (dir / "b.odfr").string();
  save_ray_dataset(pa, a);
  save_ray_dataset(pb, b);
  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
  CHECK(ca.size() == 4 + 4 + 8 + 8 + 1 + 500 * (7 * 8 + 1));  // header + records

  RayDataset loaded = load_ray_dataset(pa);
  REQUIRE(loaded.rays.size() == a.rays.size());
  CHECK(loaded.seed == a.seed);
  CHECK(loaded.provenance == a.provenance);
  for (size_t i = 0; i < a.rays.size(); ++i) {
    CHECK(loaded.rays[i].ray.origin == a.rays[i].ray.origin);
    CHECK(loaded.rays[i].ray.dir.vec() == a.rays[i].ray.dir.vec());
    CHECK(loaded.rays[i].depth == a.rays[i].depth);
    CHECK(loaded.rays[i].intersects == a.rays[i].intersects);
  }

  export_ray_dataset_csv((dir / "a.csv").string(), a);
  std::ifstream csv(dir / "a.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "ox,oy,oz,dx,dy,dz,depth,intersects");
  fs::remove_all(dir);
}
