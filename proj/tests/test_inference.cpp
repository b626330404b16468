#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "odf/inference.hpp"
#include "odf/mesh.hpp"
#include "odf/sampling.hpp"
#include "support/analytic.hpp"

using namespace odf;

namespace {

// fixed-answer backend for mask threshold tests
class ConstOdf : public OdfBackend {
 public:
  ConstOdf(double depth, double confidence) : OdfBackend({}), depth_(depth), conf_(confidence) {}
  OdfSample query(const Ray&) const override {
    count_query();
    return {depth_, conf_};
  }

 private:
  double depth_, conf_;
};

}  // namespace

TEST_CASE("single_inference: clamping, sentinel misses, confidence threshold") {
  testing::AnalyticSphereOdf sphere(1.0);
  auto [d1, m1] = single_inference(sphere, Ray({-2, 0, 0}, Vec3{1, 0, 0}), 0.5);
  CHECK(d1 == 0.5);  // true depth 1.0 clamps to 0.5
  CHECK(m1);

  auto [d2, m2] = single_inference(sphere, Ray({2, 0, 0}, Vec3{1, 0, 0}), 0.5);
  CHECK(d2 == 0.5);  // sentinel
  CHECK(!m2);

  ConstOdf soft(0.2, 0.7);
  auto [d3, m3] = single_inference(soft, Ray({0, 0, 0}, Vec3{1, 0, 0}), 0.5);
  CHECK(d3 == 0.2);
  CHECK(m3);  // confidence 0.7 > 0.5

  ConstOdf unsure(0.2, 0.4);
  CHECK(!single_inference(unsure, Ray({0, 0, 0}, Vec3{1, 0, 0}), 0.5).second);
}

TEST_CASE("recursive_inference: hand-simulated walk on the exact sphere") {
  testing::AnalyticSphereOdf sphere(1.0);
  InferenceConfig cfg{3, 0.5, 0.01};
  // steps: 0.5 (clamped), 0.5 (tie goes forward), 0 residual on the surface
  InferenceResult r = recursive_inference(sphere, Ray({-2, 0, 0}, Vec3{1, 0, 0}), cfg);
  CHECK(r.mask);
  CHECK(norm(r.surface_point - Vec3{-1, 0, 0}) < 1e-6);
  CHECK(r.total_depth == doctest::Approx(1.0).epsilon(1e-9));

  // miss ray drifts forward and stays masked out
  InferenceResult miss = recursive_inference(sphere, Ray({2, 0, 0}, Vec3{1, 0, 0}), cfg);
  CHECK(!miss.mask);

  // from the center: 0.5 + exact 0.5 lands on the surface
  InferenceResult center = recursive_inference(sphere, Ray({0, 0, 0}, Vec3{1, 0, 0}), cfg);
  CHECK(center.mask);
  CHECK(norm(center.surface_point - Vec3{1, 0, 0}) < 1e-9);
}

TEST_CASE("recursive_inference: oracle fixpoint on a mesh backend") {
  ExactOdf backend(make_icosphere(3));
  InferenceConfig cfg{3, 0.5, 0.01};
  Rng rng(31);
  int checked = 0;
  while (checked < 1000) {
    Ray ray(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
    OdfSample s = backend.query(ray);
    if (!s.intersects() || s.depth > 1.49) {
      if (!s.intersects()) {
        CHECK(!recursive_inference(backend, ray, cfg).mask);
      }
      continue;
    }
    ++checked;
    InferenceResult r = recursive_inference(backend, ray, cfg);
    CHECK(r.mask);
    CHECK(norm(r.surface_point - ray.at(s.depth)) < 1e-6);
    CHECK(std::abs(r.total_depth - s.depth) < 1e-6);

    // additional iterations stay put once the walk has landed
    InferenceConfig more = cfg;
    more.iterations = 6;
    InferenceResult r6 = recursive_inference(backend, ray, more);
    CHECK(norm(r6.surface_point - r.surface_point) < 1e-6);
  }
}

TEST_CASE("recursive_inference: clamp-walk covers max(0, D - k*psi) per round") {
  testing::AnalyticSphereOdf sphere(1.0);
  // true depth 1.8 > 3 * 0.5: the 3-round walk covers exactly 1.5, mask false
  Ray deep({-0.8, 0, 0}, Vec3{1, 0, 0});
  REQUIRE(sphere.query(deep).depth == doctest::Approx(1.8));
  InferenceResult r3 = recursive_inference(sphere, deep, InferenceConfig{3, 0.5, 0.01});
  CHECK(r3.total_depth == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(!r3.mask);
  // a fourth round finishes the remaining 0.3 exactly
  InferenceResult r4 = recursive_inference(sphere, deep, InferenceConfig{4, 0.5, 0.01});
  CHECK(r4.total_depth == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(r4.mask);
}

TEST_CASE("recursive_inference: mask soundness under the algorithm's reach") {
  ExactOdf backend(make_icosphere(3));
  InferenceConfig cfg{3, 0.5, 0.01};
  const double reach = cfg.iterations * cfg.clamp;
  Rng rng(57);
  int hits = 0, misses = 0, unreachable = 0;
  for (int i = 0; i < 4000; ++i) {
    Ray ray(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
    OdfSample s = backend.query(ray);
    InferenceResult r = recursive_inference(backend, ray, cfg);
    if (!s.intersects()) {
      CHECK(!r.mask);
      ++misses;
    } else if (s.depth <= reach) {
      CHECK(r.mask);
      ++hits;
    } else if (s.depth > reach + cfg.surface_margin) {
      CHECK(!r.mask);
      ++unreachable;
    }
  }
  CHECK(hits > 1000);
  CHECK(misses > 1000);
  CHECK(unreachable > 10);
}

TEST_CASE("recursive_inference: accumulated depth never overshoots backward") {
  ExactOdf backend(make_open_quad());
  InferenceConfig cfg{3, 0.5, 0.01};
  Rng rng(71);
  for (int i = 0; i < 2000; ++i) {
    Ray ray(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
    InferenceResult r = recursive_inference(backend, ray, cfg);
    CHECK(r.total_depth >= -cfg.surface_margin);
  }
}

TEST_CASE("batch_recursive_inference: equals single calls, empty input, thread count") {
  ExactOdf backend(make_icosphere(2));
  InferenceConfig cfg{3, 0.5, 0.01};

  std::vector<Ray> rays;
  Rng rng(5);
  for (int i = 0; i < 3; ++i) {
    rays.emplace_back(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
  }
  auto batch = batch_recursive_inference(backend, rays, cfg);
  REQUIRE(batch.size() == 3);
  for (size_t i = 0; i < rays.size(); ++i) {
    InferenceResult single = recursive_inference(backend, rays[i], cfg);
    CHECK(batch[i].surface_point == single.surface_point);
    CHECK(batch[i].total_depth == single.total_depth);
    CHECK(batch[i].mask == single.mask);
  }

  CHECK(batch_recursive_inference(backend, {}, cfg).empty());

#ifdef _OPENMP
  std::vector<Ray> many;
  for (int i = 0; i < 20000; ++i) {
    many.emplace_back(uniform_ball_sample(rng, 1.3), uniform_dir_sample(rng));
  }
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto one_thread = batch_recursive_inference(backend, many, cfg);
  omp_set_num_threads(saved > 1 ? saved : 2);
  auto many_threads = batch_recursive_inference(backend, many, cfg);
  omp_set_num_threads(saved);
  REQUIRE(one_thread.size() == many_threads.size());
  for (size_t i = 0; i < one_thread.size(); ++i) {
    CHECK(one_thread[i].surface_point == many_threads[i].surface_point);
    CHECK(one_thread[i].total_depth == many_threads[i].total_depth);
    CHECK(one_thread[i].mask == many_threads[i].mask);
  }
#endif
}

TEST_CASE("recursive_inference: both-directions-miss freezes position, mask false") {
  // a quad so thin that sideways rays miss in both directions mid-walk
  ExactOdf backend(make_open_quad());
  Ray parallel({0, 0, 0.3}, Vec3{1, 0, 0});  // parallel to the quad, never hits
  InferenceResult r = recursive_inference(backend, parallel, InferenceConfig{3, 0.5, 0.01});
  CHECK(!r.mask);
}

TEST_CASE("InferenceConfig validation") {
  InferenceConfig no_rounds{0, 0.5, 0.01};
  InferenceConfig no_margin{3, 0.5, 0.0};
  InferenceConfig one_round{1, 0.5, 0.01};
  CHECK_THROWS_AS(no_rounds.validate(), std::invalid_argument);
  CHECK_THROWS_AS(no_margin.validate(), std::invalid_argument);
  CHECK_NOTHROW(one_round.validate());
}
