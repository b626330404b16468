#include "odf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "odf/serialize.hpp"

namespace odf {

double RayDataset::intersect_fraction() const {
  if (rays.empty()) return 0.0;
  size_t hits = 0;
  for (const LabeledRay& r : rays) hits += r.intersects ? 1 : 0;
  return double(hits) / double(rays.size());
}

AugmentConfig AugmentConfig::parse(const std::string& letters, double perturb_max) {
  AugmentConfig cfg;
  cfg.perturb_max = perturb_max;
  if (letters == "none" || letters.empty()) return cfg;
  for (char c : letters) {
    switch (c) {
      case 'a': cfg.enable_a = true; break;
      case 'b': cfg.enable_b = true; break;
      case 'c': cfg.enable_c = true; break;
      default: throw std::invalid_argument(std::string("unknown augmentation: ") + c);
    }
  }
  return cfg;
}

static LabeledRay label_ray(const TriMesh& mesh, const Bvh& bvh, const Ray& ray,
                            const DomainConfig& domain) {
  OdfSample s = ray_cast(bvh, mesh, ray, domain, kLabelPolicy);
  return LabeledRay{ray, s.depth, s.intersects()};
}

RayDataset sample_rays_from_mesh(const TriMesh& mesh, const Bvh& bvh, uint64_t n_total,
                                 uint64_t seed, const DomainConfig& domain, bool balance) {
  if (n_total == 0) throw std::invalid_argument("sample_rays_from_mesh: n_total must be > 0");
  if (mesh.empty()) throw std::invalid_argument("sample_rays_from_mesh: empty mesh");

  RayDataset out;
  out.provenance = Provenance::mesh;
  out.seed = seed;

  // split rounds toward strategy (a)
  const uint64_t n_b = uint64_t(std::floor(0.4 * double(n_total)));
  const uint64_t n_a = n_total - n_b;
  out.counts.strategy_a = n_a;
  out.counts.strategy_b = n_b;
  out.rays.reserve(n_total);

  Rng rng(seed, 0);

  // strategy (a): free 5D rays
  std::vector<LabeledRay> hits, misses;
  auto sample_free_ray = [&] {
    Ray ray(uniform_ball_sample(rng, domain.sphere_radius), uniform_dir_sample(rng));
    return label_ray(mesh, bvh, ray, domain);
  };
  for (uint64_t i = 0; i < n_a; ++i) {
    LabeledRay r = sample_free_ray();
    (r.intersects ? hits : misses).push_back(r);
  }
  if (balance && n_a >= 10) {
    const uint64_t min_class = uint64_t(std::ceil(0.4 * double(n_a)));
    // resample until the smaller class can reach a fraction of at least 0.4;
    // capped so pathological geometry cannot stall data generation
    const uint64_t max_extra = 400 * n_a;
    uint64_t extra = 0;
    while ((hits.size() < min_class || misses.size() < min_class) && extra < max_extra) {
      LabeledRay r = sample_free_ray();
      (r.intersects ? hits : misses).push_back(r);
      ++extra;
    }
    std::vector<LabeledRay>& minority = hits.size() < misses.size() ? hits : misses;
    std::vector<LabeledRay>& majority = hits.size() < misses.size() ? misses : hits;
    uint64_t take_minority = std::min<uint64_t>(minority.size(), n_a / 2);
    uint64_t take_majority = n_a - take_minority;
    // deterministic interleave keeps classes well mixed for minibatching
    size_t im = 0, ij = 0;
    for (uint64_t i = 0; i < n_a; ++i) {
      bool pick_minority =
          im < take_minority &&
          (ij >= take_majority || im * take_majority <= ij * take_minority);
      if (pick_minority) {
        out.rays.push_back(minority[im++]);
      } else {
        out.rays.push_back(majority[ij++]);
      }
    }
  } else {
    out.rays.insert(out.rays.end(), hits.begin(), hits.end());
    out.rays.insert(out.rays.end(), misses.begin(), misses.end());
  }

  // strategy (b): end point uniform on the surface, origin in the ball
  SurfaceSampler surface(mesh);
  for (uint64_t i = 0; i < n_b; ++i) {
    while (true) {
      Vec3 end = surface.sample(rng);
      Vec3 origin = uniform_ball_sample(rng, domain.sphere_radius);
      Vec3 delta = end - origin;
      if (norm(delta) < 1e-9) continue;
      Ray ray(origin, UnitDir::normalize(delta));
      out.rays.push_back(label_ray(mesh, bvh, ray, domain));
      break;
    }
  }
  return out;
}

RayDataset sample_rays_from_depth_maps(const std::vector<DepthImage>& maps,
                                       const DomainConfig& domain) {
  if (maps.empty()) throw std::invalid_argument("sample_rays_from_depth_maps: no depth maps");
  RayDataset out;
  out.provenance = Provenance::depth_maps;
  for (const DepthImage& img : maps) {
    if (img.width != img.camera.width || img.height != img.camera.height) {
      throw std::invalid_argument("depth image dimensions do not match camera intrinsics");
    }
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        Ray ray = img.camera.pixel_ray(u, v);
        float d = img.at(u, v);
        if (d > 0.0f) {
          out.rays.push_back(LabeledRay{ray, double(d), true});
        } else {
          out.rays.push_back(LabeledRay{ray, domain.nonintersect_sentinel, false});
        }
        ++out.counts.depth_pixels;
      }
    }
  }
  return out;
}

RayDataset augment_rays(const RayDataset& base, const TriMesh* mesh, const Bvh* bvh,
                        const AugmentConfig& aug, uint64_t seed, const DomainConfig& domain) {
  if (base.empty()) throw std::invalid_argument("augment_rays: empty base dataset");
  const bool have_oracle = mesh != nullptr && bvh != nullptr;
  if (!have_oracle && (aug.enable_b || aug.enable_c)) {
    throw std::invalid_argument(
        "augmentations (b) and (c) need a mesh oracle; depth-map datasets support (a) only");
  }

  RayDataset out = base;
  if (!aug.any()) return out;

  std::vector<size_t> hit_indices;
  for (size_t i = 0; i < base.rays.size(); ++i) {
    if (base.rays[i].intersects) hit_indices.push_back(i);
  }
  if ((aug.enable_b || aug.enable_c) && hit_indices.empty()) {
    throw std::invalid_argument("augmentations (b) and (c) need intersecting rays");
  }

  const uint64_t per_strategy = uint64_t(std::llround(aug.ratio * double(base.rays.size())));
  auto oracle = [&](const Ray& ray) { return label_ray(*mesh, *bvh, ray, domain); };

  if (aug.enable_a) {
    Rng rng(seed, 1);
    uint64_t added = 0;
    while (added < per_strategy) {
      const LabeledRay& src = base.rays[rng.next_below(base.rays.size())];
      double delta = rng.uniform(-aug.perturb_max, aug.perturb_max);
      if (src.intersects) {
        // origin must stay on the near side of the labeled hit
        int tries = 0;
        while (delta >= src.depth && tries++ < 64) delta = rng.uniform(-aug.perturb_max, aug.perturb_max);
        if (delta >= src.depth) continue;
      } else if (!have_oracle && delta < 0.0) {
        // backward shifts of miss rays cannot be verified without an oracle
        delta = -delta;
      }
      Ray moved(src.ray.origin + src.ray.dir * delta, src.ray.dir);
      LabeledRay labeled;
      if (have_oracle) {
        labeled = oracle(moved);
      } else {
        labeled = src.intersects ? LabeledRay{moved, src.depth - delta, true}
                                 : LabeledRay{moved, domain.nonintersect_sentinel, false};
      }
      out.rays.push_back(labeled);
      ++out.counts.aug_a;
      ++added;
    }
  }

  if (aug.enable_b) {
    Rng rng(seed, 2);
    for (uint64_t added = 0; added < per_strategy; ++added) {
      const LabeledRay& src = base.rays[hit_indices[rng.next_below(hit_indices.size())]];
      Vec3 end = src.ray.at(src.depth);
      double delta = rng.uniform(0.0, aug.perturb_max);
      Ray back(end + src.ray.dir * delta, -src.ray.dir);
      // expected label is delta; the oracle wins when a nearer surface exists
      out.rays.push_back(oracle(back));
      ++out.counts.aug_b;
    }
  }

  if (aug.enable_c) {
    Rng rng(seed, 3);
    uint64_t added = 0;
    while (added < per_strategy) {
      const LabeledRay& src = base.rays[hit_indices[rng.next_below(hit_indices.size())]];
      Vec3 end = src.ray.at(src.depth);
      Vec3 origin = end + uniform_ball_sample(rng, aug.perturb_max);
      Vec3 delta = end - origin;
      if (norm(delta) < 1e-9) continue;
      Ray toward(origin, UnitDir::normalize(delta));
      out.rays.push_back(oracle(toward));
      ++out.counts.aug_c;
      ++added;
    }
  }
  return out;
}

// --- ODFR I/O ----------------------------------------------------------------

static constexpr char kRayMagic[4] = {'O', 'D', 'F', 'R'};
static constexpr uint32_t kRayVersion = 1;

void save_ray_dataset(const std::string& path, const RayDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write ray dataset: " + path);
  write_magic(out, kRayMagic);
  write_pod<uint32_t>(out, kRayVersion);
  write_pod<uint64_t>(out, dataset.rays.size());
  write_pod<uint64_t>(out, dataset.seed);
  write_pod<uint8_t>(out, uint8_t(dataset.provenance));
  for (const LabeledRay& r : dataset.rays) {
    double rec[7] = {r.ray.origin.x, r.ray.origin.y, r.ray.origin.z,
                     r.ray.dir.x(),  r.ray.dir.y(),  r.ray.dir.z(),
                     r.depth};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    write_pod<uint8_t>(out, r.intersects ? 1 : 0);
  }
  if (!out) throw std::runtime_error("short write on ray dataset: " + path);
}

RayDataset load_ray_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open ray dataset: " + path);
  expect_magic(in, kRayMagic, "ODFR");
  uint32_t version = read_pod<uint32_t>(in);
  if (version != kRayVersion) throw std::runtime_error("unsupported ODFR version");
  RayDataset dataset;
  uint64_t count = read_pod<uint64_t>(in);
  dataset.seed = read_pod<uint64_t>(in);
  dataset.provenance = Provenance(read_pod<uint8_t>(in));
  dataset.rays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    double rec[7];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    uint8_t flag = read_pod<uint8_t>(in);
    LabeledRay r;
    r.ray = Ray(Vec3{rec[0], rec[1], rec[2]}, UnitDir(Vec3{rec[3], rec[4], rec[5]}));
    r.depth = rec[6];
    r.intersects = flag != 0;
    dataset.rays.push_back(r);
  }
  if (!in) throw std::runtime_error("truncated ray dataset: " + path);
  return dataset;
}

void export_ray_dataset_csv(const std::string& path, const RayDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV: " + path);
  out.precision(17);
  out << "ox,oy,oz,dx,dy,dz,depth,intersects\n";
  for (const LabeledRay& r : dataset.rays) {
    out << r.ray.origin.x << ',' << r.ray.origin.y << ',' << r.ray.origin.z << ','
        << r.ray.dir.x() << ',' << r.ray.dir.y() << ',' << r.ray.dir.z() << ','
        << r.depth << ',' << (r.intersects ? 1 : 0) << "\n";
  }
}

}  // namespace odf
