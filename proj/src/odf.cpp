#include "odf/odf.hpp"

namespace odf {

static OdfSample hit_to_sample(const Hit& hit, const DomainConfig& domain) {
  if (!hit.ok()) return OdfSample{domain.nonintersect_sentinel, 0.0};
  return OdfSample{hit.t > 0.0 ? hit.t : 0.0, 1.0};
}

OdfSample ray_cast(const Bvh& bvh, const TriMesh& mesh, const Ray& ray, const DomainConfig& domain,
                   const CastPolicy& policy) {
  return hit_to_sample(bvh.intersect(mesh, ray, policy), domain);
}

OdfSample ray_cast_brute(const TriMesh& mesh, const Ray& ray, const DomainConfig& domain,
                         const CastPolicy& policy) {
  return hit_to_sample(intersect_brute(mesh, ray, policy), domain);
}

ExactOdf::ExactOdf(TriMesh mesh, const DomainConfig& domain, const CastPolicy& policy)
    : OdfBackend(domain), mesh_(std::move(mesh)), policy_(policy) {
  if (mesh_.empty()) throw std::invalid_argument("ExactOdf: empty mesh");
  bvh_ = Bvh::build(mesh_);
}

OdfSample ExactOdf::query(const Ray& ray) const {
  count_query();
  return hit_to_sample(bvh_.intersect(mesh_, ray, policy_), domain_);
}

std::vector<OdfSample> ExactOdf::batch_query(std::span<const Ray> rays) const {
  std::vector<OdfSample> out(rays.size());
  for (size_t i = 0; i < rays.size(); ++i) {
    out[i] = hit_to_sample(bvh_.intersect(mesh_, rays[i], policy_), domain_);
  }
  count_query(rays.size());
  return out;
}

std::shared_ptr<ExactOdf> exact_odf(TriMesh mesh, const DomainConfig& domain) {
  return std::make_shared<ExactOdf>(std::move(mesh), domain);
}

}  // namespace odf
