#include "odf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace odf {

KdTree3::KdTree3(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("KdTree3: empty point set");
  std::vector<Vec3> pts(points.begin(), points.end());
  nodes_.reserve(pts.size());
  root_ = build(pts, 0, int(pts.size()));
}

int KdTree3::build(std::vector<Vec3>& pts, int begin, int end) {
  if (begin >= end) return -1;
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (int i = begin; i < end; ++i) {
    lo = min_vec(lo, pts[size_t(i)]);
    hi = max_vec(hi, pts[size_t(i)]);
  }
  Vec3 extent = hi - lo;
  uint8_t axis = 0;
  if (extent.y > extent[axis]) axis = 1;
  if (extent.z > extent[axis]) axis = 2;
  int mid = (begin + end) / 2;
  std::nth_element(pts.begin() + begin, pts.begin() + mid, pts.begin() + end,
                   [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
  int idx = int(nodes_.size());
  nodes_.push_back(Node{pts[size_t(mid)], -1, -1, axis});
  int left = build(pts, begin, mid);
  int right = build(pts, mid + 1, end);
  nodes_[size_t(idx)].left = left;
  nodes_[size_t(idx)].right = right;
  return idx;
}

void KdTree3::search(int node, const Vec3& query, double& best) const {
  if (node < 0) return;
  const Node& n = nodes_[size_t(node)];
  best = std::min(best, norm2(query - n.point));
  double delta = query[n.axis] - n.point[n.axis];
  int near = delta < 0.0 ? n.left : n.right;
  int far = delta < 0.0 ? n.right : n.left;
  search(near, query, best);
  if (delta * delta < best) search(far, query, best);
}

double KdTree3::nearest_dist2(const Vec3& query) const {
  double best = std::numeric_limits<double>::infinity();
  search(root_, query, best);
  return best;
}

static double mean_nn2_kdtree(std::span<const Vec3> from, const KdTree3& to) {
  double acc = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : acc)
  for (long i = 0; i < long(from.size()); ++i) {
    acc += to.nearest_dist2(from[size_t(i)]);
  }
  return acc / double(from.size());
}

static double mean_nn2_brute(std::span<const Vec3> from, std::span<const Vec3> to) {
  double acc = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : acc)
  for (long i = 0; i < long(from.size()); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) best = std::min(best, norm2(from[size_t(i)] - q));
    acc += best;
  }
  return acc / double(from.size());
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool brute_force) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point set");
  if (brute_force) {
    return 1000.0 * (mean_nn2_brute(a, b) + mean_nn2_brute(b, a));
  }
  KdTree3 tree_a(a), tree_b(b);
  return 1000.0 * (mean_nn2_kdtree(a, tree_b) + mean_nn2_kdtree(b, tree_a));
}

static double fraction_within(std::span<const Vec3> from, std::span<const Vec3> to,
                              double threshold, bool brute_force) {
  const double thr2 = threshold * threshold;
  size_t within = 0;
  if (brute_force) {
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, norm2(p - q));
      within += best <= thr2;
    }
  } else {
    KdTree3 tree(to);
    for (const Vec3& p : from) within += tree.nearest_dist2(p) <= thr2;
  }
  return double(within) / double(from.size());
}

double fscore_depth(std::span<const Vec3> pred, std::span<const Vec3> gt, double threshold,
                    bool brute_force) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("fscore_depth: empty point set");
  double precision = fraction_within(pred, gt, threshold, brute_force);
  double recall = fraction_within(gt, pred, threshold, brute_force);
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

MaskMetrics mask_metrics(std::span<const uint8_t> pred, std::span<const uint8_t> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("mask_metrics: length mismatch");
  if (pred.empty()) throw std::invalid_argument("mask_metrics: empty input");
  MaskMetrics m;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] != 0, g = gt[i] != 0;
    m.tp += p && g;
    m.fp += p && !g;
    m.fn += !p && g;
    m.tn += !p && !g;
  }
  double recall = m.tp + m.fn > 0 ? double(m.tp) / double(m.tp + m.fn) : 0.0;
  double precision = m.tp + m.fp > 0 ? double(m.tp) / double(m.tp + m.fp) : 0.0;
  m.recall = 100.0 * recall;
  m.precision = 100.0 * precision;
  m.fscore = precision + recall > 0.0 ? 100.0 * 2.0 * precision * recall / (precision + recall) : 0.0;
  return m;
}

MaskMetrics mask_metrics(std::span<const double> pred_confidence, std::span<const uint8_t> gt) {
  std::vector<uint8_t> pred(pred_confidence.size());
  for (size_t i = 0; i < pred.size(); ++i) pred[i] = pred_confidence[i] > 0.5 ? 1 : 0;
  return mask_metrics(pred, gt);
}

void write_metric_report_json(const std::string& path, std::span<const MetricRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const MetricRow& r : rows) {
    j.push_back({{"experiment", r.experiment},
                 {"metric", r.metric},
                 {"value", r.value},
                 {"config_hash", r.config_hash}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

std::vector<MetricRow> read_metric_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  nlohmann::json j;
  in >> j;
  std::vector<MetricRow> rows;
  for (const auto& item : j) {
    rows.push_back(MetricRow{item.at("experiment").get<std::string>(),
                             item.at("metric").get<std::string>(),
                             item.at("value").get<double>(),
                             item.at("config_hash").get<std::string>()});
  }
  return rows;
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  for (size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
  out << "\n";
  for (const auto& row : rows_) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

void CsvTable::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV: " + path);
  out << to_string();
}

}  // namespace odf
