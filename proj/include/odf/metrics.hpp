#pragma once

#include <span>
#include <string>
#include <vector>

#include "odf/vec3.hpp"

namespace odf {

// Static kd-tree for nearest-neighbor queries over a fixed point set.
class KdTree3 {
 public:
  explicit KdTree3(std::span<const Vec3> points);
  double nearest_dist2(const Vec3& query) const;
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Vec3 point;
    int left = -1, right = -1;
    uint8_t axis = 0;
  };
  int build(std::vector<Vec3>& pts, int begin, int end);
  void search(int node, const Vec3& query, double& best) const;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric chamfer distance, scaled by 1000:
//   1000 * (mean_a min_b ||a-b||^2 + mean_b min_a ||a-b||^2).
// brute_force bypasses the kd-tree (cross-check path).
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool brute_force = false);

// F-score (%) at a distance threshold: harmonic mean of the fraction of
// predicted points within `threshold` of ground truth and vice versa.
double fscore_depth(std::span<const Vec3> pred, std::span<const Vec3> gt,
                    double threshold = 0.005, bool brute_force = false);

struct MaskMetrics {
  double recall = 0.0;     // percent
  double precision = 0.0;  // percent
  double fscore = 0.0;     // percent
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Binary classification metrics over the intersecting class.
MaskMetrics mask_metrics(std::span<const uint8_t> pred, std::span<const uint8_t> gt);
// Confidence variant, thresholded at 0.5.
MaskMetrics mask_metrics(std::span<const double> pred_confidence, std::span<const uint8_t> gt);

// --- reports --------------------------------------------------------------------

struct MetricRow {
  std::string experiment;
  std::string metric;
  double value = 0.0;
  std::string config_hash;
};

void write_metric_report_json(const std::string& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metric_report_json(const std::string& path);

// Small table writer mirroring the paper-style ablation layouts.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
  void write(const std::string& path) const;
  std::string to_string() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace odf
