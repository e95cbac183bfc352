#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "epistereo/error.hpp"
#include "epistereo/image.hpp"
#include "epistereo/point_cloud.hpp"

namespace epistereo {

/// Exact nearest-neighbour index over a copy of a point set. Ties in
/// distance go to the smallest point index, so results match a brute-force
/// scan.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    if (!points_.empty()) root_ = build(0, static_cast<int>(order_.size()));
  }

  struct Hit {
    std::size_t index = 0;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  Hit nearest(const Vec3& q) const {
    Hit best;
    best.index = std::numeric_limits<std::size_t>::max();
    if (root_ >= 0) search(root_, q, best);
    return best;
  }

  static double squared_distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    int begin = 0;
    int end = 0;
    int axis = -1;  // -1 for leaves
    int left = -1;
    int right = -1;
    Vec3 lo;
    Vec3 hi;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double va = points_[a][axis];
                       const double vb = points_[b][axis];
                       return va < vb || (va == vb && a < b);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(int id, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = squared_distance(points_[idx], q);
        if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
          best.squared_distance = d2;
          best.index = idx;
        }
      }
      return;
    }
    // Visit the child whose box is nearer first; skip boxes that cannot hold
    // a point at or below the current best distance.
    const double dl = box_distance(nodes_[n.left], q);
    const double dr = box_distance(nodes_[n.right], q);
    const bool left_first = dl <= dr;
    const int first = left_first ? n.left : n.right;
    const int second = left_first ? n.right : n.left;
    if ((left_first ? dl : dr) <= best.squared_distance) search(first, q, best);
    if ((left_first ? dr : dl) <= best.squared_distance) search(second, q, best);
  }

  static double box_distance(const Node& n, const Vec3& q) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = std::max({n.lo[k] - q[k], 0.0, q[k] - n.hi[k]});
      d2 += e * e;
    }
    return d2;
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct Completeness {
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  std::optional<double> gain_pct;  // empty when count_b == 0
  bool division_by_zero() const { return !gain_pct.has_value(); }
};

/// Point counts and the signed percentage gain 100 (a - b) / b.
inline Completeness completeness(const PointCloud& a, const PointCloud& b) {
  Completeness c{a.size(), b.size(), std::nullopt};
  if (c.count_b > 0)
    c.gain_pct = 100.0 * (static_cast<double>(c.count_a) - static_cast<double>(c.count_b)) /
                 static_cast<double>(c.count_b);
  return c;
}

struct CloudDistance {
  double mean_abs_dist = 0.0;
  double std_dist = 0.0;
  std::size_t points_used = 0;
  std::optional<double> max_dist;
};

/// Mean and population standard deviation of nearest-neighbour distances
/// from `distances`, skipping entries above max_dist.
inline CloudDistance summarize_distances(const std::vector<double>& distances,
                                         std::optional<double> max_dist) {
  CloudDistance out;
  out.max_dist = max_dist;
  double sum = 0.0;
  for (double d : distances) {
    if (max_dist && d > *max_dist) continue;
    sum += d;
    ++out.points_used;
  }
  if (out.points_used == 0) return out;
  out.mean_abs_dist = sum / static_cast<double>(out.points_used);
  double var = 0.0;
  for (double d : distances) {
    if (max_dist && d > *max_dist) continue;
    var += (d - out.mean_abs_dist) * (d - out.mean_abs_dist);
  }
  out.std_dist = std::sqrt(var / static_cast<double>(out.points_used));
  return out;
}

/// Per-point distances from test to the nearest reference point.
inline std::vector<double> nearest_distances(const PointCloud& test, const PointCloud& reference) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyReference, "reference cloud is empty");
  const KdTree tree(reference.points);
  std::vector<double> dist(test.size());
  parallel_for(0, static_cast<int>(test.size()), [&](int i) {
    dist[i] = std::sqrt(tree.nearest(test.points[i]).squared_distance);
  });
  return dist;
}

inline CloudDistance cloud_to_cloud(const PointCloud& test, const PointCloud& reference,
                                    std::optional<double> max_dist = std::nullopt) {
  return summarize_distances(nearest_distances(test, reference), max_dist);
}

/// Completeness and accuracy of one cloud against another.
struct EvalReport {
  Completeness counts;
  CloudDistance distance;
};

inline EvalReport evaluate_clouds(const PointCloud& test, const PointCloud& reference,
                                  std::optional<double> max_dist = std::nullopt) {
  return {completeness(test, reference), cloud_to_cloud(test, reference, max_dist)};
}

}  // namespace epistereo
