#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hamlearn/ad/tensor.hpp"
#include "hamlearn/geom.hpp"

namespace hamlearn::percept {

enum class Frame { Body, World };

struct PointCloud {
  Eigen::Matrix3Xd points;
  Frame frame = Frame::Body;
  double stamp = 0.0;

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
};

struct Segment {
  Eigen::Vector2d a, b;
};

struct Box {
  Eigen::Vector2d lo, hi;
};

/// Planar world of axis-aligned walls and boxes.
struct EnvMap {
  std::vector<Segment> walls;
  std::vector<Box> boxes;
  Eigen::Vector2d bounds_lo = Eigen::Vector2d(-5, -5);
  Eigen::Vector2d bounds_hi = Eigen::Vector2d(5, 5);

  /// 10 m x 10 m room with three interior boxes.
  static EnvMap default_room();

  std::vector<Segment> all_segments() const;
  double clearance(const Eigen::Vector2d& p) const;

  static EnvMap load(const std::string& path);
  void save(const std::string& path) const;
};

struct LidarSpec {
  int beams = 360;
  double max_range = 30.0;
  double noise_sigma = 0.01;
  double sensor_height = 0.3;
};

/// One ray per uniformly spaced azimuth in the body xy-plane; hits returned
/// in the body frame at the sensor height, misses omitted.
PointCloud lidar_scan(const EnvMap& env, const geom::GeneralizedCoord& pose,
                      const LidarSpec& spec, uint64_t seed);

/// Rigid map taking points in frame a to frame b: y_b = R y_a + t.
struct RelPose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Index-aligned correspondence clouds (column m of `a` matches column m
/// of `b`), each in its own body frame.
struct ScanPair {
  PointCloud a, b;
};

/// Point-to-point ICP from the identity; returns the a-to-b map.
RelPose icp_point_to_point(const PointCloud& a, const PointCloud& b,
                           double match_thresh, int max_iters = 40);

/// One-to-one nearest matches of a against b after applying `rel`; every
/// surviving inlier is returned (column index pairs).
std::vector<std::pair<int, int>> match_clouds(const PointCloud& a,
                                              const PointCloud& b,
                                              const RelPose& rel,
                                              double inlier_thresh);

/// Nearest point on the scan polyline (consecutive beams joined when closer
/// than `max_gap`) to the query. Interpolating along the surface avoids the
/// resampling drift of vertex-only matching when correspondences are chained
/// over many steps.
Eigen::Vector3d project_to_scan(const PointCloud& scan,
                                const Eigen::Vector3d& query,
                                double max_gap = 0.3);

/// Builds M random one-to-one correspondences. With a hint the match uses
/// the given relative pose (oracle mode); without it, ICP estimates the
/// pose first. Throws TooFewInliers when fewer than M matches survive.
ScanPair make_scan_pair(const PointCloud& a, const PointCloud& b,
                        const std::optional<RelPose>& rel_pose_hint, int m,
                        double inlier_thresh, uint64_t seed);

/// Body points at step n re-expressed in the body frame at step n+1 through
/// the two world poses; differentiable in the pose arguments.
ad::Tensor chain_transform_t(const ad::Tensor& points_body_n,
                             const ad::Tensor& r_n, const ad::Tensor& p_n,
                             const ad::Tensor& r_next, const ad::Tensor& p_next);

Eigen::Matrix3Xd chain_transform(const Eigen::Matrix3Xd& points_body_n,
                                 const Eigen::Matrix3d& r_n,
                                 const Eigen::Vector3d& p_n,
                                 const Eigen::Matrix3d& r_next,
                                 const Eigen::Vector3d& p_next);

/// Sum of squared distances between corresponding columns.
ad::Tensor observation_loss_t(const Eigen::Matrix3Xd& actual,
                              const ad::Tensor& predicted);
double observation_loss(const ScanPair& pair,
                        const Eigen::Matrix3Xd& predicted_next);

void save_scan_csv(const std::string& path,
                   const std::vector<PointCloud>& scans);
std::vector<PointCloud> load_scan_csv(const std::string& path);

}  // namespace hamlearn::percept
