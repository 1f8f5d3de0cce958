#include <doctest.h>

#include <filesystem>
#include <random>

#include "hamlearn/percept/percept.hpp"

using namespace hamlearn;
using namespace hamlearn::percept;
using geom::GeneralizedCoord;
using geom::Rotation;

namespace {

GeneralizedCoord planar_pose(double x, double y, double yaw) {
  GeneralizedCoord q;
  q.p = Eigen::Vector3d(x, y, 0);
  q.R = Rotation(geom::so3_exp(Eigen::Vector3d(0, 0, yaw)));
  return q;
}

EnvMap empty_room() {
  EnvMap env;
  env.bounds_lo = Eigen::Vector2d(-5, -5);
  env.bounds_hi = Eigen::Vector2d(5, 5);
  const Eigen::Vector2d c[4] = {{-5, -5}, {5, -5}, {5, 5}, {-5, 5}};
  for (int i = 0; i < 4; ++i) env.walls.push_back({c[i], c[(i + 1) % 4]});
  return env;
}

}  // namespace

TEST_CASE("four beams in a square room") {
  EnvMap env = empty_room();
  LidarSpec spec;
  spec.beams = 4;
  spec.noise_sigma = 0.0;
  const PointCloud c = lidar_scan(env, planar_pose(0, 0, 0), spec, 1);
  REQUIRE(c.size() == 4);
  CHECK((c.points.col(0) - Eigen::Vector3d(5, 0, spec.sensor_height)).norm() <
        1e-12);
  CHECK((c.points.col(1) - Eigen::Vector3d(0, 5, spec.sensor_height)).norm() <
        1e-12);
  CHECK((c.points.col(2) - Eigen::Vector3d(-5, 0, spec.sensor_height)).norm() <
        1e-12);
  CHECK((c.points.col(3) - Eigen::Vector3d(0, -5, spec.sensor_height)).norm() <
        1e-12);
}

TEST_CASE("short range yields an empty cloud") {
  EnvMap env = empty_room();
  LidarSpec spec;
  spec.beams = 8;
  spec.max_range = 1.0;
  spec.noise_sigma = 0.0;
  CHECK(lidar_scan(env, planar_pose(0, 0, 0.3), spec, 1).empty());
}

TEST_CASE("range noise has the folded-normal mean") {
  EnvMap env = empty_room();
  LidarSpec spec;
  spec.beams = 360;
  spec.noise_sigma = 0.01;
  LidarSpec clean = spec;
  clean.noise_sigma = 0.0;
  const PointCloud ref = lidar_scan(env, planar_pose(0.7, -0.3, 0.2), clean, 5);
  double abs_err = 0.0;
  int count = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const PointCloud noisy =
        lidar_scan(env, planar_pose(0.7, -0.3, 0.2), spec, 100 + trial);
    REQUIRE(noisy.size() == ref.size());
    for (Eigen::Index j = 0; j < ref.size(); ++j) {
      abs_err += std::abs(noisy.points.col(j).head<2>().norm() -
                          ref.points.col(j).head<2>().norm());
      ++count;
    }
  }
  // E|N(0, sigma)| = sigma sqrt(2/pi) ~ 0.0079788
  CHECK(abs_err / count == doctest::Approx(0.01 * std::sqrt(2.0 / M_PI))
                               .epsilon(0.05));
}

TEST_CASE("scan pair on identical clouds self-matches") {
  EnvMap env = EnvMap::default_room();
  LidarSpec spec;
  spec.noise_sigma = 0.0;
  const PointCloud c = lidar_scan(env, planar_pose(0, 0, 0), spec, 1);
  const ScanPair pair = make_scan_pair(c, c, RelPose{}, 40, 0.1, 7);
  CHECK(pair.a.size() == 40);
  CHECK((pair.a.points - pair.b.points).norm() == 0.0);
}

TEST_CASE("scan pair with an exact rigid offset") {
  EnvMap env = EnvMap::default_room();
  LidarSpec spec;
  spec.noise_sigma = 0.0;
  const PointCloud a = lidar_scan(env, planar_pose(0.2, -0.4, 0.1), spec, 1);
  RelPose rel;
  rel.R = geom::so3_exp(Eigen::Vector3d(0, 0, 0.25));
  rel.t = Eigen::Vector3d(0.3, -0.1, 0.0);
  PointCloud b = a;
  b.points = (rel.R * a.points).colwise() + rel.t;
  const ScanPair pair = make_scan_pair(a, b, rel, 40, 0.05, 3);
  const Eigen::Matrix3Xd moved = (rel.R * pair.a.points).colwise() + rel.t;
  CHECK((moved - pair.b.points).norm() < 1e-12);
}

TEST_CASE("too few inliers is reported") {
  EnvMap env = EnvMap::default_room();
  LidarSpec spec;
  spec.beams = 30;
  spec.noise_sigma = 0.0;
  const PointCloud a = lidar_scan(env, planar_pose(0, 0, 0), spec, 1);
  PointCloud far = a;
  far.points.array() += 50.0;  // nothing matches
  CHECK_THROWS_AS(make_scan_pair(a, far, RelPose{}, 10, 0.1, 3),
                  TooFewInliers);
}

TEST_CASE("icp recovers a small planar motion") {
  EnvMap env = EnvMap::default_room();
  LidarSpec spec;
  spec.noise_sigma = 0.0;
  const auto pose_a = planar_pose(0.5, -0.2, 0.3);
  const auto pose_b = planar_pose(0.52, -0.17, 0.33);
  const PointCloud ca = lidar_scan(env, pose_a, spec, 1);
  const PointCloud cb = lidar_scan(env, pose_b, spec, 2);
  const RelPose est = icp_point_to_point(ca, cb, 0.3);
  // truth map from frame a to frame b
  const Eigen::Matrix3d ra = pose_a.R.matrix(), rb = pose_b.R.matrix();
  const Eigen::Matrix3d r_true = rb.transpose() * ra;
  const Eigen::Vector3d t_true = rb.transpose() * (pose_a.p - pose_b.p);
  CHECK((est.R - r_true).norm() < 0.02);
  CHECK((est.t - t_true).norm() < 0.02);
}

TEST_CASE("chain transform") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix3Xd pts(3, 25);
  for (int j = 0; j < 25; ++j) {
    pts.col(j) = Eigen::Vector3d(n(rng) * 2, n(rng) * 2, 0.3);
  }
  const Eigen::Matrix3d r1 = geom::so3_exp(Eigen::Vector3d(0, 0, 0.4));
  const Eigen::Vector3d p1(1.0, -0.5, 0);
  const Eigen::Matrix3d r2 = geom::so3_exp(Eigen::Vector3d(0, 0, 0.55));
  const Eigen::Vector3d p2(1.1, -0.45, 0);

  SUBCASE("identity when poses coincide") {
    CHECK((chain_transform(pts, r1, p1, r1, p1) - pts).norm() < 1e-12);
  }

  SUBCASE("pure translation of the second pose shifts points") {
    const Eigen::Vector3d d(0.2, -0.3, 0.0);
    const Eigen::Matrix3Xd out = chain_transform(pts, r1, p1, r1, p1 + d);
    const Eigen::Matrix3Xd expected =
        pts.colwise() + Eigen::Vector3d(-(r1.transpose() * d));
    CHECK((out - expected).norm() < 1e-12);
  }

  SUBCASE("forward chain composed with the swapped chain is the identity") {
    const Eigen::Matrix3Xd there = chain_transform(pts, r1, p1, r2, p2);
    const Eigen::Matrix3Xd back = chain_transform(there, r2, p2, r1, p1);
    CHECK((back - pts).norm() < 1e-12);
  }

  SUBCASE("non-orthogonal pose is rejected") {
    CHECK_THROWS(chain_transform(pts, 1.1 * r1, p1, r2, p2));
  }
}

TEST_CASE("observation loss values and gauge invariance") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix3Xd pts(3, 10);
  for (int j = 0; j < 10; ++j) {
    pts.col(j) = Eigen::Vector3d(n(rng), n(rng), 0.3);
  }
  ScanPair pair;
  pair.a.points = pts;
  pair.b.points = pts;

  SUBCASE("zero at an exact match, quadratic in a single offset") {
    CHECK(observation_loss(pair, pts) == 0.0);
    Eigen::Matrix3Xd off = pts;
    off(0, 3) += 0.1;
    CHECK(observation_loss(pair, off) == doctest::Approx(0.01).epsilon(1e-12));
  }

  SUBCASE("count mismatch is rejected") {
    Eigen::Matrix3Xd wrong(3, 9);
    wrong.setZero();
    CHECK_THROWS_AS((void)observation_loss(pair, wrong), CountMismatch);
  }

  SUBCASE("global planar gauge change leaves the loss unchanged") {
    const Eigen::Matrix3d r1 = geom::so3_exp(Eigen::Vector3d(0, 0, 0.4));
    const Eigen::Vector3d p1(1.0, -0.5, 0);
    const Eigen::Matrix3d r2 = geom::so3_exp(Eigen::Vector3d(0, 0, 0.52));
    const Eigen::Vector3d p2(1.15, -0.42, 0);
    const double base =
        observation_loss(pair, chain_transform(pts, r1, p1, r2, p2));
    const Eigen::Matrix3d g = geom::so3_exp(Eigen::Vector3d(0, 0, 1.1));
    const Eigen::Vector3d shift(2.0, -1.0, 0.0);
    const double moved = observation_loss(
        pair, chain_transform(pts, g * r1, g * p1 + shift, g * r2,
                              g * p2 + shift));
    CHECK(moved == doctest::Approx(base).epsilon(1e-10));
  }

  SUBCASE("translation gradient vanishes at the optimum") {
    // predicted == actual when both poses agree; d(loss)/d(p_next) ~ 0
    ad::Tape tape;
    ad::Tape::Scope scope(&tape);
    const Eigen::Matrix3d r = geom::so3_exp(Eigen::Vector3d(0, 0, 0.3));
    const Eigen::Vector3d p(0.7, 0.2, 0);
    const ad::Tensor pn = ad::make_leaf(p);
    const ad::Tensor predicted = chain_transform_t(
        ad::Tensor::constant(pts), ad::Tensor::constant(r),
        ad::Tensor::constant(p), ad::Tensor::constant(r), pn);
    const ad::Tensor loss = observation_loss_t(pts, predicted);
    CHECK(ad::gradient(loss, {pn})[0].value().norm() < 1e-8);
  }
}

TEST_CASE("envmap file round-trip") {
  EnvMap env = EnvMap::default_room();
  const auto path =
      std::filesystem::temp_directory_path() / "hamlearn_env_test.txt";
  env.save(path.string());
  const EnvMap back = EnvMap::load(path.string());
  CHECK(back.walls.size() == env.walls.size());
  CHECK(back.boxes.size() == env.boxes.size());
  CHECK((back.bounds_hi - env.bounds_hi).norm() == 0.0);
  LidarSpec spec;
  spec.noise_sigma = 0.0;
  const PointCloud a = lidar_scan(env, planar_pose(0, 0, 0.1), spec, 1);
  const PointCloud b = lidar_scan(back, planar_pose(0, 0, 0.1), spec, 1);
  CHECK((a.points - b.points).norm() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("scan csv round-trip") {
  EnvMap env = EnvMap::default_room();
  LidarSpec spec;
  spec.beams = 24;
  std::vector<PointCloud> scans;
  for (int n = 0; n < 3; ++n) {
    PointCloud c = lidar_scan(env, planar_pose(0.1 * n, 0, 0.05 * n), spec,
                              static_cast<uint64_t>(n));
    c.stamp = 0.05 * n;
    scans.push_back(std::move(c));
  }
  const auto path =
      std::filesystem::temp_directory_path() / "hamlearn_scan_test.csv";
  save_scan_csv(path.string(), scans);
  const auto back = load_scan_csv(path.string());
  REQUIRE(back.size() == scans.size());
  for (size_t i = 0; i < scans.size(); ++i) {
    CHECK(back[i].stamp == scans[i].stamp);
    CHECK((back[i].points - scans[i].points).norm() == 0.0);
  }
  std::filesystem::remove(path);
}
