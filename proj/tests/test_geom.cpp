#include <doctest.h>

#include <random>

#include "hamlearn/geom.hpp"

using namespace hamlearn;
using namespace hamlearn::geom;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  axis.normalize();
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return so3_exp(axis * u(rng));
}

}  // namespace

TEST_CASE("hat matches the cross-product matrix") {
  Mat3 ex;
  ex << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK((hat(Vec3(1, 0, 0)) - ex).norm() == doctest::Approx(0.0));
  CHECK(hat(Vec3::Zero()).norm() == 0.0);
  Mat3 m123;
  m123 << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK((hat(Vec3(1, 2, 3)) - m123).norm() == doctest::Approx(0.0));

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec3 x(n(rng), n(rng), n(rng)), y(n(rng), n(rng), n(rng));
    CHECK((hat(x) * y - x.cross(y)).norm() < 1e-14);
    CHECK((hat(x).transpose() + hat(x)).norm() == 0.0);
  }
}

TEST_CASE("vee inverts hat and rejects non-skew input") {
  CHECK((vee(hat(Vec3(1, 2, 3))) - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK(vee(Mat3::Zero()).norm() == 0.0);
  Mat3 zrot;
  zrot << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  CHECK((vee(zrot) - Vec3(0, 0, 1)).norm() == 0.0);
  CHECK_THROWS_AS(vee(Mat3::Identity()), NotSkew);
}

TEST_CASE("so3 exp/log basics") {
  CHECK((so3_exp(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
  Mat3 ex;
  ex << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((so3_exp(Vec3(0, 0, M_PI / 2)) - ex).norm() < 1e-15);
  const Vec3 w(0.3, -0.2, 0.1);
  CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-10);
}

TEST_CASE("so3 exp/log are inverse on the principal branch") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(u(rng), u(rng), u(rng));
    w *= 3.0;  // up to |w| ~ 5.2 but we re-clamp below pi
    if (w.norm() >= M_PI - 1e-3) w *= (M_PI - 1e-3) / w.norm();
    const Mat3 r = so3_exp(w);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((so3_exp(so3_log(r)) - r).norm() < 1e-9);
  }
  // tiny angles hit the series branch
  const Vec3 tiny(1e-10, -2e-10, 5e-11);
  CHECK((so3_log(so3_exp(tiny)) - tiny).norm() < 1e-18);
}

TEST_CASE("so3_log raises near pi") {
  CHECK_THROWS_AS(so3_log(so3_exp(Vec3(0, 0, M_PI - 1e-9))), NearPiAngle);
}

TEST_CASE("chordal distance") {
  CHECK(chordal_dist(Mat3::Identity(), Mat3::Identity()) == 0.0);
  Mat3 flip = Eigen::Vector3d(-1, -1, 1).asDiagonal();
  CHECK(chordal_dist(Mat3::Identity(), flip) == doctest::Approx(4.0));
  CHECK(chordal_dist(Mat3::Identity(), so3_exp(Vec3(0, 0, M_PI / 2))) ==
        doctest::Approx(2.0));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng);
    CHECK(chordal_dist(a, b) == doctest::Approx(chordal_dist(b, a)));
    CHECK(chordal_dist(a, b) <= 4.0 + 1e-12);
    CHECK(chordal_dist(a, b) >= -1e-12);
  }
}

TEST_CASE("generalized coordinates pack/unpack round-trips") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    GeneralizedCoord q{Vec3(n(rng), n(rng), n(rng)),
                       Rotation(random_rotation(rng))};
    const Vec12 packed = q.pack();
    const GeneralizedCoord back = GeneralizedCoord::unpack(packed);
    CHECK((back.pack() - packed).norm() == 0.0);
  }
  Twist z{Vec3(1, 2, 3), Vec3(4, 5, 6)};
  CHECK((Twist::unpack(z.pack()).pack() - z.pack()).norm() == 0.0);
}

TEST_CASE("q_cross identity block and p_cross zero") {
  GeneralizedCoord q;  // R = I at origin
  const Mat12x6 m = q_cross(q);
  CHECK((m.block<3, 3>(0, 0) - Mat3::Identity()).norm() == 0.0);
  CHECK(p_cross(Vec6::Zero()).norm() == 0.0);
}

TEST_CASE("q_cross reproduces rigid-body kinematics") {
  // qdot = q_cross(q) * zeta must equal pdot = R v and Rdot = R hat(w),
  // row-wise rdot_i = hat(r_i) w.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(rng);
    GeneralizedCoord q{Vec3(n(rng), n(rng), n(rng)), Rotation(r)};
    Twist z{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    const Eigen::Matrix<double, 12, 1> qdot = q_cross(q) * z.pack();
    CHECK((qdot.segment<3>(0) - r * z.v).norm() < 1e-14);
    const Mat3 rdot = r * hat(z.w);
    for (int k = 0; k < 3; ++k) {
      CHECK((qdot.segment<3>(3 + 3 * k) - rdot.row(k).transpose()).norm() <
            1e-14);
    }
  }
}

TEST_CASE("p_cross block layout and skew symmetry") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Vec6 pm;
    for (int k = 0; k < 6; ++k) pm(k) = n(rng);
    const Mat6 m = p_cross(pm);
    CHECK((m + m.transpose()).norm() < 1e-14);
    CHECK((m.block<3, 3>(0, 3) - hat(pm.segment<3>(0))).norm() == 0.0);
    CHECK((m.block<3, 3>(3, 0) - hat(pm.segment<3>(0))).norm() == 0.0);
    CHECK((m.block<3, 3>(3, 3) - hat(pm.segment<3>(3))).norm() == 0.0);
    CHECK(m.block<3, 3>(0, 0).norm() == 0.0);
  }
}

TEST_CASE("rotation constructor validates membership") {
  CHECK_THROWS_AS(Rotation(2.0 * Mat3::Identity()), TooFarFromSO3);
  const Mat3 reflect = Eigen::Vector3d(1, 1, -1).asDiagonal();
  CHECK_THROWS_AS((void)Rotation(reflect), TooFarFromSO3);
}
