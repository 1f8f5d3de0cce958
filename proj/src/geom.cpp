#include "hamlearn/geom.hpp"

#include <cmath>

namespace hamlearn::geom {

Mat3 hat(const Vec3& x) {
  Mat3 m;
  m << 0.0, -x.z(), x.y(),
       x.z(), 0.0, -x.x(),
      -x.y(), x.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& a) {
  if ((a + a.transpose()).norm() >= 1e-6) {
    throw NotSkew("vee: input is not skew-symmetric");
  }
  return Vec3(a(2, 1), a(0, 2), a(1, 0));
}

Mat3 so3_exp(const Vec3& x) {
  const double theta = x.norm();
  double s, c;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    s = 1.0 - t2 / 6.0;
    c = 0.5 - t2 / 24.0;
  } else {
    s = std::sin(theta) / theta;
    c = (1.0 - std::cos(theta)) / (theta * theta);
  }
  const Mat3 k = hat(x);
  return Mat3::Identity() + s * k + c * (k * k);
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * w.norm();                // sin(theta)
  const double c = 0.5 * (r.trace() - 1.0);       // cos(theta)
  const double theta = std::atan2(s, c);
  if (theta >= M_PI - 1e-6) {
    throw NearPiAngle("so3_log: rotation angle within 1e-6 of pi");
  }
  if (theta < kSmallAngle) {
    return 0.5 * (1.0 + theta * theta / 6.0) * w;
  }
  if (theta > M_PI / 2) {
    // Near pi the antisymmetric part degrades; take the axis magnitude from
    // the symmetric part (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) aa^T.
    Vec3 axis;
    for (int i = 0; i < 3; ++i) {
      const double d = (0.5 * (r(i, i) + r(i, i)) - c) / (1.0 - c);
      axis(i) = std::sqrt(std::max(0.0, d));
      if (w(i) < 0.0) axis(i) = -axis(i);
    }
    axis.normalize();
    return theta * axis;
  }
  return theta / (2.0 * s) * w;
}

double chordal_dist(const Mat3& ra, const Mat3& rb) {
  return (Mat3::Identity() - ra.transpose() * rb).trace();
}

Rotation::Rotation(const Mat3& m, double tol) : m_(m) {
  if ((m * m.transpose() - Mat3::Identity()).norm() > tol ||
      std::abs(m.determinant() - 1.0) > tol) {
    throw TooFarFromSO3("Rotation: matrix is not in SO(3) within tolerance");
  }
}

Vec12 GeneralizedCoord::pack() const {
  Vec12 q;
  q.segment<3>(0) = p;
  for (int i = 0; i < 3; ++i) q.segment<3>(3 + 3 * i) = R.row(i);
  return q;
}

GeneralizedCoord GeneralizedCoord::unpack(const Vec12& q, double tol) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) m.row(i) = q.segment<3>(3 + 3 * i).transpose();
  return GeneralizedCoord{q.segment<3>(0), Rotation(m, tol)};
}

Vec6 Twist::pack() const {
  Vec6 z;
  z << v, w;
  return z;
}

Twist Twist::unpack(const Vec6& z) {
  return Twist{z.segment<3>(0), z.segment<3>(3)};
}

Mat12x6 q_cross(const Vec12& q) {
  Mat3 r;
  for (int i = 0; i < 3; ++i) r.row(i) = q.segment<3>(3 + 3 * i).transpose();
  Mat12x6 m = Mat12x6::Zero();
  m.block<3, 3>(0, 0) = r;
  for (int i = 0; i < 3; ++i) {
    m.block<3, 3>(3 + 3 * i, 3) = hat(q.segment<3>(3 + 3 * i));
  }
  return m;
}

Mat12x6 q_cross(const GeneralizedCoord& q) { return q_cross(q.pack()); }

Mat6 p_cross(const Vec6& pm) {
  const Mat3 pv = hat(pm.segment<3>(0));
  const Mat3 pw = hat(pm.segment<3>(3));
  Mat6 m = Mat6::Zero();
  m.block<3, 3>(0, 3) = pv;
  m.block<3, 3>(3, 0) = pv;
  m.block<3, 3>(3, 3) = pw;
  return m;
}

}  // namespace hamlearn::geom
