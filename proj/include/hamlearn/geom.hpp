#pragma once

#include <Eigen/Dense>

#include "hamlearn/errors.hpp"

namespace hamlearn::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;

// Series switch for the Rodrigues formulas.
inline constexpr double kSmallAngle = 1e-8;

/// Cross-product matrix: hat(x) * y == x.cross(y).
Mat3 hat(const Vec3& x);

/// Inverse of hat. Throws NotSkew if ||A + A^T||_F >= 1e-6.
Vec3 vee(const Mat3& a);

/// Rodrigues exponential on SO(3).
Mat3 so3_exp(const Vec3& x);

/// Principal-branch logarithm. Throws NearPiAngle at angle >= pi - 1e-6.
Vec3 so3_log(const Mat3& r);

/// tr(I - Ra^T Rb); 0 at equality, 4 at a 180-degree offset.
double chordal_dist(const Mat3& ra, const Mat3& rb);

/// Rotation matrix with validated orthonormality and unit determinant.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m, double tol = 1e-9);

  static Rotation identity() { return Rotation(); }
  static Rotation exp(const Vec3& x) { return Rotation(so3_exp(x), 1e-9); }

  const Mat3& matrix() const { return m_; }
  // Rows of R, as column vectors.
  Vec3 row(int i) const { return m_.row(i).transpose(); }

 private:
  Mat3 m_;
};

/// Pose as position plus rotation; flattens to [p; r1; r2; r3] in R^12.
struct GeneralizedCoord {
  Vec3 p = Vec3::Zero();
  Rotation R;

  Vec12 pack() const;
  static GeneralizedCoord unpack(const Vec12& q, double tol = 1e-9);
};

/// Body-frame linear and angular velocity; flattens to [v; w] in R^6.
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Vec6 pack() const;
  static Twist unpack(const Vec6& z);
};

/// 12x6 configuration operator mapping body twist to coordinate rates:
/// pdot = R v, rdot_i = hat(r_i) w.
Mat12x6 q_cross(const GeneralizedCoord& q);
Mat12x6 q_cross(const Vec12& q);

/// 6x6 momentum operator [[0, hat(pv)], [hat(pv), hat(pw)]].
Mat6 p_cross(const Vec6& pm);

}  // namespace hamlearn::geom
