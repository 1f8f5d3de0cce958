#include "hamlearn/sim/diff_drive.hpp"

#include <cmath>

namespace hamlearn::sim {

void GroundTruthParams::validate() const {
  if (mass <= 0 || wheel_radius <= 0 || track_width <= 0 ||
      wheel_inertia <= 0 || wheel_time_constant <= 0 || d_v < 0 || d_w < 0 ||
      gamma.minCoeff() <= 0) {
    throw Error("GroundTruthParams: all physical parameters must be positive");
  }
}

geom::Vec12 TruthState::pose() const {
  geom::Vec12 q;
  const double c = std::cos(yaw), s = std::sin(yaw);
  q << x, y, 0,
       c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return q;
}

geom::Vec6 TruthState::twist() const {
  geom::Vec6 z;
  z << vx, 0, 0, 0, 0, wz;
  return z;
}

model::Vec18 TruthState::state_qzeta() const {
  model::Vec18 xs;
  xs << pose(), twist();
  return xs;
}

TruthState TruthState::from_qzeta(const model::Vec18& xs) {
  TruthState s;
  s.x = xs(0);
  s.y = xs(1);
  s.yaw = std::atan2(xs(6), xs(3));  // r2.x vs r1.x of the packed rows
  s.vx = xs(12);
  s.wz = xs(17);
  return s;
}

Eigen::Vector2d wheel_torques(const GroundTruthParams& p,
                              const Eigen::Vector2d& u) {
  if (p.mode == InputMode::Torque) return u;
  // First-order wheel law: omega_dot = u / alpha, torque = eta * omega_dot.
  return (p.wheel_inertia / p.wheel_time_constant) * u;
}

namespace {

struct Deriv {
  double dx, dy, dyaw, dvx, dwz;
};

Deriv truth_rate(const GroundTruthParams& p, const TruthState& s,
                 const Eigen::Vector2d& tau) {
  const double force = (tau(0) + tau(1)) / p.wheel_radius;
  const double torque =
      p.track_width / (2.0 * p.wheel_radius) * (tau(1) - tau(0));
  Deriv d;
  d.dx = s.vx * std::cos(s.yaw);
  d.dy = s.vx * std::sin(s.yaw);
  d.dyaw = s.wz;
  d.dvx = (force - p.d_v * s.vx) / p.mass;
  d.dwz = (torque - p.d_w * s.wz) / p.yaw_inertia();
  return d;
}

TruthState advance(const TruthState& s, const Deriv& d, double h) {
  TruthState out = s;
  out.x += h * d.dx;
  out.y += h * d.dy;
  out.yaw += h * d.dyaw;
  out.vx += h * d.dvx;
  out.wz += h * d.dwz;
  return out;
}

}  // namespace

TruthState step_truth(const GroundTruthParams& p, const TruthState& s,
                      const Eigen::Vector2d& u, double dt) {
  if (dt <= 0) throw Error("step_truth: dt must be positive");
  const Eigen::Vector2d tau = wheel_torques(p, u);
  const Deriv k1 = truth_rate(p, s, tau);
  const Deriv k2 = truth_rate(p, advance(s, k1, dt / 2), tau);
  const Deriv k3 = truth_rate(p, advance(s, k2, dt / 2), tau);
  const Deriv k4 = truth_rate(p, advance(s, k3, dt), tau);
  TruthState out = s;
  out.x += dt / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  out.y += dt / 6 * (k1.dy + 2 * k2.dy + 2 * k3.dy + k4.dy);
  out.yaw += dt / 6 * (k1.dyaw + 2 * k2.dyaw + 2 * k3.dyaw + k4.dyaw);
  out.vx += dt / 6 * (k1.dvx + 2 * k2.dvx + 2 * k3.dvx + k4.dvx);
  out.wz += dt / 6 * (k1.dwz + 2 * k2.dwz + 2 * k3.dwz + k4.dwz);
  return out;
}

model::ModelConfig truth_equivalent_config(const GroundTruthParams& p,
                                           double lateral_dissipation) {
  p.validate();
  geom::Vec6 lambda;
  const double lat = std::sqrt(lateral_dissipation);
  lambda << std::sqrt(p.d_v), lat, lat, lat, lat, std::sqrt(p.d_w);
  model::ModelConfig cfg = model::ModelConfig::jackal_nominal(
      p.mass, p.gamma, p.wheel_radius, p.track_width, p.wheel_inertia,
      p.wheel_time_constant, p.mode == InputMode::Torque, lambda);
  cfg.learn_residuals = false;
  return cfg;
}

}  // namespace hamlearn::sim
