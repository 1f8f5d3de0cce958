#pragma once

#include "hamlearn/model/hamiltonian.hpp"
#include "hamlearn/percept/percept.hpp"

namespace hamlearn::sim {

enum class InputMode { Torque, WheelVelocityError };

struct GroundTruthParams {
  double mass = 16.0;
  Eigen::Vector3d gamma = Eigen::Vector3d::Constant(std::sqrt(0.4));
  double wheel_radius = 0.098;
  double track_width = 0.31;
  double wheel_inertia = 4.58e-2;
  double wheel_time_constant = 0.147;
  double d_v = 1.0;   // linear viscous friction, N s/m
  double d_w = 0.5;   // yaw viscous friction, N m s
  InputMode mode = InputMode::Torque;

  double yaw_inertia() const { return gamma.z() * gamma.z(); }
  void validate() const;
};

/// Planar nonholonomic truth state; lateral body velocity is zero by
/// construction.
struct TruthState {
  double x = 0, y = 0, yaw = 0;
  double vx = 0, wz = 0;

  geom::Vec12 pose() const;
  geom::Vec6 twist() const;
  model::Vec18 state_qzeta() const;  // [q; zeta]
  static TruthState from_qzeta(const model::Vec18& x);
};

/// Wheel torques implied by the input under the given mode.
Eigen::Vector2d wheel_torques(const GroundTruthParams& p,
                              const Eigen::Vector2d& u);

/// One RK4 step of the constrained planar dynamics.
TruthState step_truth(const GroundTruthParams& p, const TruthState& s,
                      const Eigen::Vector2d& u, double dt);

/// The truth dynamics written as a Hamiltonian model: constant mass
/// diag(m I, Gamma Gamma^T), diagonal dissipation with a large lateral
/// entry standing in for the exact constraint, and the geometric input
/// gains. No learnable residuals.
model::ModelConfig truth_equivalent_config(const GroundTruthParams& p,
                                           double lateral_dissipation = 1e3);

struct CollectResult;

struct CollectConfig {
  int trajectories = 32;
  int steps = 250;
  double dt = 0.05;
  int correspondences = 40;
  percept::LidarSpec lidar;
  double amplitude = 1.2;      // white common-mode torque before filtering
  double differential_fraction = 0.4;  // differential amplitude, joystick-like
  double cutoff_hz = 1.0;      // excitation low-pass cutoff
  uint64_t seed = 0;
  double robot_radius = 0.25;
  double start_clearance = 0.7;
};

}  // namespace hamlearn::sim
