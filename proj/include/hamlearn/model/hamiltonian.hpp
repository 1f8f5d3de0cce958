#pragma once

#include <memory>
#include <optional>

#include "hamlearn/ad/param_store.hpp"
#include "hamlearn/geom.hpp"
#include "hamlearn/model/mlp.hpp"

namespace hamlearn::model {

using geom::Mat6;
using geom::Vec12;
using geom::Vec6;
using Vec18 = Eigen::Matrix<double, 18, 1>;
using Mat18 = Eigen::Matrix<double, 18, 18>;
using Mat6x2 = Eigen::Matrix<double, 6, 2>;

/// Integrated state: generalized coordinates plus momentum.
struct RigidState {
  Vec12 q = (Vec12() << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1).finished();
  Vec6 pm = Vec6::Zero();

  Vec18 pack() const;
  static RigidState unpack(const Vec18& x);
  geom::GeneralizedCoord coord(double tol = 1e-6) const;
  Eigen::Matrix3d rotation() const;  // rows from q, unvalidated
  Eigen::Vector3d position() const { return q.segment<3>(0); }
};

/// Fixed nominal terms plus network layout for the learnable residuals.
struct ModelConfig {
  bool block_diagonal = true;
  bool learn_potential = false;  // planar worlds pin V to a constant
  bool g_first_last_rows_only = true;
  bool learn_residuals = true;
  int hidden = 64;
  double psd_floor = 1e-6;
  uint64_t init_seed = 0;

  Mat6 L_bar = Mat6::Identity();        // lower-triangular factor of M_bar
  Mat6 Lambda_bar = Mat6::Zero();       // lower-triangular factor of D_bar
  Mat6x2 g_bar = Mat6x2::Zero();
  double V_bar = 0.0;

  /// M = I, D = 1e-3 I, g rows (1,0,0,0,0,-1)/(1,0,0,0,0,1).
  static ModelConfig unit_nominal();
  /// Jackal-style nominal from mass, inertia factor, wheel geometry.
  /// `torque_input` selects wheel-torque gains 1/r; otherwise the
  /// first-order wheel model gains eta/(alpha r).
  static ModelConfig jackal_nominal(double mass, const Eigen::Vector3d& gamma,
                                    double wheel_radius, double track_width,
                                    double wheel_inertia, double time_constant,
                                    bool torque_input,
                                    const Vec6& lambda_diag);
};

/// Rotation rows of a packed coordinate vector restacked into a 3x3 matrix.
ad::Tensor coord_rotation_t(const ad::Tensor& q12);

/// The structured dynamics model: M, D, V, g with nominal + residual parts,
/// the Hamiltonian, and the full state-space vector field.
class HamiltonianModel {
 public:
  HamiltonianModel(ModelConfig cfg, std::shared_ptr<ad::ParamStore> store);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& store() const { return *store_; }
  std::shared_ptr<ad::ParamStore> store_ptr() const { return store_; }
  ad::LeafSet leaves() const { return ad::LeafSet(*store_); }

  struct Terms {
    ad::Tensor L, Lambda;        // assembled factors
    ad::Tensor M, Minv, D, g, V;
    ad::Tensor g_residual;       // residual part of g (for regularization)
  };

  // Tensor paths; record on the active tape so dH/dq can be taken.
  Terms terms_t(ad::LeafSet& leaves, const ad::Tensor& q12) const;
  /// Residual part of the input gain alone (cheap; for regularization).
  ad::Tensor g_residual_t(ad::LeafSet& leaves, const ad::Tensor& q12) const;
  ad::Tensor hamiltonian_t(ad::LeafSet& leaves, const ad::Tensor& q,
                           const ad::Tensor& pm) const;
  ad::Tensor field_t(ad::LeafSet& leaves, const ad::Tensor& x18,
                     const Eigen::Vector2d& u) const;

  // Value entry points (scratch tape inside).
  double hamiltonian(const RigidState& s) const;  // throws SingularMass
  Vec18 field(const RigidState& s, const Eigen::Vector2d& u) const;
  Mat18 interconnection(const RigidState& s) const;
  Mat6 mass(const Vec12& q) const;
  Mat6 mass_inv(const Vec12& q) const;  // floored inverse
  Mat6 dissipation(const Vec12& q) const;
  Mat6x2 input_gain(const Vec12& q) const;
  double potential(const Vec12& q) const;
  /// dH/dq at (q, pm), via the recorded graph.
  Vec12 energy_coord_gradient(const RigidState& s) const;

  RigidState from_pose_twist(const Vec12& q, const Vec6& zeta) const;
  Vec6 twist_of(const RigidState& s) const;

 private:
  void check_mass(const Vec12& q) const;

  ModelConfig cfg_;
  std::shared_ptr<ad::ParamStore> store_;
  Mlp mlp_L_, mlp_Lambda_, mlp_g_, mlp_V_;
  ad::PatternPtr tri_pattern_;  // lower-triangular scatter layout
  ad::PatternPtr g_pattern_;
};

}  // namespace hamlearn::model
