#include "hamlearn/model/hamiltonian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace hamlearn::model {

using ad::LeafSet;
using ad::Tensor;

Vec18 RigidState::pack() const {
  Vec18 x;
  x << q, pm;
  return x;
}

RigidState RigidState::unpack(const Vec18& x) {
  RigidState s;
  s.q = x.segment<12>(0);
  s.pm = x.segment<6>(12);
  return s;
}

geom::GeneralizedCoord RigidState::coord(double tol) const {
  return geom::GeneralizedCoord::unpack(q, tol);
}

Eigen::Matrix3d RigidState::rotation() const {
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i) r.row(i) = q.segment<3>(3 + 3 * i).transpose();
  return r;
}

ModelConfig ModelConfig::unit_nominal() {
  ModelConfig cfg;
  cfg.L_bar = Mat6::Identity();
  cfg.Lambda_bar = std::sqrt(1e-3) * Mat6::Identity();
  cfg.g_bar << 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, -1, 1;
  return cfg;
}

ModelConfig ModelConfig::jackal_nominal(double mass,
                                        const Eigen::Vector3d& gamma,
                                        double wheel_radius, double track_width,
                                        double wheel_inertia,
                                        double time_constant, bool torque_input,
                                        const Vec6& lambda_diag) {
  ModelConfig cfg;
  cfg.L_bar = Mat6::Zero();
  cfg.L_bar.block<3, 3>(0, 0) = std::sqrt(mass) * Eigen::Matrix3d::Identity();
  cfg.L_bar.block<3, 3>(3, 3) = gamma.asDiagonal();
  cfg.Lambda_bar = lambda_diag.asDiagonal();
  const double scale = torque_input
                           ? 1.0 / wheel_radius
                           : wheel_inertia / (time_constant * wheel_radius);
  cfg.g_bar.setZero();
  cfg.g_bar(0, 0) = scale;
  cfg.g_bar(0, 1) = scale;
  cfg.g_bar(5, 0) = -scale * track_width / 2.0;
  cfg.g_bar(5, 1) = scale * track_width / 2.0;
  return cfg;
}

namespace {

ad::PatternPtr lower_tri_pattern(bool block_diagonal) {
  ad::Pattern p;
  if (block_diagonal) {
    for (int b = 0; b < 2; ++b) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c <= r; ++c) p.emplace_back(3 * b + r, 3 * b + c);
    }
  } else {
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c <= r; ++c) p.emplace_back(r, c);
  }
  return std::make_shared<const ad::Pattern>(std::move(p));
}

ad::PatternPtr gain_pattern(bool first_last_rows_only) {
  ad::Pattern p;
  if (first_last_rows_only) {
    p = {{0, 0}, {0, 1}, {5, 0}, {5, 1}};
  } else {
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 2; ++c) p.emplace_back(r, c);
  }
  return std::make_shared<const ad::Pattern>(std::move(p));
}

// dH/dq, or zeros when H has no coordinate dependence (constant terms).
Tensor grad_or_zero(const Tensor& out, const Tensor& wrt) {
  if (out.node() < 0) return Tensor::zeros(wrt.rows(), wrt.cols());
  return ad::gradient(out, {wrt})[0];
}

}  // namespace

Tensor coord_rotation_t(const Tensor& q12) {
  Tensor r1 = ad::transpose(ad::block(q12, 3, 0, 3, 1));
  Tensor r2 = ad::transpose(ad::block(q12, 6, 0, 3, 1));
  Tensor r3 = ad::transpose(ad::block(q12, 9, 0, 3, 1));
  return ad::vstack(ad::vstack(r1, r2), r3);
}

HamiltonianModel::HamiltonianModel(ModelConfig cfg,
                                   std::shared_ptr<ad::ParamStore> store)
    : cfg_(cfg), store_(std::move(store)) {
  tri_pattern_ = lower_tri_pattern(cfg_.block_diagonal);
  g_pattern_ = gain_pattern(cfg_.g_first_last_rows_only);
  if (!cfg_.learn_residuals) return;
  const int tri_out = static_cast<int>(tri_pattern_->size());
  const int g_out = static_cast<int>(g_pattern_->size());
  mlp_L_ = Mlp("L_res", 12, cfg_.hidden, tri_out);
  mlp_Lambda_ = Mlp("Lam_res", 12, cfg_.hidden, tri_out);
  mlp_g_ = Mlp("g_res", 12, cfg_.hidden, g_out);
  std::mt19937_64 rng(cfg_.init_seed + 0x9e3779b97f4a7c15ull);
  mlp_L_.register_params(*store_, rng, /*zero_head=*/true);
  mlp_Lambda_.register_params(*store_, rng, /*zero_head=*/true);
  mlp_g_.register_params(*store_, rng, /*zero_head=*/true);
  if (cfg_.learn_potential) {
    mlp_V_ = Mlp("V_res", 12, cfg_.hidden, 1);
    mlp_V_.register_params(*store_, rng, /*zero_head=*/true);
  }
}

HamiltonianModel::Terms HamiltonianModel::terms_t(LeafSet& leaves,
                                                  const Tensor& q12) const {
  Terms t;
  const Tensor l_bar = Tensor::constant(cfg_.L_bar);
  const Tensor lam_bar = Tensor::constant(cfg_.Lambda_bar);
  const Tensor g_bar = Tensor::constant(cfg_.g_bar);
  if (cfg_.learn_residuals) {
    t.L = ad::add(l_bar, ad::scatter(mlp_L_.forward(leaves, q12), tri_pattern_,
                                     6, 6));
    t.Lambda = ad::add(lam_bar, ad::scatter(mlp_Lambda_.forward(leaves, q12),
                                            tri_pattern_, 6, 6));
    t.g_residual = ad::scatter(mlp_g_.forward(leaves, q12), g_pattern_, 6, 2);
    t.g = ad::add(g_bar, t.g_residual);
    t.V = cfg_.learn_potential
              ? ad::add(Tensor::scalar(cfg_.V_bar), mlp_V_.forward(leaves, q12))
              : Tensor::scalar(cfg_.V_bar);
  } else {
    t.L = l_bar;
    t.Lambda = lam_bar;
    t.g_residual = Tensor::zeros(6, 2);
    t.g = g_bar;
    t.V = Tensor::scalar(cfg_.V_bar);
  }
  t.M = ad::matmul(t.L, ad::transpose(t.L));
  t.Minv = ad::inverse(
      ad::add(t.M, Tensor::constant(cfg_.psd_floor * Mat6::Identity())));
  t.D = ad::matmul(t.Lambda, ad::transpose(t.Lambda));
  return t;
}

Tensor HamiltonianModel::g_residual_t(LeafSet& leaves, const Tensor& q12) const {
  if (!cfg_.learn_residuals) return Tensor::zeros(6, 2);
  return ad::scatter(mlp_g_.forward(leaves, q12), g_pattern_, 6, 2);
}

Tensor HamiltonianModel::hamiltonian_t(LeafSet& leaves, const Tensor& q,
                                       const Tensor& pm) const {
  const Terms t = terms_t(leaves, q);
  const Tensor kinetic =
      ad::smul(ad::matmul(ad::transpose(pm), ad::matmul(t.Minv, pm)), 0.5);
  return ad::add(kinetic, t.V);
}

Tensor HamiltonianModel::field_t(LeafSet& leaves, const Tensor& x18,
                                 const Eigen::Vector2d& u) const {
  const Tensor q = ad::block(x18, 0, 0, 12, 1);
  const Tensor pm = ad::block(x18, 12, 0, 6, 1);
  const Terms t = terms_t(leaves, q);

  const Tensor kinetic =
      ad::smul(ad::matmul(ad::transpose(pm), ad::matmul(t.Minv, pm)), 0.5);
  const Tensor h = ad::add(kinetic, t.V);
  const Tensor dh_dq = grad_or_zero(h, q);
  const Tensor zeta = ad::matmul(t.Minv, pm);  // dH/dp

  const Tensor r = coord_rotation_t(q);
  const Tensor v = ad::block(zeta, 0, 0, 3, 1);
  const Tensor w = ad::block(zeta, 3, 0, 3, 1);

  // qdot = q_cross * dH/dp
  Tensor qdot = ad::matmul(r, v);
  for (int i = 0; i < 3; ++i) {
    const Tensor ri = ad::block(q, 3 + 3 * i, 0, 3, 1);
    qdot = ad::vstack(qdot, ad::cross(ri, w));
  }

  // pdot = -q_cross^T dH/dq + p_cross dH/dp - D dH/dp + g u
  const Tensor gq_p = ad::block(dh_dq, 0, 0, 3, 1);
  Tensor qc_v = ad::matmul(ad::transpose(r), gq_p);
  Tensor qc_w = Tensor::zeros(3, 1);
  for (int i = 0; i < 3; ++i) {
    const Tensor ri = ad::block(q, 3 + 3 * i, 0, 3, 1);
    const Tensor gi = ad::block(dh_dq, 3 + 3 * i, 0, 3, 1);
    qc_w = ad::add(qc_w, ad::cross(gi, ri));  // hat(r_i)^T g_i
  }
  const Tensor pm_v = ad::block(pm, 0, 0, 3, 1);
  const Tensor pm_w = ad::block(pm, 3, 0, 3, 1);
  const Tensor px_v = ad::cross(pm_v, w);
  const Tensor px_w = ad::add(ad::cross(pm_v, v), ad::cross(pm_w, w));

  Tensor pdot = ad::sub(ad::vstack(px_v, px_w), ad::vstack(qc_v, qc_w));
  pdot = ad::sub(pdot, ad::matmul(t.D, zeta));
  pdot = ad::add(pdot, ad::matmul(t.g, Tensor::constant(u)));

  return ad::vstack(qdot, pdot);
}

void HamiltonianModel::check_mass(const Vec12& q) const {
  const Mat6 m = mass(q);
  Eigen::SelfAdjointEigenSolver<Mat6> eig(m);
  if (eig.eigenvalues().minCoeff() <= 1e-9) {
    throw SingularMass("mass matrix is singular at the queried state");
  }
}

double HamiltonianModel::hamiltonian(const RigidState& s) const {
  check_mass(s.q);
  ad::Tape tape;
  ad::Tape::Scope scope(&tape);
  LeafSet leaves(*store_);
  return hamiltonian_t(leaves, Tensor::constant(s.q), Tensor::constant(s.pm))
      .scalar_value();
}

Vec18 HamiltonianModel::field(const RigidState& s,
                              const Eigen::Vector2d& u) const {
  check_mass(s.q);
  ad::Tape tape;  // dH/dq inside field_t needs a recording context
  ad::Tape::Scope scope(&tape);
  LeafSet leaves(*store_);
  return field_t(leaves, ad::make_leaf(s.pack()), u).value();
}

Mat18 HamiltonianModel::interconnection(const RigidState& s) const {
  Mat18 j = Mat18::Zero();
  const geom::Mat12x6 qc = geom::q_cross(s.q);
  j.block<12, 6>(0, 12) = qc;
  j.block<6, 12>(12, 0) = -qc.transpose();
  j.block<6, 6>(12, 12) = geom::p_cross(s.pm) - dissipation(s.q);
  return j;
}

Mat6 HamiltonianModel::mass(const Vec12& q) const {
  ad::Tape::Scope scope(nullptr);
  LeafSet leaves(*store_);
  return terms_t(leaves, Tensor::constant(q)).M.value();
}

Mat6 HamiltonianModel::mass_inv(const Vec12& q) const {
  ad::Tape::Scope scope(nullptr);
  LeafSet leaves(*store_);
  return terms_t(leaves, Tensor::constant(q)).Minv.value();
}

Mat6 HamiltonianModel::dissipation(const Vec12& q) const {
  ad::Tape::Scope scope(nullptr);
  LeafSet leaves(*store_);
  return terms_t(leaves, Tensor::constant(q)).D.value();
}

Mat6x2 HamiltonianModel::input_gain(const Vec12& q) const {
  ad::Tape::Scope scope(nullptr);
  LeafSet leaves(*store_);
  return terms_t(leaves, Tensor::constant(q)).g.value();
}

double HamiltonianModel::potential(const Vec12& q) const {
  ad::Tape::Scope scope(nullptr);
  LeafSet leaves(*store_);
  return terms_t(leaves, Tensor::constant(q)).V.scalar_value();
}

Vec12 HamiltonianModel::energy_coord_gradient(const RigidState& s) const {
  ad::Tape tape;
  ad::Tape::Scope scope(&tape);
  LeafSet leaves(*store_);
  const Tensor q = ad::make_leaf(s.q);
  const Tensor h = hamiltonian_t(leaves, q, Tensor::constant(s.pm));
  return grad_or_zero(h, q).value();
}

RigidState HamiltonianModel::from_pose_twist(const Vec12& q,
                                             const Vec6& zeta) const {
  RigidState s;
  s.q = q;
  s.pm = mass(q) * zeta;
  return s;
}

Vec6 HamiltonianModel::twist_of(const RigidState& s) const {
  return mass_inv(s.q) * s.pm;
}

}  // namespace hamlearn::model
