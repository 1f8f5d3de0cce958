#include <doctest.h>

#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "hamlearn/ode/integrator.hpp"
#include "test_util.hpp"

using namespace hamlearn;
using namespace hamlearn::model;
using namespace hamlearn::ode;
using geom::Vec6;

namespace {

HamiltonianModel free_body(double lambda = 0.0) {
  ModelConfig cfg = ModelConfig::unit_nominal();
  cfg.learn_residuals = false;
  cfg.Lambda_bar = lambda * Mat6::Identity();
  return HamiltonianModel(cfg, std::make_shared<ad::ParamStore>());
}

HamiltonianModel jackal_truthlike() {
  ModelConfig cfg = ModelConfig::jackal_nominal(
      16.0, Eigen::Vector3d::Constant(std::sqrt(0.4)), 0.098, 0.31, 4.58e-2,
      0.147, /*torque_input=*/true,
      (Vec6() << 0.1, 0.1, 0.1, 0.1, 0.1, 0.1).finished());
  cfg.learn_residuals = false;
  return HamiltonianModel(cfg, std::make_shared<ad::ParamStore>());
}

}  // namespace

TEST_CASE("rk4 leaves a zero field unchanged") {
  auto zero_field = [](const ad::Tensor& x, const Eigen::Vector2d&) {
    return ad::Tensor::zeros(x.rows(), 1);
  };
  RigidState s;
  s.pm << 0.3, 0.1, 0, 0, 0, 0.2;
  const ad::Tensor next =
      rk4_step_t(zero_field, ad::Tensor::constant(s.pack()),
                 Eigen::Vector2d::Zero(), 0.1);
  CHECK((next.value() - s.pack()).norm() == 0.0);
}

TEST_CASE("free particle advances exactly") {
  HamiltonianModel m = free_body();
  RigidState s;
  s.pm << 1, 0, 0, 0, 0, 0;
  const RigidState next = rk4_step(m, s, Eigen::Vector2d::Zero(), 0.1);
  const double v_eff = 1.0 / (1.0 + 1e-6);  // floored inverse of unit mass
  CHECK((next.position() - Eigen::Vector3d(0.1 * v_eff, 0, 0)).norm() < 1e-14);
  CHECK((next.pm - s.pm).norm() < 1e-14);
}

TEST_CASE("pure rotation matches the closed-form exponential") {
  HamiltonianModel m = free_body();
  RigidState s;
  s.pm << 0, 0, 0, 0, 0, 1;  // w_z = 1 with unit inertia
  const double dt = 0.05;
  const RigidState next = rk4_step(m, s, Eigen::Vector2d::Zero(), dt);
  const double w_eff = 1.0 / (1.0 + 1e-6);  // floored inverse of unit inertia
  const Eigen::Matrix3d expected =
      s.rotation() * geom::so3_exp(Eigen::Vector3d(0, 0, dt * w_eff));
  CHECK((next.rotation() - expected).norm() < 1e-8);
}

TEST_CASE("zero-step rollout returns the initial state") {
  HamiltonianModel m = free_body();
  RigidState s;
  const auto states = rollout(m, s, {}, {0.0});
  CHECK(states.size() == 1);
  CHECK((states[0].pack() - s.pack()).norm() == 0.0);
}

TEST_CASE("linear system rollout matches the matrix exponential") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd a = testutil::random_mat(rng, 6, 6, 0.5);
  a -= 0.8 * Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd x0 = testutil::random_mat(rng, 6, 1);

  auto field = [&](const ad::Tensor& x, const Eigen::Vector2d&) {
    return ad::matmul(ad::Tensor::constant(a), x);
  };
  const int steps = 20;
  std::vector<double> times;
  std::vector<Eigen::Vector2d> controls(steps, Eigen::Vector2d::Zero());
  for (int n = 0; n <= steps; ++n) times.push_back(n * 0.05);
  const Rollout r =
      rollout_t(field, ad::Tensor::constant(x0), controls, times, 5);

  const Eigen::MatrixXd expm = (a * 1.0).exp();
  const Eigen::VectorXd expected = expm * x0;
  CHECK((r.states.back().value() - expected).norm() / expected.norm() < 1e-7);
}

TEST_CASE("long rollouts keep rotations orthogonal") {
  HamiltonianModel m = jackal_truthlike();
  RigidState s = m.from_pose_twist(
      RigidState().q, (Vec6() << 0.4, 0, 0, 0, 0, 0.3).finished());
  std::vector<double> times;
  std::vector<Eigen::Vector2d> controls;
  for (int n = 0; n < 250; ++n) {
    times.push_back(n * 0.05);
    controls.emplace_back(0.8 * std::sin(0.2 * n), -0.6 * std::cos(0.17 * n));
  }
  times.push_back(250 * 0.05);
  const auto states = rollout(m, s, controls, times, 5);
  double worst = 0.0;
  for (const auto& st : states) {
    const Eigen::Matrix3d r = st.rotation();
    worst = std::max(worst,
                     (r * r.transpose() - Eigen::Matrix3d::Identity()).norm());
    REQUIRE(st.pack().allFinite());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("halving dt shrinks the terminal error about sixteenfold") {
  HamiltonianModel m = jackal_truthlike();
  RigidState s = m.from_pose_twist(
      RigidState().q, (Vec6() << 0.3, 0, 0, 0, 0, 0.4).finished());
  const Eigen::Vector2d u(0.9, -0.7);
  auto integrate = [&](double dt, int steps) {
    RigidState cur = s;
    for (int n = 0; n < steps; ++n) cur = rk4_step(m, cur, u, dt);
    return cur.pack();
  };
  const Vec18 ref = integrate(1.0 / 512, 512);
  const double err_h = (integrate(1.0 / 16, 16) - ref).norm();
  const double err_h2 = (integrate(1.0 / 32, 32) - ref).norm();
  const double factor = err_h / err_h2;
  CHECK(factor > 12.0);
  CHECK(factor < 20.0);
}

TEST_CASE("energy conservation over five seconds") {
  HamiltonianModel m = free_body(0.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  RigidState s;
  for (int k = 0; k < 6; ++k) s.pm(k) = n(rng);
  const double h0 = m.hamiltonian(s);
  const int steps = 5000;
  std::vector<double> times;
  std::vector<Eigen::Vector2d> controls(steps, Eigen::Vector2d::Zero());
  for (int k = 0; k <= steps; ++k) times.push_back(k * 1e-3);
  const auto states = rollout(m, s, controls, times, 1);
  const double h1 = m.hamiltonian(states.back());
  CHECK(std::abs(h1 - h0) / std::max(1.0, std::abs(h0)) < 1e-8);
}

TEST_CASE("polar reprojection") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  axis.normalize();
  const Eigen::Matrix3d r = geom::so3_exp(axis * 1.1);
  RigidState s;
  for (int i = 0; i < 3; ++i) s.q.segment<3>(3 + 3 * i) = r.row(i).transpose();

  SUBCASE("exact rotations pass through") {
    const RigidState out = reproject_rotation(s);
    CHECK((out.rotation() - r).norm() < 1e-14);
  }

  SUBCASE("perturbed rotations become orthogonal") {
    RigidState noisy = s;
    for (int i = 3; i < 12; ++i) noisy.q(i) += 1e-4 * n(rng);
    const RigidState out = reproject_rotation(noisy);
    const Eigen::Matrix3d rr = out.rotation();
    CHECK((rr * rr.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
  }

  SUBCASE("uniform scale is stripped") {
    RigidState scaled = s;
    scaled.q.segment<9>(3) *= 1.01;
    const RigidState out = reproject_rotation(scaled);
    CHECK((out.rotation() - r).norm() < 1e-12);
  }

  SUBCASE("gross corruption is rejected") {
    RigidState bad = s;
    bad.q.segment<9>(3) *= 2.0;
    CHECK_THROWS_AS((void)reproject_rotation(bad), TooFarFromSO3);
  }
}
