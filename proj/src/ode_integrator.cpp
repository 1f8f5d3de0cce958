#include "hamlearn/ode/integrator.hpp"

#include <cmath>

namespace hamlearn::ode {

using ad::Tensor;

ad::Tensor rk4_step_t(const FieldFn& field, const ad::Tensor& x,
                      const Eigen::Vector2d& u, double dt) {
  if (dt <= 0.0) throw Error("rk4_step: dt must be positive");
  const Tensor k1 = field(x, u);
  const Tensor k2 = field(ad::add(x, ad::smul(k1, dt / 2.0)), u);
  const Tensor k3 = field(ad::add(x, ad::smul(k2, dt / 2.0)), u);
  const Tensor k4 = field(ad::add(x, ad::smul(k3, dt)), u);
  const Tensor incr =
      ad::add(ad::add(k1, k4), ad::smul(ad::add(k2, k3), 2.0));
  return ad::add(x, ad::smul(incr, dt / 6.0));
}

Rollout rollout_t(const FieldFn& field, const ad::Tensor& x0,
                  const std::vector<Eigen::Vector2d>& controls,
                  const std::vector<double>& times, int substeps) {
  if (times.size() != controls.size() + 1) {
    throw Error("rollout: need exactly one more time stamp than controls");
  }
  if (substeps < 1) throw Error("rollout: substeps must be >= 1");
  for (size_t n = 0; n + 1 < times.size(); ++n) {
    if (times[n + 1] <= times[n]) {
      throw Error("rollout: times must be strictly increasing");
    }
  }
  Rollout out;
  out.times = times;
  out.states.reserve(times.size());
  out.states.push_back(x0);
  Tensor x = x0;
  for (size_t n = 0; n < controls.size(); ++n) {
    const double dt = (times[n + 1] - times[n]) / substeps;
    for (int k = 0; k < substeps; ++k) {
      x = rk4_step_t(field, x, controls[n], dt);
    }
    out.states.push_back(x);
  }
  return out;
}

model::RigidState rk4_step(const model::HamiltonianModel& m,
                           const model::RigidState& s,
                           const Eigen::Vector2d& u, double dt) {
  ad::Tape tape;
  ad::Tape::Scope scope(&tape);
  ad::LeafSet leaves = m.leaves();
  auto field = [&](const Tensor& x, const Eigen::Vector2d& uu) {
    return m.field_t(leaves, x, uu);
  };
  const Tensor next = rk4_step_t(field, ad::make_leaf(s.pack()), u, dt);
  return model::RigidState::unpack(next.value());
}

std::vector<model::RigidState> rollout(
    const model::HamiltonianModel& m, const model::RigidState& s0,
    const std::vector<Eigen::Vector2d>& controls,
    const std::vector<double>& times, int substeps) {
  if (times.size() != controls.size() + 1) {
    throw Error("rollout: need exactly one more time stamp than controls");
  }
  std::vector<model::RigidState> out;
  out.reserve(times.size());
  out.push_back(s0);
  ad::Tape tape;
  ad::LeafSet leaves = m.leaves();
  model::RigidState s = s0;
  for (size_t n = 0; n < controls.size(); ++n) {
    const double dt = (times[n + 1] - times[n]) / substeps;
    ad::Tape::Scope scope(&tape);
    for (int k = 0; k < substeps; ++k) {
      tape.reset();
      auto field = [&](const Tensor& x, const Eigen::Vector2d& uu) {
        return m.field_t(leaves, x, uu);
      };
      const Tensor next = rk4_step_t(field, ad::make_leaf(s.pack()), controls[n], dt);
      s = model::RigidState::unpack(next.value());
    }
    out.push_back(s);
  }
  return out;
}

model::RigidState reproject_rotation(const model::RigidState& s) {
  Eigen::Matrix3d r = s.rotation();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() >= 0.1) {
    throw TooFarFromSO3("reproject_rotation: drift beyond repair threshold");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1, 1, (u * v.transpose()).determinant());
  const Eigen::Matrix3d polar = u * d.asDiagonal() * v.transpose();
  model::RigidState out = s;
  for (int i = 0; i < 3; ++i) {
    out.q.segment<3>(3 + 3 * i) = polar.row(i).transpose();
  }
  return out;
}

}  // namespace hamlearn::ode
