#pragma once

#include <functional>
#include <vector>

#include "hamlearn/model/hamiltonian.hpp"

namespace hamlearn::ode {

using FieldFn = std::function<ad::Tensor(const ad::Tensor& x18,
                                         const Eigen::Vector2d& u)>;

/// One classical RK4 update; records when a tape is active.
ad::Tensor rk4_step_t(const FieldFn& field, const ad::Tensor& x,
                      const Eigen::Vector2d& u, double dt);

/// States at the sample times of a fixed-step integration.
struct Rollout {
  std::vector<double> times;
  std::vector<ad::Tensor> states;

  model::RigidState state(size_t n) const {
    return model::RigidState::unpack(states.at(n).value());
  }
  size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

/// Integrates through `times` with controls held constant per interval,
/// splitting each interval into `substeps` RK4 steps. Differentiable when
/// run under a tape: every state stays graph-connected to x0 and the model
/// parameters.
Rollout rollout_t(const FieldFn& field, const ad::Tensor& x0,
                  const std::vector<Eigen::Vector2d>& controls,
                  const std::vector<double>& times, int substeps = 5);

/// Value-level stepping for a model; bounded memory (scratch tape per step).
model::RigidState rk4_step(const model::HamiltonianModel& m,
                           const model::RigidState& s,
                           const Eigen::Vector2d& u, double dt);

std::vector<model::RigidState> rollout(const model::HamiltonianModel& m,
                                       const model::RigidState& s0,
                                       const std::vector<Eigen::Vector2d>& controls,
                                       const std::vector<double>& times,
                                       int substeps = 5);

/// Nearest orthogonal factor of the state's rotation (polar projection).
/// Only for use between epochs / at rollout boundaries, never inside a
/// differentiable graph. Throws TooFarFromSO3 when ||RR^T - I||_F >= 0.1.
model::RigidState reproject_rotation(const model::RigidState& s);

}  // namespace hamlearn::ode
