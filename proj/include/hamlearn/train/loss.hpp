#pragma once

#include "hamlearn/ode/integrator.hpp"
#include "hamlearn/train/dataset.hpp"

namespace hamlearn::train {

/// A training unit: a bounded chunk of one trajectory with its known
/// initial state and per-step correspondence pairs.
struct Window {
  model::Vec18 x0 = model::Vec18::Zero();  // [q; zeta]
  std::vector<double> times;
  std::vector<Eigen::Vector2d> controls;
  std::vector<percept::ScanPair> pairs;   // one per step
  std::vector<model::Vec18> truth;        // [q; zeta] rows; may be empty

  size_t steps() const { return controls.size(); }
};

/// Splits a record into windows of at most `max_steps` steps and builds the
/// correspondence pairs. With `oracle_pairs` the matcher is seeded with the
/// truth relative pose; otherwise ICP estimates it.
std::vector<Window> make_windows(const TrajectoryRecord& rec, int max_steps,
                                 int correspondences, double inlier_thresh,
                                 bool oracle_pairs, uint64_t seed);

/// Observation-space loss over one window: the rollout's predicted poses
/// push each pair's first cloud into the next body frame, squared residuals
/// against the observed correspondences, plus the L1 gain regularizer
/// averaged over the window's states.
ad::Tensor observation_window_loss_t(const model::HamiltonianModel& m,
                                     ad::LeafSet& leaves, const Window& w,
                                     int substeps, double lambda_g);
double observation_window_loss(const model::HamiltonianModel& m,
                               const Window& w, int substeps, double lambda_g);

/// State-space loss (position, chordal rotation, twist residuals) against
/// the truth sidecar. Throws MissingStates when the window has no truth.
ad::Tensor state_window_loss_t(const model::HamiltonianModel& m,
                               ad::LeafSet& leaves, const Window& w,
                               int substeps, double lambda_g);
double state_window_loss(const model::HamiltonianModel& m, const Window& w,
                         int substeps, double lambda_g);

}  // namespace hamlearn::train
