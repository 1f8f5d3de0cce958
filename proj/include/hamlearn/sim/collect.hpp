#pragma once

#include "hamlearn/sim/diff_drive.hpp"
#include "hamlearn/train/dataset.hpp"

namespace hamlearn::sim {

/// Drives the truth robot with low-pass-filtered random wheel torques and
/// records scans, controls, and the truth-state sidecar. Trajectories that
/// would collide are truncated and flagged.
std::vector<train::TrajectoryRecord> collect_dataset(
    const GroundTruthParams& params, const percept::EnvMap& env,
    const CollectConfig& cfg);

}  // namespace hamlearn::sim
