#pragma once

#include <string>
#include <vector>

#include "hamlearn/model/hamiltonian.hpp"
#include "hamlearn/percept/percept.hpp"

namespace hamlearn::train {

/// One recorded trajectory: times, held controls, a scan per sample, and
/// the known initial state. States are stored as [q; zeta] (model free).
struct TrajectoryRecord {
  int id = 0;
  std::vector<double> times;               // N + 1
  std::vector<Eigen::Vector2d> controls;   // N
  std::vector<percept::PointCloud> scans;  // N + 1
  model::Vec18 x0 = model::Vec18::Zero();
  std::vector<model::Vec18> truth_states;  // optional sidecar, N + 1
  bool collision_truncated = false;

  size_t steps() const { return controls.size(); }
  void check_consistent() const;
};

/// Directory layout: index.json plus per-trajectory scan and truth CSVs.
void save_dataset(const std::string& dir,
                  const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> load_dataset(const std::string& dir);

}  // namespace hamlearn::train
