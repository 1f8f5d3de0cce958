#pragma once

#include "hamlearn/train/loss.hpp"

namespace hamlearn::train {

enum class LossMode { Observation, State };

struct TrainConfig {
  int iterations = 400;
  double lr = 1e-3;
  int substeps = 2;
  double lambda_g = 1e-3;
  int window = 50;
  LossMode mode = LossMode::Observation;
  uint64_t seed = 0;
  double test_fraction = 0.25;
  bool oracle_pairs = true;
  int correspondences = 40;
  double inlier_thresh = 0.1;
  double weight_decay = 1e-3;  // decoupled shrinkage on residual weights
  double grad_clip = 10.0;     // global-norm cap; <= 0 disables
  double lr_decay = 1.0;       // multiplicative per-iteration decay
  int checkpoint_every = 100;
  std::string checkpoint_dir;  // empty disables checkpoints
  int threads = 1;

  void validate() const;
};

struct FitResult {
  std::vector<double> train_loss;  // mean per train window, per iteration
  std::vector<double> test_loss;   // mean per test window (nan if none)
  std::string final_checkpoint;
};

/// Full-batch optimization of the model's residual parameters. Loss history
/// is recorded every iteration; a non-finite loss restores the last good
/// checkpointed parameters and raises DivergedLoss.
FitResult fit(model::HamiltonianModel& m,
              const std::vector<TrajectoryRecord>& dataset,
              const TrainConfig& cfg);

void save_loss_csv(const std::string& path, const FitResult& result);

}  // namespace hamlearn::train
