#include "hamlearn/sim/collect.hpp"

#include <random>

namespace hamlearn::sim {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

TruthState random_start(const percept::EnvMap& env, double clearance,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(env.bounds_lo.x() + clearance,
                                            env.bounds_hi.x() - clearance);
  std::uniform_real_distribution<double> uy(env.bounds_lo.y() + clearance,
                                            env.bounds_hi.y() - clearance);
  std::uniform_real_distribution<double> uyaw(-M_PI, M_PI);
  for (int tries = 0; tries < 1000; ++tries) {
    TruthState s;
    s.x = ux(rng);
    s.y = uy(rng);
    s.yaw = uyaw(rng);
    if (env.clearance(Eigen::Vector2d(s.x, s.y)) >= clearance) return s;
  }
  throw Error("collect_dataset: could not find a collision-free start pose");
}

}  // namespace

std::vector<train::TrajectoryRecord> collect_dataset(
    const GroundTruthParams& params, const percept::EnvMap& env,
    const CollectConfig& cfg) {
  params.validate();
  if (cfg.trajectories < 1 || cfg.steps < 1 || cfg.dt <= 0) {
    throw Error("collect_dataset: need trajectories >= 1, steps >= 1, dt > 0");
  }

  std::vector<train::TrajectoryRecord> records;
  records.reserve(cfg.trajectories);
  // First-order low-pass over per-step white torque commands.
  const double tau_f = 1.0 / (2.0 * M_PI * cfg.cutoff_hz);
  const double alpha = cfg.dt / (tau_f + cfg.dt);

  for (int i = 0; i < cfg.trajectories; ++i) {
    std::mt19937_64 rng(mix(cfg.seed, static_cast<uint64_t>(i)));
    std::uniform_real_distribution<double> white(-cfg.amplitude, cfg.amplitude);
    std::uniform_real_distribution<double> white_diff(
        -cfg.amplitude * cfg.differential_fraction,
        cfg.amplitude * cfg.differential_fraction);
    train::TrajectoryRecord rec;
    rec.id = i;
    TruthState s = random_start(env, cfg.start_clearance, rng);
    rec.x0 = s.state_qzeta();

    Eigen::Vector2d u_filt = Eigen::Vector2d::Zero();
    auto scan_at = [&](const TruthState& st, int n) {
      percept::PointCloud c = percept::lidar_scan(
          env, geom::GeneralizedCoord::unpack(st.pose()), cfg.lidar,
          mix(mix(cfg.seed, 0xabcdefull), mix(i, n)));
      c.stamp = n * cfg.dt;
      return c;
    };

    rec.times.push_back(0.0);
    rec.scans.push_back(scan_at(s, 0));
    rec.truth_states.push_back(s.state_qzeta());
    for (int n = 0; n < cfg.steps; ++n) {
      const double common = white(rng);
      const double diff = white_diff(rng);
      const Eigen::Vector2d u_raw(common - diff, common + diff);
      u_filt += alpha * (u_raw - u_filt);
      const TruthState next = step_truth(params, s, u_filt, cfg.dt);
      if (env.clearance(Eigen::Vector2d(next.x, next.y)) < cfg.robot_radius) {
        rec.collision_truncated = true;
        break;
      }
      s = next;
      rec.controls.push_back(u_filt);
      rec.times.push_back((n + 1) * cfg.dt);
      rec.scans.push_back(scan_at(s, n + 1));
      rec.truth_states.push_back(s.state_qzeta());
    }
    rec.check_consistent();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hamlearn::sim
