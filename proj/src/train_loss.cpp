#include "hamlearn/train/loss.hpp"

#include <unordered_map>

namespace hamlearn::train {

using ad::Tensor;

void TrajectoryRecord::check_consistent() const {
  const size_t n = controls.size();
  if (times.size() != n + 1 || scans.size() != n + 1) {
    throw Error("TrajectoryRecord: times/scans do not match control count");
  }
  if (!truth_states.empty() && truth_states.size() != n + 1) {
    throw Error("TrajectoryRecord: truth sidecar length mismatch");
  }
}

namespace {

percept::RelPose truth_rel_pose(const model::Vec18& xa, const model::Vec18& xb) {
  const model::RigidState sa = model::RigidState::unpack(xa);
  const model::RigidState sb = model::RigidState::unpack(xb);
  const Eigen::Matrix3d ra = sa.rotation(), rb = sb.rotation();
  percept::RelPose rel;
  rel.R = rb.transpose() * ra;
  rel.t = rb.transpose() * (sa.position() - sb.position());
  return rel;
}

}  // namespace

std::vector<Window> make_windows(const TrajectoryRecord& rec, int max_steps,
                                 int correspondences, double inlier_thresh,
                                 bool oracle_pairs, uint64_t seed) {
  rec.check_consistent();
  if (max_steps < 1) throw Error("make_windows: max_steps must be >= 1");
  const size_t n = rec.steps();
  const bool have_truth = !rec.truth_states.empty();
  if (!have_truth && (oracle_pairs || n > static_cast<size_t>(max_steps))) {
    throw MissingStates(
        "make_windows: truth sidecar needed for oracle pairs and for window "
        "initial states");
  }

  std::vector<Window> windows;
  for (size_t start = 0; start < n; start += static_cast<size_t>(max_steps)) {
    const size_t stop = std::min(n, start + static_cast<size_t>(max_steps));
    Window w;
    w.x0 = start == 0 ? rec.x0 : rec.truth_states[start];
    for (size_t k = start; k <= stop; ++k) {
      w.times.push_back(rec.times[k]);
      if (have_truth) w.truth.push_back(rec.truth_states[k]);
    }
    for (size_t k = start; k < stop; ++k) w.controls.push_back(rec.controls[k]);

    // Correspondences compose into point tracks across the window, so the
    // chained predictions accumulate pose error from the window start
    // instead of resetting at every pair. Tracked positions interpolate on
    // the observed scan polylines: vertex-only matching would drift along
    // surfaces as the sampling pattern slides.
    std::vector<std::vector<Eigen::Vector3d>> tracks;
    for (Eigen::Index i = 0; i < rec.scans[start].size(); ++i) {
      tracks.push_back({rec.scans[start].points.col(i)});
    }
    for (size_t k = start; k < stop; ++k) {
      percept::RelPose rel;
      if (oracle_pairs) {
        rel = truth_rel_pose(rec.truth_states[k], rec.truth_states[k + 1]);
      } else {
        rel = percept::icp_point_to_point(rec.scans[k], rec.scans[k + 1],
                                          inlier_thresh);
      }
      std::vector<std::vector<Eigen::Vector3d>> alive;
      for (auto& tr : tracks) {
        const Eigen::Vector3d moved = rel.R * tr.back() + rel.t;
        const Eigen::Vector3d target =
            percept::project_to_scan(rec.scans[k + 1], moved);
        if ((target - moved).norm() > inlier_thresh) continue;
        tr.push_back(target);
        alive.push_back(std::move(tr));
      }
      tracks = std::move(alive);
    }
    if (static_cast<int>(tracks.size()) < correspondences) {
      throw TooFewInliers("make_windows: only " +
                          std::to_string(tracks.size()) +
                          " point tracks survive the window");
    }
    std::mt19937_64 rng(seed ^ (0x51ed2700ull + 977 * start + rec.id));
    std::shuffle(tracks.begin(), tracks.end(), rng);
    tracks.resize(static_cast<size_t>(correspondences));

    for (size_t k = start; k < stop; ++k) {
      percept::ScanPair pair;
      pair.a.frame = percept::Frame::Body;
      pair.b.frame = percept::Frame::Body;
      pair.a.stamp = rec.times[k];
      pair.b.stamp = rec.times[k + 1];
      pair.a.points.resize(3, correspondences);
      pair.b.points.resize(3, correspondences);
      for (int t = 0; t < correspondences; ++t) {
        const auto& tr = tracks[static_cast<size_t>(t)];
        pair.a.points.col(t) = tr[k - start];
        pair.b.points.col(t) = tr[k - start + 1];
      }
      w.pairs.push_back(std::move(pair));
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {

// Rollout of the model from the window's [q; zeta] start; momentum is taken
// through the model's own mass matrix so it stays parameter-connected.
ode::Rollout window_rollout(const model::HamiltonianModel& m,
                            ad::LeafSet& leaves, const Window& w,
                            int substeps) {
  const Tensor q0 = Tensor::constant(w.x0.segment<12>(0));
  const Tensor zeta0 = Tensor::constant(w.x0.segment<6>(12));
  const auto terms = m.terms_t(leaves, q0);
  const Tensor pm0 = ad::matmul(terms.M, zeta0);
  const Tensor x0 = ad::vstack(q0, pm0);
  auto field = [&m, &leaves](const Tensor& x, const Eigen::Vector2d& u) {
    return m.field_t(leaves, x, u);
  };
  return ode::rollout_t(field, x0, w.controls, w.times, substeps);
}

Tensor gain_regularizer(const model::HamiltonianModel& m, ad::LeafSet& leaves,
                        const ode::Rollout& ro, double lambda_g) {
  if (lambda_g == 0.0) return Tensor::scalar(0.0);
  Tensor acc = Tensor::scalar(0.0);
  for (const Tensor& x : ro.states) {
    const Tensor q = ad::block(x, 0, 0, 12, 1);
    acc = ad::add(acc, ad::sum(ad::absval(m.g_residual_t(leaves, q))));
  }
  return ad::smul(acc, lambda_g);
}

}  // namespace

ad::Tensor observation_window_loss_t(const model::HamiltonianModel& m,
                                     ad::LeafSet& leaves, const Window& w,
                                     int substeps, double lambda_g) {
  if (w.pairs.size() != w.steps()) {
    throw Error("observation loss: need one scan pair per step");
  }
  const ode::Rollout ro = window_rollout(m, leaves, w, substeps);
  Tensor loss = Tensor::scalar(0.0);
  if (!w.pairs.empty()) {
    // Chained predictions: the first observed cloud rides the predicted
    // motion from the window start, so the per-step comparisons see the
    // accumulated pose error (the recursion with y~_0 = y_0 collapses to a
    // single rigid chain per step).
    const Tensor y0 = Tensor::constant(w.pairs[0].a.points);
    const Tensor q0 = ad::block(ro.states[0], 0, 0, 12, 1);
    const Tensor r0 = model::coord_rotation_t(q0);
    const Tensor p0 = ad::block(ro.states[0], 0, 0, 3, 1);
    for (size_t n = 0; n < w.steps(); ++n) {
      const Tensor& xb = ro.states[n + 1];
      const Tensor qb = ad::block(xb, 0, 0, 12, 1);
      const Tensor predicted = percept::chain_transform_t(
          y0, r0, p0, model::coord_rotation_t(qb), ad::block(xb, 0, 0, 3, 1));
      loss = ad::add(
          loss, percept::observation_loss_t(w.pairs[n].b.points, predicted));
    }
  }
  return ad::add(loss, gain_regularizer(m, leaves, ro, lambda_g));
}

double observation_window_loss(const model::HamiltonianModel& m,
                               const Window& w, int substeps,
                               double lambda_g) {
  ad::Tape tape;
  ad::Tape::Scope scope(&tape);
  ad::LeafSet leaves = m.leaves();
  return observation_window_loss_t(m, leaves, w, substeps, lambda_g)
      .scalar_value();
}

ad::Tensor state_window_loss_t(const model::HamiltonianModel& m,
                               ad::LeafSet& leaves, const Window& w,
                               int substeps, double lambda_g) {
  if (w.truth.size() != w.times.size()) {
    throw MissingStates("state loss: window carries no truth states");
  }
  const ode::Rollout ro = window_rollout(m, leaves, w, substeps);
  Tensor loss = Tensor::scalar(0.0);
  for (size_t n = 1; n < ro.states.size(); ++n) {
    const Tensor& x = ro.states[n];
    const Tensor q = ad::block(x, 0, 0, 12, 1);
    const Tensor pm = ad::block(x, 12, 0, 6, 1);
    const auto terms = m.terms_t(leaves, q);
    const Tensor zeta = ad::matmul(terms.Minv, pm);

    const Eigen::Vector3d p_true = w.truth[n].segment<3>(0);
    Eigen::Matrix3d r_true;
    for (int i = 0; i < 3; ++i) {
      r_true.row(i) = w.truth[n].segment<3>(3 + 3 * i).transpose();
    }
    const Eigen::Matrix<double, 6, 1> zeta_true = w.truth[n].segment<6>(12);

    const Tensor dp = ad::sub(ad::block(x, 0, 0, 3, 1),
                              Tensor::constant(p_true));
    const Tensor chord = ad::trace(
        ad::sub(Tensor::identity(3),
                ad::matmul(ad::transpose(model::coord_rotation_t(q)),
                           Tensor::constant(r_true))));
    const Tensor dz = ad::sub(zeta, Tensor::constant(zeta_true));
    loss = ad::add(loss, ad::add(ad::sum(ad::mul(dp, dp)),
                                 ad::add(chord, ad::sum(ad::mul(dz, dz)))));
  }
  return ad::add(loss, gain_regularizer(m, leaves, ro, lambda_g));
}

double state_window_loss(const model::HamiltonianModel& m, const Window& w,
                         int substeps, double lambda_g) {
  ad::Tape tape;
  ad::Tape::Scope scope(&tape);
  ad::LeafSet leaves = m.leaves();
  return state_window_loss_t(m, leaves, w, substeps, lambda_g).scalar_value();
}

}  // namespace hamlearn::train
