#include "hamlearn/percept/percept.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hamlearn::percept {

EnvMap EnvMap::default_room() {
  EnvMap env;
  env.bounds_lo = Eigen::Vector2d(-5, -5);
  env.bounds_hi = Eigen::Vector2d(5, 5);
  const Eigen::Vector2d c[4] = {{-5, -5}, {5, -5}, {5, 5}, {-5, 5}};
  for (int i = 0; i < 4; ++i) env.walls.push_back({c[i], c[(i + 1) % 4]});
  env.boxes.push_back({{-3.0, -1.0}, {-2.0, 1.0}});
  env.boxes.push_back({{1.5, 2.0}, {3.0, 3.5}});
  env.boxes.push_back({{1.0, -3.5}, {2.5, -2.5}});
  return env;
}

std::vector<Segment> EnvMap::all_segments() const {
  std::vector<Segment> segs = walls;
  for (const Box& b : boxes) {
    const Eigen::Vector2d p0(b.lo.x(), b.lo.y()), p1(b.hi.x(), b.lo.y());
    const Eigen::Vector2d p2(b.hi.x(), b.hi.y()), p3(b.lo.x(), b.hi.y());
    segs.push_back({p0, p1});
    segs.push_back({p1, p2});
    segs.push_back({p2, p3});
    segs.push_back({p3, p0});
  }
  return segs;
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Segment& s) {
  const Eigen::Vector2d d = s.b - s.a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0 ? (p - s.a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Smallest positive ray parameter hitting a segment, or +inf.
double ray_segment(const Eigen::Vector2d& o, const Eigen::Vector2d& d,
                   const Segment& s) {
  const Eigen::Vector2d e = s.b - s.a;
  const double denom = cross2(d, e);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d ao = s.a - o;
  const double t = cross2(ao, e) / denom;
  const double u = cross2(ao, d) / denom;
  if (t <= 1e-9 || u < 0.0 || u > 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return t;
}

}  // namespace

double EnvMap::clearance(const Eigen::Vector2d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : all_segments()) {
    best = std::min(best, point_segment_distance(p, s));
  }
  // inside a box counts as zero clearance
  for (const Box& b : boxes) {
    if (p.x() >= b.lo.x() && p.x() <= b.hi.x() && p.y() >= b.lo.y() &&
        p.y() <= b.hi.y()) {
      return 0.0;
    }
  }
  return best;
}

EnvMap EnvMap::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("EnvMap: cannot open " + path);
  EnvMap env;
  env.walls.clear();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "bounds") {
      ss >> env.bounds_lo.x() >> env.bounds_lo.y() >> env.bounds_hi.x() >>
          env.bounds_hi.y();
    } else if (kind == "wall") {
      Segment s;
      ss >> s.a.x() >> s.a.y() >> s.b.x() >> s.b.y();
      env.walls.push_back(s);
    } else if (kind == "box") {
      Box b;
      ss >> b.lo.x() >> b.lo.y() >> b.hi.x() >> b.hi.y();
      env.boxes.push_back(b);
    } else {
      throw Error("EnvMap: unknown record '" + kind + "' in " + path);
    }
    if (ss.fail()) throw Error("EnvMap: malformed line '" + line + "'");
  }
  if (env.walls.empty() && env.boxes.empty()) {
    throw Error("EnvMap: " + path + " lists no geometry");
  }
  return env;
}

void EnvMap::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error("EnvMap: cannot open " + path + " for writing");
  f << "# planar environment: axis-aligned walls and boxes (meters)\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "bounds %.17g %.17g %.17g %.17g\n",
                bounds_lo.x(), bounds_lo.y(), bounds_hi.x(), bounds_hi.y());
  f << buf;
  for (const Segment& s : walls) {
    std::snprintf(buf, sizeof(buf), "wall %.17g %.17g %.17g %.17g\n", s.a.x(),
                  s.a.y(), s.b.x(), s.b.y());
    f << buf;
  }
  for (const Box& b : boxes) {
    std::snprintf(buf, sizeof(buf), "box %.17g %.17g %.17g %.17g\n", b.lo.x(),
                  b.lo.y(), b.hi.x(), b.hi.y());
    f << buf;
  }
}

PointCloud lidar_scan(const EnvMap& env, const geom::GeneralizedCoord& pose,
                      const LidarSpec& spec, uint64_t seed) {
  if (spec.beams < 1) throw Error("lidar_scan: beams must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  const auto segs = env.all_segments();
  const Eigen::Vector2d origin = pose.p.head<2>();
  const Eigen::Matrix3d r = pose.R.matrix();
  const double yaw = std::atan2(r(1, 0), r(0, 0));

  std::vector<Eigen::Vector3d> hits;
  hits.reserve(spec.beams);
  for (int k = 0; k < spec.beams; ++k) {
    const double az = 2.0 * M_PI * k / spec.beams;
    const Eigen::Vector2d dir(std::cos(yaw + az), std::sin(yaw + az));
    double range = std::numeric_limits<double>::infinity();
    for (const Segment& s : segs) {
      range = std::min(range, ray_segment(origin, dir, s));
    }
    if (spec.noise_sigma > 0.0) range += noise(rng);
    if (!std::isfinite(range) || range > spec.max_range || range <= 0.0) {
      continue;
    }
    hits.emplace_back(range * std::cos(az), range * std::sin(az),
                      spec.sensor_height);
  }
  PointCloud cloud;
  cloud.frame = Frame::Body;
  cloud.stamp = 0.0;
  cloud.points.resize(3, static_cast<Eigen::Index>(hits.size()));
  for (size_t i = 0; i < hits.size(); ++i) {
    cloud.points.col(static_cast<Eigen::Index>(i)) = hits[i];
  }
  return cloud;
}

namespace {

// Index of the nearest column of `cloud` within `thresh`, or -1.
int nearest(const Eigen::Matrix3Xd& cloud, const Eigen::Vector3d& p,
            double thresh) {
  int best = -1;
  double best_d2 = thresh * thresh;
  for (Eigen::Index j = 0; j < cloud.cols(); ++j) {
    const double d2 = (cloud.col(j) - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

RelPose icp_point_to_point(const PointCloud& a, const PointCloud& b,
                           double match_thresh, int max_iters) {
  if (a.empty() || b.empty()) throw Error("icp: empty cloud");
  RelPose pose;
  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<std::pair<int, int>> matches;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Eigen::Vector3d moved = pose.R * a.points.col(i) + pose.t;
      const int j = nearest(b.points, moved, match_thresh);
      if (j >= 0) matches.emplace_back(static_cast<int>(i), j);
    }
    if (matches.size() < 3) break;
    Eigen::Vector3d ca = Eigen::Vector3d::Zero(), cb = Eigen::Vector3d::Zero();
    for (auto [i, j] : matches) {
      ca += a.points.col(i);
      cb += b.points.col(j);
    }
    ca /= static_cast<double>(matches.size());
    cb /= static_cast<double>(matches.size());
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (auto [i, j] : matches) {
      h += (a.points.col(i) - ca) * (b.points.col(j) - cb).transpose();
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
      Eigen::Matrix3d v = svd.matrixV();
      v.col(2) *= -1;
      r = v * svd.matrixU().transpose();
    }
    const Eigen::Vector3d t = cb - r * ca;
    const double delta = (r - pose.R).norm() + (t - pose.t).norm();
    pose.R = r;
    pose.t = t;
    if (delta < 1e-10) break;
  }
  return pose;
}

std::vector<std::pair<int, int>> match_clouds(const PointCloud& a,
                                              const PointCloud& b,
                                              const RelPose& rel,
                                              double inlier_thresh) {
  std::vector<std::pair<int, int>> matches;
  std::vector<char> used(static_cast<size_t>(b.size()), 0);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Eigen::Vector3d moved = rel.R * a.points.col(i) + rel.t;
    int best = -1;
    double best_d2 = inlier_thresh * inlier_thresh;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      const double d2 = (b.points.col(j) - moved).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      used[static_cast<size_t>(best)] = 1;
      matches.emplace_back(static_cast<int>(i), best);
    }
  }
  return matches;
}

ScanPair make_scan_pair(const PointCloud& a, const PointCloud& b,
                        const std::optional<RelPose>& rel_pose_hint, int m,
                        double inlier_thresh, uint64_t seed) {
  if (a.empty() || b.empty()) throw Error("make_scan_pair: empty cloud");
  const RelPose pose = rel_pose_hint.has_value()
                           ? *rel_pose_hint
                           : icp_point_to_point(a, b, inlier_thresh);
  std::vector<std::pair<int, int>> matches =
      match_clouds(a, b, pose, inlier_thresh);
  if (static_cast<int>(matches.size()) < m) {
    throw TooFewInliers("make_scan_pair: " + std::to_string(matches.size()) +
                        " matches for " + std::to_string(m) + " requested");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(matches.begin(), matches.end(), rng);
  matches.resize(static_cast<size_t>(m));

  ScanPair pair;
  pair.a.frame = a.frame;
  pair.b.frame = b.frame;
  pair.a.stamp = a.stamp;
  pair.b.stamp = b.stamp;
  pair.a.points.resize(3, m);
  pair.b.points.resize(3, m);
  for (int k = 0; k < m; ++k) {
    pair.a.points.col(k) = a.points.col(matches[static_cast<size_t>(k)].first);
    pair.b.points.col(k) = b.points.col(matches[static_cast<size_t>(k)].second);
  }
  return pair;
}

Eigen::Vector3d project_to_scan(const PointCloud& scan,
                                const Eigen::Vector3d& query, double max_gap) {
  if (scan.empty()) throw Error("project_to_scan: empty cloud");
  int nn = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < scan.size(); ++j) {
    const double d2 = (scan.points.col(j) - query).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      nn = static_cast<int>(j);
    }
  }
  Eigen::Vector3d best = scan.points.col(nn);
  const auto consider = [&](Eigen::Index i, Eigen::Index j) {
    const Eigen::Vector3d a = scan.points.col(i), b = scan.points.col(j);
    if ((b - a).norm() > max_gap) return;  // corner or occlusion jump
    const Eigen::Vector3d d = b - a;
    const double t = std::clamp((query - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const Eigen::Vector3d p = a + t * d;
    if ((p - query).squaredNorm() < (best - query).squaredNorm()) best = p;
  };
  const Eigen::Index n = scan.size();
  if (n > 1) {
    consider((nn + n - 1) % n, nn);
    consider(nn, (nn + 1) % n);
  }
  return best;
}

namespace {

void check_orthogonal(const Eigen::Matrix3d& r, const char* name) {
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-6) {
    throw Error(std::string("chain_transform: ") + name +
                " is not orthogonal within 1e-6");
  }
}

}  // namespace

ad::Tensor chain_transform_t(const ad::Tensor& points_body_n,
                             const ad::Tensor& r_n, const ad::Tensor& p_n,
                             const ad::Tensor& r_next,
                             const ad::Tensor& p_next) {
  check_orthogonal(r_n.value(), "pose_n rotation");
  check_orthogonal(r_next.value(), "pose_next rotation");
  const Eigen::Index m = points_body_n.cols();
  const ad::Tensor shift =
      ad::matmul(ad::sub(p_n, p_next), ad::Tensor::ones(1, m));
  const ad::Tensor world = ad::add(ad::matmul(r_n, points_body_n), shift);
  return ad::matmul(ad::transpose(r_next), world);
}

Eigen::Matrix3Xd chain_transform(const Eigen::Matrix3Xd& points_body_n,
                                 const Eigen::Matrix3d& r_n,
                                 const Eigen::Vector3d& p_n,
                                 const Eigen::Matrix3d& r_next,
                                 const Eigen::Vector3d& p_next) {
  ad::Tape::Scope scope(nullptr);
  return chain_transform_t(ad::Tensor::constant(points_body_n),
                           ad::Tensor::constant(r_n), ad::Tensor::constant(p_n),
                           ad::Tensor::constant(r_next),
                           ad::Tensor::constant(p_next))
      .value();
}

ad::Tensor observation_loss_t(const Eigen::Matrix3Xd& actual,
                              const ad::Tensor& predicted) {
  if (actual.cols() != predicted.cols() || predicted.rows() != 3) {
    throw CountMismatch("observation_loss: correspondence counts differ");
  }
  const ad::Tensor d = ad::sub(ad::Tensor::constant(actual), predicted);
  return ad::sum(ad::mul(d, d));
}

double observation_loss(const ScanPair& pair,
                        const Eigen::Matrix3Xd& predicted_next) {
  ad::Tape::Scope scope(nullptr);
  return observation_loss_t(pair.b.points,
                            ad::Tensor::constant(predicted_next))
      .scalar_value();
}

void save_scan_csv(const std::string& path,
                   const std::vector<PointCloud>& scans) {
  std::ofstream f(path);
  if (!f) throw Error("save_scan_csv: cannot open " + path);
  f << "t,m,x,y,z,frame\n";
  char buf[200];
  for (const PointCloud& c : scans) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,%ld,%.17g,%.17g,%.17g,%s\n",
                    c.stamp, static_cast<long>(j), c.points(0, j),
                    c.points(1, j), c.points(2, j),
                    c.frame == Frame::Body ? "body" : "world");
      f << buf;
    }
  }
}

std::vector<PointCloud> load_scan_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("load_scan_csv: cannot open " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<PointCloud> scans;
  std::vector<Eigen::Vector3d> pts;
  double cur_t = 0.0;
  Frame cur_frame = Frame::Body;
  bool have = false;
  auto flush = [&] {
    if (!have) return;
    PointCloud c;
    c.stamp = cur_t;
    c.frame = cur_frame;
    c.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
      c.points.col(static_cast<Eigen::Index>(i)) = pts[i];
    }
    scans.push_back(std::move(c));
    pts.clear();
  };
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, x, y, z;
    long m;
    std::string frame;
    ss >> t >> m >> x >> y >> z >> frame;
    if (ss.fail()) throw Error("load_scan_csv: malformed line '" + line + "'");
    if (!have || t != cur_t) {
      flush();
      cur_t = t;
      cur_frame = frame == "world" ? Frame::World : Frame::Body;
      have = true;
    }
    pts.emplace_back(x, y, z);
  }
  flush();
  return scans;
}

}  // namespace hamlearn::percept
