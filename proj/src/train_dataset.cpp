#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hamlearn/train/dataset.hpp"

namespace hamlearn::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string traj_tag(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj%03d", id);
  return buf;
}

void save_truth_csv(const std::string& path,
                    const std::vector<double>& times,
                    const std::vector<model::Vec18>& states) {
  std::ofstream f(path);
  if (!f) throw Error("save_dataset: cannot open " + path);
  f << "t";
  for (int k = 0; k < 18; ++k) f << ",x" << k;
  f << "\n";
  char buf[64];
  for (size_t n = 0; n < states.size(); ++n) {
    std::snprintf(buf, sizeof(buf), "%.17g", times[n]);
    f << buf;
    for (int k = 0; k < 18; ++k) {
      std::snprintf(buf, sizeof(buf), ",%.17g", states[n](k));
      f << buf;
    }
    f << "\n";
  }
}

std::vector<model::Vec18> load_truth_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("load_dataset: cannot open " + path);
  std::string line;
  std::getline(f, line);
  std::vector<model::Vec18> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t;
    ss >> t;
    model::Vec18 x;
    for (int k = 0; k < 18; ++k) ss >> x(k);
    if (ss.fail()) throw Error("load_dataset: malformed truth row");
    out.push_back(x);
  }
  return out;
}

}  // namespace

void save_dataset(const std::string& dir,
                  const std::vector<TrajectoryRecord>& records) {
  fs::create_directories(dir);
  json index;
  index["format"] = "hamlearn-dataset-1";
  index["trajectories"] = json::array();
  for (const TrajectoryRecord& rec : records) {
    rec.check_consistent();
    const std::string tag = traj_tag(rec.id);
    json j;
    j["id"] = rec.id;
    j["times"] = rec.times;
    json controls = json::array();
    for (const auto& u : rec.controls) controls.push_back({u(0), u(1)});
    j["controls"] = std::move(controls);
    std::vector<double> x0(rec.x0.data(), rec.x0.data() + 18);
    j["x0"] = x0;
    j["collision_truncated"] = rec.collision_truncated;
    j["scans"] = tag + "_scans.csv";
    percept::save_scan_csv(dir + "/" + tag + "_scans.csv", rec.scans);
    if (!rec.truth_states.empty()) {
      j["truth"] = tag + "_truth.csv";
      save_truth_csv(dir + "/" + tag + "_truth.csv", rec.times,
                     rec.truth_states);
    }
    index["trajectories"].push_back(std::move(j));
  }
  std::ofstream f(dir + "/index.json");
  if (!f) throw Error("save_dataset: cannot open " + dir + "/index.json");
  f << index.dump(1) << "\n";
}

std::vector<TrajectoryRecord> load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/index.json");
  if (!f) throw Error("load_dataset: cannot open " + dir + "/index.json");
  json index;
  f >> index;
  if (index.value("format", "") != "hamlearn-dataset-1") {
    throw Error("load_dataset: unrecognized dataset format");
  }
  std::vector<TrajectoryRecord> records;
  for (const json& j : index.at("trajectories")) {
    TrajectoryRecord rec;
    rec.id = j.at("id").get<int>();
    rec.times = j.at("times").get<std::vector<double>>();
    for (const auto& u : j.at("controls")) {
      rec.controls.emplace_back(u.at(0).get<double>(), u.at(1).get<double>());
    }
    const auto x0 = j.at("x0").get<std::vector<double>>();
    if (x0.size() != 18) throw Error("load_dataset: x0 must have 18 entries");
    for (int k = 0; k < 18; ++k) rec.x0(k) = x0[static_cast<size_t>(k)];
    rec.collision_truncated = j.value("collision_truncated", false);
    rec.scans =
        percept::load_scan_csv(dir + "/" + j.at("scans").get<std::string>());
    if (j.contains("truth")) {
      rec.truth_states =
          load_truth_csv(dir + "/" + j.at("truth").get<std::string>());
    }
    rec.check_consistent();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hamlearn::train
