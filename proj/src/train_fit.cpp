#include "hamlearn/train/fit.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

namespace hamlearn::train {

void TrainConfig::validate() const {
  if (iterations < 1 || lr <= 0 || substeps < 1 || window < 1 ||
      correspondences < 1 || inlier_thresh <= 0 || threads < 1 ||
      test_fraction < 0 || test_fraction >= 1 || lambda_g < 0) {
    throw Error("TrainConfig: positive scalars required");
  }
}

namespace {

struct WindowGrads {
  double loss = 0.0;
  bool finite = true;
  std::vector<Eigen::MatrixXd> grads;  // ordered by store name
};

// Long-lived workers so thread-local tape storage is reused across
// iterations; results go to per-index slots, keeping reductions
// order-deterministic regardless of scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(int threads) {
    for (int t = 0; t < threads; ++t) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~WorkerPool() {
    {
      std::unique_lock lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void run(int jobs, const std::function<void(int)>& fn) {
    if (workers_.empty() || jobs <= 1) {
      for (int i = 0; i < jobs; ++i) fn(i);
      return;
    }
    std::unique_lock lock(mu_);
    fn_ = &fn;
    next_ = 0;
    pending_ = jobs;
    total_ = jobs;
    ++round_;
    cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || round_ != seen; });
      if (stop_) return;
      seen = round_;
      while (next_ < total_) {
        const int i = next_++;
        lock.unlock();
        (*fn_)(i);
        lock.lock();
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int next_ = 0, pending_ = 0, total_ = 0;
  uint64_t round_ = 0;
  bool stop_ = false;
};

WindowGrads eval_window(const model::HamiltonianModel& m, const Window& w,
                        const TrainConfig& cfg, bool with_grads,
                        const std::vector<std::string>& names) {
  static thread_local ad::Tape tape;  // capacity reused across windows
  WindowGrads out;
  try {
    tape.reset();
    ad::Tape::Scope scope(&tape);
    ad::LeafSet leaves = m.leaves();
    const ad::Tensor loss =
        cfg.mode == LossMode::Observation
            ? observation_window_loss_t(m, leaves, w, cfg.substeps,
                                        cfg.lambda_g)
            : state_window_loss_t(m, leaves, w, cfg.substeps, cfg.lambda_g);
    out.loss = loss.scalar_value();
    if (!std::isfinite(out.loss)) {
      out.finite = false;
      return out;
    }
    if (with_grads) {
      std::vector<ad::Tensor> wrt;
      wrt.reserve(names.size());
      for (const auto& name : names) wrt.push_back(leaves(name));
      const auto grads =
          ad::gradient(loss, wrt, /*record_adjoints=*/false);
      out.grads.reserve(grads.size());
      for (const auto& g : grads) {
        if (!g.value().allFinite()) out.finite = false;
        out.grads.push_back(g.value());
      }
    }
  } catch (const Error&) {
    // Blown-up rollouts surface as geometry/mass failures; treat as
    // divergence so the caller can restore the last good parameters.
    out.finite = false;
  }
  return out;
}

}  // namespace

FitResult fit(model::HamiltonianModel& m,
              const std::vector<TrajectoryRecord>& dataset,
              const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw Error("fit: dataset is empty");

  std::vector<Window> train_windows, test_windows;
  const size_t n_test =
      static_cast<size_t>(std::floor(cfg.test_fraction * dataset.size()));
  const size_t n_train = dataset.size() - n_test;
  for (size_t i = 0; i < dataset.size(); ++i) {
    auto windows =
        make_windows(dataset[i], cfg.window, cfg.correspondences,
                     cfg.inlier_thresh, cfg.oracle_pairs, cfg.seed);
    auto& sink = i < n_train ? train_windows : test_windows;
    for (auto& w : windows) sink.push_back(std::move(w));
  }
  if (train_windows.empty()) throw Error("fit: no training windows");

  ad::ParamStore& store = m.store();
  const std::vector<std::string> names = store.names();
  const bool use_ckpt = !cfg.checkpoint_dir.empty();
  if (use_ckpt) std::filesystem::create_directories(cfg.checkpoint_dir);
  std::string last_good;
  auto checkpoint = [&](const std::string& tag) {
    if (!use_ckpt) return std::string();
    const std::string path = cfg.checkpoint_dir + "/" + tag + ".ckpt";
    store.save(path);
    return path;
  };
  if (use_ckpt) last_good = checkpoint("init");

  FitResult result;
  const int nw = static_cast<int>(train_windows.size());
  std::vector<WindowGrads> slots(static_cast<size_t>(nw));
  WorkerPool pool(cfg.threads > 1 ? cfg.threads : 0);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    pool.run(nw, [&](int i) {
      slots[static_cast<size_t>(i)] = eval_window(
          m, train_windows[static_cast<size_t>(i)], cfg, true, names);
    });

    double train_sum = 0.0;
    bool finite = true;
    store.zero_grad();
    for (const WindowGrads& wg : slots) {
      finite = finite && wg.finite;
      if (!finite) break;
      train_sum += wg.loss;
      for (size_t k = 0; k < names.size(); ++k) {
        store.accumulate_grad(names[k], wg.grads[k]);
      }
    }

    if (!finite) {
      if (!last_good.empty()) store.load(last_good);
      throw DivergedLoss("fit: non-finite loss at iteration " +
                         std::to_string(iter));
    }

    result.train_loss.push_back(train_sum / nw);

    double test_mean = std::numeric_limits<double>::quiet_NaN();
    if (!test_windows.empty()) {
      std::vector<double> tl(test_windows.size(), 0.0);
      pool.run(static_cast<int>(test_windows.size()), [&](int i) {
        tl[static_cast<size_t>(i)] =
            eval_window(m, test_windows[static_cast<size_t>(i)], cfg, false,
                        names)
                .loss;
      });
      double s = 0.0;
      for (double v : tl) s += v;
      test_mean = s / static_cast<double>(tl.size());
    }
    result.test_loss.push_back(test_mean);

    if (cfg.grad_clip > 0.0) {
      const double gn = store.grad_norm();
      if (gn > cfg.grad_clip) store.scale_grads(cfg.grad_clip / gn);
    }
    store.adam_step(cfg.lr * std::pow(cfg.lr_decay, iter), 0.9, 0.999,
                    1e-8, cfg.weight_decay);
    if (use_ckpt && cfg.checkpoint_every > 0 &&
        (iter + 1) % cfg.checkpoint_every == 0) {
      last_good = checkpoint("iter" + std::to_string(iter + 1));
    }
  }
  result.final_checkpoint = checkpoint("final");
  return result;
}

void save_loss_csv(const std::string& path, const FitResult& result) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("save_loss_csv: cannot open " + path);
  std::fprintf(f, "iteration,train_loss,test_loss\n");
  for (size_t i = 0; i < result.train_loss.size(); ++i) {
    std::fprintf(f, "%zu,%.17g,%.17g\n", i, result.train_loss[i],
                 result.test_loss[i]);
  }
  std::fclose(f);
}

}  // namespace hamlearn::train
