#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hamlearn/ad/tensor.hpp"

namespace hamlearn::ad {

/// Named parameter tensors with gradient accumulators and Adam state.
/// Values are shared immutably with leaf tensors; updates swap buffers, so
/// concurrent read-only evaluation against a snapshot stays valid.
class ParamStore {
 public:
  void add(const std::string& name, Mat init, bool decay = true);
  bool has(const std::string& name) const;
  const Mat& value(const std::string& name) const;
  MatPtr value_ptr(const std::string& name) const;
  void set_value(const std::string& name, Mat v);
  const Mat& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }

  void zero_grad();
  void accumulate_grad(const std::string& name, const Mat& g);
  /// Euclidean norm over all accumulated gradients.
  double grad_norm() const;
  /// Rescales every accumulated gradient in place.
  void scale_grads(double factor);

  /// Adam update from the accumulated gradients; bumps the step counter.
  /// `weight_decay` applies decoupled L2 shrinkage before the update.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8, double weight_decay = 0.0);
  int64_t step_count() const { return step_; }

  /// Named-tensor checkpoint, magic "HAMLEARN-CKPT-1", f64 little-endian.
  void save(const std::string& path) const;
  /// Loads values; existing entries must match shapes, new ones are created.
  void load(const std::string& path);

 private:
  struct Entry {
    MatPtr value;
    Mat grad;
    Mat m, v;  // Adam moments
    bool decay = true;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
  int64_t step_ = 0;
};

/// Per-tape view of a store: first access records a leaf node per parameter.
/// Create one after installing the tape an evaluation will run under.
class LeafSet {
 public:
  explicit LeafSet(ParamStore& store) : store_(&store) {}

  Tensor operator()(const std::string& name);
  ParamStore& store() { return *store_; }
  const std::map<std::string, Tensor>& all() const { return leaves_; }

 private:
  ParamStore* store_;
  std::map<std::string, Tensor> leaves_;
};

/// Accumulates d(loss)/d(theta) into the store behind `leaves` (+=).
void backward(const Tensor& loss, LeafSet& leaves);

}  // namespace hamlearn::ad
