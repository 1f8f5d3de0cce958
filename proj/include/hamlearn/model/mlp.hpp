#pragma once

#include <random>
#include <string>

#include "hamlearn/ad/param_store.hpp"

namespace hamlearn::model {

/// Fully-connected tanh network whose weights live in a ParamStore under a
/// name prefix. Two hidden layers by default.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, int in, int hidden, int out, int depth = 2);

  /// Creates the weight entries. A zeroed head makes the network output
  /// exactly zero at initialization.
  void register_params(ad::ParamStore& store, std::mt19937_64& rng,
                       bool zero_head) const;

  ad::Tensor forward(ad::LeafSet& leaves, const ad::Tensor& x) const;

  const std::string& prefix() const { return prefix_; }
  int output_size() const { return out_; }

 private:
  std::string prefix_;
  int in_ = 0, hidden_ = 0, out_ = 0, depth_ = 2;
};

}  // namespace hamlearn::model
