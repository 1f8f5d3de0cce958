#include "hamlearn/model/mlp.hpp"

#include <cmath>

namespace hamlearn::model {

Mlp::Mlp(std::string prefix, int in, int hidden, int out, int depth)
    : prefix_(std::move(prefix)), in_(in), hidden_(hidden), out_(out),
      depth_(depth) {}

void Mlp::register_params(ad::ParamStore& store, std::mt19937_64& rng,
                          bool zero_head) const {
  auto init = [&](int rows, int cols, int fan_in, bool zero) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, cols);
    if (!zero) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = u(rng);
    }
    return w;
  };
  int fan = in_;
  for (int l = 0; l < depth_; ++l) {
    store.add(prefix_ + "/w" + std::to_string(l), init(hidden_, fan, fan, false));
    store.add(prefix_ + "/b" + std::to_string(l),
              Eigen::MatrixXd::Zero(hidden_, 1), /*decay=*/false);
    fan = hidden_;
  }
  store.add(prefix_ + "/w" + std::to_string(depth_),
            init(out_, fan, fan, zero_head));
  store.add(prefix_ + "/b" + std::to_string(depth_),
            Eigen::MatrixXd::Zero(out_, 1), /*decay=*/false);
}

ad::Tensor Mlp::forward(ad::LeafSet& leaves, const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (int l = 0; l < depth_; ++l) {
    h = ad::tanh(ad::add(
        ad::matmul(leaves(prefix_ + "/w" + std::to_string(l)), h),
        leaves(prefix_ + "/b" + std::to_string(l))));
  }
  return ad::add(ad::matmul(leaves(prefix_ + "/w" + std::to_string(depth_)), h),
                 leaves(prefix_ + "/b" + std::to_string(depth_)));
}

}  // namespace hamlearn::model
