#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "hamlearn/errors.hpp"

namespace hamlearn::ad {

using Mat = Eigen::MatrixXd;
using MatPtr = std::shared_ptr<const Mat>;
using Pattern = std::vector<std::pair<int, int>>;
using PatternPtr = std::shared_ptr<const Pattern>;

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Neg,
  Mul,        // elementwise; one side may be 1x1 (scalar broadcast)
  ScaleConst,
  MatMul,
  Transpose,
  Reshape,
  Sum,
  Tanh,
  Sigmoid,
  Softplus,
  Relu,
  Abs,
  PowConst,
  Inverse,
  Cross3,
  Trace,
  Hat3,
  HatAdj,
  Scatter,
  Gather,
  Block,
  Embed,
  Vstack,
  Hstack,
};

struct Node {
  Op op;
  int in0 = -1, in1 = -1;  // tape positions of inputs, -1 for constants
  MatPtr v0, v1;           // input values
  MatPtr out;
  int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
  double c = 0.0;
  PatternPtr pattern;
};

class Tape;

/// Dense real matrix with an optional position on the active tape.
/// Vectors are n x 1, scalars 1 x 1. Copies are cheap (shared buffer).
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Mat v);
  static Tensor scalar(double v);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);
  static Tensor ones(Eigen::Index rows, Eigen::Index cols);
  static Tensor identity(Eigen::Index n);

  bool defined() const { return static_cast<bool>(v_); }
  const Mat& value() const;
  double scalar_value() const;  // requires 1x1
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool is_scalar() const { return defined() && rows() == 1 && cols() == 1; }

  int node() const { return node_; }
  uint64_t epoch() const { return epoch_; }
  MatPtr shared() const { return v_; }

  // Internal: wrap an existing tape position.
  static Tensor from_parts(MatPtr v, int node, uint64_t epoch);

 private:
  MatPtr v_;
  int node_ = -1;
  uint64_t epoch_ = 0;
};

/// Append-only record of tensor operations. One per worker thread; install
/// with Tape::Scope. Ops executed with no active tape compute values only.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  size_t size() const { return nodes_.size(); }
  uint64_t epoch() const { return epoch_; }
  const Node& node(int id) const { return nodes_[id]; }

  /// Drops all nodes and starts a fresh epoch (old tensors become stale).
  void reset();

  int append(Node n);

  class Scope {
   public:
    explicit Scope(Tape* t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

 private:
  std::vector<Node> nodes_;
  uint64_t epoch_;
};

/// Records `v` as a leaf on the active tape so gradient() can anchor on it;
/// degrades to a constant when no tape is active.
Tensor make_leaf(Mat v);

/// Ops record onto the active tape when their inputs are live on it.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor smul(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
Tensor sum(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor absval(const Tensor& a);
Tensor pow_const(const Tensor& a, double e);
/// Explicit small-matrix inverse (partial-pivot LU), recorded as a primitive.
Tensor inverse(const Tensor& a);
/// solve(A, b) = inverse(A) * b; intended for systems of size <= 6.
Tensor solve(const Tensor& a, const Tensor& b);
Tensor cross(const Tensor& a, const Tensor& b);
Tensor trace(const Tensor& a);
Tensor hat3(const Tensor& a);
Tensor hat_adj(const Tensor& a);
Tensor scatter(const Tensor& a, PatternPtr pattern, Eigen::Index rows,
               Eigen::Index cols);
Tensor gather(const Tensor& a, PatternPtr pattern);
Tensor block(const Tensor& a, Eigen::Index r0, Eigen::Index c0,
             Eigen::Index rows, Eigen::Index cols);
Tensor embed(const Tensor& a, Eigen::Index r0, Eigen::Index c0,
             Eigen::Index rows, Eigen::Index cols);
Tensor vstack(const Tensor& a, const Tensor& b);
Tensor hstack(const Tensor& a, const Tensor& b);

/// Adjoints of `out` with respect to each entry of `wrt`, computed by a
/// reverse sweep over the active tape. With `record_adjoints` the sweep
/// itself records, so results are differentiable in turn; a final backward
/// can pass false to skip the bookkeeping. Entries of `wrt` that `out` does
/// not reach get zeros.
std::vector<Tensor> gradient(const Tensor& out, const std::vector<Tensor>& wrt,
                             bool record_adjoints = true);

}  // namespace hamlearn::ad
