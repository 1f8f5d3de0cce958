#include "hamlearn/ad/tensor.hpp"

#include <cmath>
#include <string>

namespace hamlearn::ad {

namespace {

thread_local Tape* g_active = nullptr;
std::atomic<uint64_t> g_next_epoch{1};

MatPtr share(Mat m) { return std::make_shared<const Mat>(std::move(m)); }

void check(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

// True when the operand should be linked into the graph.
bool live(const Tensor& t) {
  Tape* tape = Tape::active();
  if (!tape || t.node() < 0) return false;
  if (t.epoch() != tape->epoch()) {
    throw DetachedGraph("tensor was recorded on a different tape epoch");
  }
  return true;
}

Tensor record(Op op, const Tensor& a, const Tensor& b, Mat out, int i0 = 0,
              int i1 = 0, int i2 = 0, int i3 = 0, double c = 0.0,
              PatternPtr pattern = nullptr) {
  MatPtr out_ptr = share(std::move(out));
  Tape* tape = Tape::active();
  const bool la = live(a);
  const bool lb = b.defined() ? live(b) : false;
  if (!tape || (!la && !lb)) {
    return Tensor::from_parts(out_ptr, -1, 0);
  }
  Node n;
  n.op = op;
  n.in0 = la ? a.node() : -1;
  n.in1 = lb ? b.node() : -1;
  n.v0 = a.shared();
  n.v1 = b.shared();
  n.out = out_ptr;
  n.i0 = i0;
  n.i1 = i1;
  n.i2 = i2;
  n.i3 = i3;
  n.c = c;
  n.pattern = std::move(pattern);
  const int id = tape->append(std::move(n));
  return Tensor::from_parts(out_ptr, id, tape->epoch());
}

Tensor record_unary(Op op, const Tensor& a, Mat out, int i0 = 0, int i1 = 0,
                    int i2 = 0, int i3 = 0, double c = 0.0,
                    PatternPtr pattern = nullptr) {
  return record(op, a, Tensor(), std::move(out), i0, i1, i2, i3, c,
                std::move(pattern));
}

}  // namespace

Tensor Tensor::constant(Mat v) { return from_parts(share(std::move(v)), -1, 0); }

Tensor Tensor::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Mat::Zero(rows, cols));
}

Tensor Tensor::ones(Eigen::Index rows, Eigen::Index cols) {
  return constant(Mat::Ones(rows, cols));
}

Tensor Tensor::identity(Eigen::Index n) { return constant(Mat::Identity(n, n)); }

Tensor make_leaf(Mat v) {
  MatPtr ptr = share(std::move(v));
  Tape* tape = Tape::active();
  if (!tape) return Tensor::from_parts(ptr, -1, 0);
  Node n;
  n.op = Op::Leaf;
  n.out = ptr;
  const int id = tape->append(std::move(n));
  return Tensor::from_parts(ptr, id, tape->epoch());
}

const Mat& Tensor::value() const {
  if (!v_) throw Error("Tensor: reading an empty tensor");
  return *v_;
}

double Tensor::scalar_value() const {
  if (!is_scalar()) throw NotScalar("Tensor: expected a 1x1 tensor");
  return value()(0, 0);
}

Tensor Tensor::from_parts(MatPtr v, int node, uint64_t epoch) {
  Tensor t;
  t.v_ = std::move(v);
  t.node_ = node;
  t.epoch_ = epoch;
  return t;
}

Tape::Tape() : epoch_(g_next_epoch.fetch_add(1)) {}

Tape* Tape::active() { return g_active; }

void Tape::reset() {
  nodes_.clear();
  epoch_ = g_next_epoch.fetch_add(1);
}

int Tape::append(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Scope::Scope(Tape* t) : prev_(g_active) { g_active = t; }

Tape::Scope::~Scope() { g_active = prev_; }

namespace {

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) {
    return record(Op::Add, a, b, a.value() + b.value());
  }
  if (b.is_scalar()) {
    return record(Op::Add, a, b,
                  (a.value().array() + b.scalar_value()).matrix());
  }
  if (a.is_scalar()) {
    return record(Op::Add, a, b,
                  (b.value().array() + a.scalar_value()).matrix());
  }
  throw ShapeMismatch("add: incompatible shapes");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) {
    return record(Op::Sub, a, b, a.value() - b.value());
  }
  if (b.is_scalar()) {
    return record(Op::Sub, a, b,
                  (a.value().array() - b.scalar_value()).matrix());
  }
  if (a.is_scalar()) {
    return record(Op::Sub, a, b,
                  (a.scalar_value() - b.value().array()).matrix());
  }
  throw ShapeMismatch("sub: incompatible shapes");
}

Tensor neg(const Tensor& a) { return record_unary(Op::Neg, a, -a.value()); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) {
    return record(Op::Mul, a, b,
                  (a.value().array() * b.value().array()).matrix());
  }
  if (b.is_scalar()) {
    return record(Op::Mul, a, b, (a.value() * b.scalar_value()).eval());
  }
  if (a.is_scalar()) {
    return record(Op::Mul, a, b, (b.value() * a.scalar_value()).eval());
  }
  throw ShapeMismatch("mul: incompatible shapes");
}

Tensor smul(const Tensor& a, double c) {
  return record_unary(Op::ScaleConst, a, (a.value() * c).eval(), 0, 0, 0, 0, c);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return record(Op::MatMul, a, b, a.value() * b.value());
}

Tensor transpose(const Tensor& a) {
  return record_unary(Op::Transpose, a, a.value().transpose());
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  check(rows * cols == a.rows() * a.cols(), "reshape: element count differs");
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return record_unary(Op::Reshape, a, std::move(out));
}

Tensor sum(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return record_unary(Op::Sum, a, std::move(out));
}

Tensor tanh(const Tensor& a) {
  return record_unary(Op::Tanh, a, a.value().array().tanh().matrix());
}

Tensor sigmoid(const Tensor& a) {
  Mat out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return record_unary(Op::Sigmoid, a, std::move(out));
}

Tensor softplus(const Tensor& a) {
  // log1p(exp(x)) with the large-x branch handled explicitly.
  Mat out = a.value().unaryExpr([](double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
  });
  return record_unary(Op::Softplus, a, std::move(out));
}

Tensor relu(const Tensor& a) {
  return record_unary(Op::Relu, a, a.value().cwiseMax(0.0));
}

Tensor absval(const Tensor& a) {
  return record_unary(Op::Abs, a, a.value().cwiseAbs());
}

Tensor pow_const(const Tensor& a, double e) {
  return record_unary(Op::PowConst, a, a.value().array().pow(e).matrix(), 0, 0,
                      0, 0, e);
}

Tensor inverse(const Tensor& a) {
  check(a.rows() == a.cols(), "inverse: matrix must be square");
  Mat out = a.value().partialPivLu().inverse();
  return record_unary(Op::Inverse, a, std::move(out));
}

Tensor solve(const Tensor& a, const Tensor& b) { return matmul(inverse(a), b); }

Tensor cross(const Tensor& a, const Tensor& b) {
  check(a.rows() == 3 && a.cols() == 1 && b.rows() == 3 && b.cols() == 1,
        "cross: expects 3x1 operands");
  Eigen::Vector3d av = a.value().col(0);
  Eigen::Vector3d bv = b.value().col(0);
  return record(Op::Cross3, a, b, Mat(av.cross(bv)));
}

Tensor trace(const Tensor& a) {
  check(a.rows() == a.cols(), "trace: matrix must be square");
  Mat out(1, 1);
  out(0, 0) = a.value().trace();
  return record_unary(Op::Trace, a, std::move(out));
}

Tensor hat3(const Tensor& a) {
  check(a.rows() == 3 && a.cols() == 1, "hat3: expects a 3x1 vector");
  const auto& x = a.value();
  Mat out(3, 3);
  out << 0.0, -x(2, 0), x(1, 0),
         x(2, 0), 0.0, -x(0, 0),
        -x(1, 0), x(0, 0), 0.0;
  return record_unary(Op::Hat3, a, std::move(out));
}

Tensor hat_adj(const Tensor& a) {
  check(a.rows() == 3 && a.cols() == 3, "hat_adj: expects a 3x3 matrix");
  const auto& m = a.value();
  Mat out(3, 1);
  out << m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1);
  return record_unary(Op::HatAdj, a, std::move(out));
}

Tensor scatter(const Tensor& a, PatternPtr pattern, Eigen::Index rows,
               Eigen::Index cols) {
  check(a.cols() == 1, "scatter: expects a column vector");
  check(a.rows() == static_cast<Eigen::Index>(pattern->size()),
        "scatter: pattern size differs from input length");
  Mat out = Mat::Zero(rows, cols);
  for (size_t i = 0; i < pattern->size(); ++i) {
    const auto [r, c] = (*pattern)[i];
    out(r, c) = a.value()(static_cast<Eigen::Index>(i), 0);
  }
  return record_unary(Op::Scatter, a, std::move(out), 0, 0, 0, 0, 0.0,
                      std::move(pattern));
}

Tensor gather(const Tensor& a, PatternPtr pattern) {
  Mat out(static_cast<Eigen::Index>(pattern->size()), 1);
  for (size_t i = 0; i < pattern->size(); ++i) {
    const auto [r, c] = (*pattern)[i];
    out(static_cast<Eigen::Index>(i), 0) = a.value()(r, c);
  }
  return record_unary(Op::Gather, a, std::move(out), 0, 0, 0, 0, 0.0,
                      std::move(pattern));
}

Tensor block(const Tensor& a, Eigen::Index r0, Eigen::Index c0,
             Eigen::Index rows, Eigen::Index cols) {
  check(r0 >= 0 && c0 >= 0 && r0 + rows <= a.rows() && c0 + cols <= a.cols(),
        "block: range out of bounds");
  Mat out = a.value().block(r0, c0, rows, cols);
  return record_unary(Op::Block, a, std::move(out), static_cast<int>(r0),
                      static_cast<int>(c0), static_cast<int>(rows),
                      static_cast<int>(cols));
}

Tensor embed(const Tensor& a, Eigen::Index r0, Eigen::Index c0,
             Eigen::Index rows, Eigen::Index cols) {
  check(r0 >= 0 && c0 >= 0 && r0 + a.rows() <= rows && c0 + a.cols() <= cols,
        "embed: block does not fit");
  Mat out = Mat::Zero(rows, cols);
  out.block(r0, c0, a.rows(), a.cols()) = a.value();
  return record_unary(Op::Embed, a, std::move(out), static_cast<int>(r0),
                      static_cast<int>(c0), static_cast<int>(rows),
                      static_cast<int>(cols));
}

Tensor vstack(const Tensor& a, const Tensor& b) {
  check(a.cols() == b.cols(), "vstack: column counts differ");
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  return record(Op::Vstack, a, b, std::move(out), static_cast<int>(a.rows()),
                static_cast<int>(b.rows()));
}

Tensor hstack(const Tensor& a, const Tensor& b) {
  check(a.rows() == b.rows(), "hstack: row counts differ");
  Mat out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  return record(Op::Hstack, a, b, std::move(out), static_cast<int>(a.cols()),
                static_cast<int>(b.cols()));
}

}  // namespace hamlearn::ad
