#include <algorithm>

#include "hamlearn/ad/tensor.hpp"

namespace hamlearn::ad {

namespace {

// Rebuild a live handle for a node input so VJP expressions stay connected.
Tensor input_tensor(const Node& n, int slot, uint64_t epoch) {
  const MatPtr& v = slot == 0 ? n.v0 : n.v1;
  const int id = slot == 0 ? n.in0 : n.in1;
  return Tensor::from_parts(v, id, id >= 0 ? epoch : 0);
}

Tensor output_tensor(const Node& n, int id, uint64_t epoch) {
  return Tensor::from_parts(n.out, id, epoch);
}

// Sum an adjoint over broadcast dimensions when the operand was 1x1.
Tensor reduce_to(const Tensor& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  return sum(g);
}

}  // namespace

std::vector<Tensor> gradient(const Tensor& out, const std::vector<Tensor>& wrt,
                             bool record_adjoints) {
  Tape* tape = Tape::active();
  if (!tape) throw DetachedGraph("gradient: no active tape");
  if (!out.is_scalar()) throw NotScalar("gradient: output must be 1x1");
  if (out.node() < 0 || out.epoch() != tape->epoch()) {
    throw DetachedGraph("gradient: output is not recorded on the active tape");
  }

  const int end = out.node();
  int min_id = end;
  bool any_wrt = false;
  for (const Tensor& t : wrt) {
    if (t.node() < 0) continue;
    if (t.epoch() != tape->epoch()) {
      throw DetachedGraph("gradient: wrt tensor from a different tape epoch");
    }
    if (t.node() <= end) {
      min_id = std::min(min_id, t.node());
      any_wrt = true;
    }
  }

  std::vector<Tensor> grads(wrt.size());
  auto fill_zeros = [&] {
    for (size_t i = 0; i < wrt.size(); ++i) {
      if (!grads[i].defined()) {
        grads[i] = Tensor::zeros(wrt[i].rows(), wrt[i].cols());
      }
    }
  };
  if (!any_wrt) {
    fill_zeros();
    return grads;
  }

  // All work is bounded to [min_id, end]: nothing below the lowest wrt leaf
  // can lie on a wrt-to-output path.
  const int span = end - min_id + 1;
  auto at = [min_id](int id) { return id - min_id; };
  std::vector<uint8_t> is_wrt(span, 0);
  for (const Tensor& t : wrt) {
    if (t.node() >= min_id && t.node() <= end) is_wrt[at(t.node())] = 1;
  }

  // Restrict the sweep to nodes that lie between a wrt leaf and the output.
  std::vector<uint8_t> anc(span, 0);
  anc[at(end)] = 1;
  for (int id = end; id >= min_id; --id) {
    if (!anc[at(id)]) continue;
    const Node& n = tape->node(id);
    if (n.in0 >= min_id) anc[at(n.in0)] = 1;
    if (n.in1 >= min_id) anc[at(n.in1)] = 1;
  }
  std::vector<uint8_t> need(span, 0);
  for (int id = min_id; id <= end; ++id) {
    if (!anc[at(id)]) continue;
    if (is_wrt[at(id)]) {
      need[at(id)] = 1;
      continue;
    }
    const Node& n = tape->node(id);
    const bool from_wrt =
        (n.in0 >= min_id && n.in0 <= end && need[at(n.in0)]) ||
        (n.in1 >= min_id && n.in1 <= end && need[at(n.in1)]);
    need[at(id)] = from_wrt ? 1 : 0;
  }
  if (!need[at(end)]) {
    fill_zeros();
    return grads;
  }

  const uint64_t epoch = tape->epoch();
  // Without recording, the emitted adjoint expressions degrade to plain
  // value computations (no nodes appended).
  Tape::Scope sweep_scope(record_adjoints ? tape : nullptr);
  std::vector<Tensor> adj(span);
  adj[at(end)] = Tensor::ones(1, 1);

  auto accumulate = [&](int id, const Tensor& g) {
    if (id < min_id || id > end || !need[at(id)]) return;
    Tensor& slot = adj[at(id)];
    slot = slot.defined() ? add(slot, g) : g;
  };

  for (int id = end; id >= min_id; --id) {
    if (!need[at(id)] || !adj[at(id)].defined()) continue;
    const Node n = tape->node(id);  // copy: emissions may reallocate the tape
    const Tensor g = adj[at(id)];
    const Tensor a = input_tensor(n, 0, epoch);
    const Tensor b = input_tensor(n, 1, epoch);
    const Tensor y = output_tensor(n, id, epoch);
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(n.in0, reduce_to(g, a.rows(), a.cols()));
        accumulate(n.in1, reduce_to(g, b.rows(), b.cols()));
        break;
      case Op::Sub:
        accumulate(n.in0, reduce_to(g, a.rows(), a.cols()));
        accumulate(n.in1, neg(reduce_to(g, b.rows(), b.cols())));
        break;
      case Op::Neg:
        accumulate(n.in0, neg(g));
        break;
      case Op::Mul:
        accumulate(n.in0, reduce_to(mul(g, b), a.rows(), a.cols()));
        accumulate(n.in1, reduce_to(mul(g, a), b.rows(), b.cols()));
        break;
      case Op::ScaleConst:
        accumulate(n.in0, smul(g, n.c));
        break;
      case Op::MatMul:
        accumulate(n.in0, matmul(g, transpose(b)));
        accumulate(n.in1, matmul(transpose(a), g));
        break;
      case Op::Transpose:
        accumulate(n.in0, transpose(g));
        break;
      case Op::Reshape:
        accumulate(n.in0, reshape(g, a.rows(), a.cols()));
        break;
      case Op::Sum:
        accumulate(n.in0, mul(g, Tensor::ones(a.rows(), a.cols())));
        break;
      case Op::Tanh:
        accumulate(n.in0,
                   mul(g, sub(Tensor::ones(y.rows(), y.cols()), mul(y, y))));
        break;
      case Op::Sigmoid:
        accumulate(
            n.in0,
            mul(g, mul(y, sub(Tensor::ones(y.rows(), y.cols()), y))));
        break;
      case Op::Softplus:
        accumulate(n.in0, mul(g, sigmoid(a)));
        break;
      case Op::Relu: {
        Mat mask = (a.value().array() > 0.0).cast<double>().matrix();
        accumulate(n.in0, mul(g, Tensor::constant(std::move(mask))));
        break;
      }
      case Op::Abs: {
        Mat sign = a.value().unaryExpr(
            [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        accumulate(n.in0, mul(g, Tensor::constant(std::move(sign))));
        break;
      }
      case Op::PowConst:
        accumulate(n.in0, mul(g, smul(pow_const(a, n.c - 1.0), n.c)));
        break;
      case Op::Inverse: {
        const Tensor yt = transpose(y);
        accumulate(n.in0, neg(matmul(matmul(yt, g), yt)));
        break;
      }
      case Op::Cross3:
        accumulate(n.in0, cross(b, g));
        accumulate(n.in1, cross(g, a));
        break;
      case Op::Trace:
        accumulate(n.in0, mul(g, Tensor::identity(a.rows())));
        break;
      case Op::Hat3:
        accumulate(n.in0, hat_adj(g));
        break;
      case Op::HatAdj:
        accumulate(n.in0, hat3(g));
        break;
      case Op::Scatter:
        accumulate(n.in0, gather(g, n.pattern));
        break;
      case Op::Gather:
        accumulate(n.in0, scatter(g, n.pattern, a.rows(), a.cols()));
        break;
      case Op::Block:
        accumulate(n.in0, embed(g, n.i0, n.i1, a.rows(), a.cols()));
        break;
      case Op::Embed:
        accumulate(n.in0, block(g, n.i0, n.i1, a.rows(), a.cols()));
        break;
      case Op::Vstack:
        accumulate(n.in0, block(g, 0, 0, n.i0, g.cols()));
        accumulate(n.in1, block(g, n.i0, 0, n.i1, g.cols()));
        break;
      case Op::Hstack:
        accumulate(n.in0, block(g, 0, 0, g.rows(), n.i0));
        accumulate(n.in1, block(g, 0, n.i0, g.rows(), n.i1));
        break;
    }
  }

  for (size_t i = 0; i < wrt.size(); ++i) {
    const int id = wrt[i].node();
    if (id >= min_id && id <= end && adj[at(id)].defined()) {
      grads[i] = adj[at(id)];
    }
  }
  fill_zeros();
  return grads;
}

}  // namespace hamlearn::ad
