#include "hamlearn/ad/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace hamlearn::ad {

namespace {
constexpr char kMagic[] = "HAMLEARN-CKPT-1\n";
}

void ParamStore::add(const std::string& name, Mat init, bool decay) {
  if (entries_.count(name)) throw Error("ParamStore: duplicate name " + name);
  Entry e;
  e.decay = decay;
  e.grad = Mat::Zero(init.rows(), init.cols());
  e.m = e.grad;
  e.v = e.grad;
  e.value = std::make_shared<const Mat>(std::move(init));
  entries_.emplace(name, std::move(e));
}

bool ParamStore::has(const std::string& name) const {
  return entries_.count(name) > 0;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown name " + name);
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown name " + name);
  return it->second;
}

const Mat& ParamStore::value(const std::string& name) const {
  return *entry(name).value;
}

MatPtr ParamStore::value_ptr(const std::string& name) const {
  return entry(name).value;
}

void ParamStore::set_value(const std::string& name, Mat v) {
  Entry& e = entry(name);
  if (v.rows() != e.value->rows() || v.cols() != e.value->cols()) {
    throw ShapeMismatch("ParamStore: set_value shape differs for " + name);
  }
  e.value = std::make_shared<const Mat>(std::move(v));
}

const Mat& ParamStore::grad(const std::string& name) const {
  return entry(name).grad;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.grad.setZero();
}

void ParamStore::accumulate_grad(const std::string& name, const Mat& g) {
  Entry& e = entry(name);
  if (g.rows() != e.grad.rows() || g.cols() != e.grad.cols()) {
    throw ShapeMismatch("ParamStore: gradient shape differs for " + name);
  }
  e.grad += g;
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, e] : entries_) sq += e.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::scale_grads(double factor) {
  for (auto& [name, e] : entries_) e.grad *= factor;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps,
                           double weight_decay) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, e] : entries_) {
    e.m = beta1 * e.m + (1.0 - beta1) * e.grad;
    e.v = beta2 * e.v + (1.0 - beta2) * e.grad.cwiseProduct(e.grad);
    const Mat m_hat = e.m / bc1;
    const Mat v_hat = e.v / bc2;
    Mat next = *e.value;
    if (weight_decay > 0.0 && e.decay) next *= 1.0 - lr * weight_decay;
    next.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
    e.value = std::make_shared<const Mat>(std::move(next));
  }
}

void ParamStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("ParamStore: cannot open " + path + " for writing");
  f.write(kMagic, sizeof(kMagic) - 1);
  const uint64_t count = entries_.size();
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, e] : entries_) {
    const uint32_t nlen = static_cast<uint32_t>(name.size());
    f.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
    f.write(name.data(), nlen);
    const uint32_t rows = static_cast<uint32_t>(e.value->rows());
    const uint32_t cols = static_cast<uint32_t>(e.value->cols());
    f.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    f.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) {
        const double x = (*e.value)(r, c);
        f.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
    }
  }
  if (!f) throw Error("ParamStore: write failed for " + path);
}

void ParamStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("ParamStore: cannot open " + path);
  char magic[sizeof(kMagic) - 1];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error("ParamStore: bad checkpoint magic in " + path);
  }
  uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t nlen = 0;
    f.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    uint32_t rows = 0, cols = 0;
    f.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    f.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Mat v(rows, cols);
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) {
        double x = 0;
        f.read(reinterpret_cast<char*>(&x), sizeof(x));
        v(r, c) = x;
      }
    }
    if (!f) throw Error("ParamStore: truncated checkpoint " + path);
    if (has(name)) {
      set_value(name, std::move(v));
    } else {
      add(name, std::move(v));
    }
  }
}

Tensor LeafSet::operator()(const std::string& name) {
  auto it = leaves_.find(name);
  Tape* tape = Tape::active();
  if (it != leaves_.end()) {
    if (!tape || it->second.epoch() == tape->epoch() ||
        it->second.node() < 0) {
      return it->second;
    }
    leaves_.erase(it);
  }
  Tensor t;
  if (!tape) {
    t = Tensor::from_parts(store_->value_ptr(name), -1, 0);
  } else {
    Node n;
    n.op = Op::Leaf;
    n.out = store_->value_ptr(name);
    const int id = tape->append(std::move(n));
    t = Tensor::from_parts(store_->value_ptr(name), id, tape->epoch());
  }
  leaves_.emplace(name, t);
  return t;
}

void backward(const Tensor& loss, LeafSet& leaves) {
  std::vector<std::string> names;
  std::vector<Tensor> wrt;
  for (const auto& [name, t] : leaves.all()) {
    names.push_back(name);
    wrt.push_back(t);
  }
  const std::vector<Tensor> grads = gradient(loss, wrt);
  for (size_t i = 0; i < names.size(); ++i) {
    leaves.store().accumulate_grad(names[i], grads[i].value());
  }
}

}  // namespace hamlearn::ad
