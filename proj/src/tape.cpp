#include "lebound/tape.hpp"

#include <cmath>
#include <string>

#include "lebound/math.hpp"

namespace lebound {

namespace {

std::string describe(std::uint32_t handle) { return "handle " + std::to_string(handle); }

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw TapeError("operation on a default-constructed Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw TapeError("operands live on different tapes", b.handle());
  return t;
}

Tape& tape_of(std::span<const Var> xs) {
  if (xs.empty()) throw TapeError("reduction over an empty list");
  Tape& t = tape_of(xs[0]);
  for (const Var& x : xs) {
    if (x.tape() != &t) throw TapeError("operands live on different tapes", x.handle());
  }
  return t;
}

}  // namespace

Var Tape::push(Op op, double value) {
  const auto handle = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  ops_.push_back(op);
  if (edge_begin_.empty()) edge_begin_.push_back(0);
  edge_begin_.push_back(static_cast<std::uint32_t>(edge_parent_.size()));
  return Var(this, handle, generation_, value);
}

Var Tape::leaf(double value) {
  if (!std::isfinite(value)) {
    throw TapeError("leaf value must be finite, got " + std::to_string(value));
  }
  return push(Op::leaf, value);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this) throw TapeError("Var belongs to another tape", v.handle_);
  if (v.generation_ != generation_ || v.handle_ >= values_.size()) {
    throw TapeError("Var was issued before the last reset", v.handle_);
  }
}

Var Tape::unary_node(Op op, const Var& a, double value, double partial) {
  check_owned(a);
  edge_parent_.push_back(a.handle());
  edge_partial_.push_back(partial);
  return push(op, value);
}

Var Tape::binary_node(Op op, const Var& a, double da, const Var& b, double db,
                      double value) {
  check_owned(a);
  check_owned(b);
  edge_parent_.push_back(a.handle());
  edge_partial_.push_back(da);
  edge_parent_.push_back(b.handle());
  edge_partial_.push_back(db);
  return push(op, value);
}

Var Tape::nary_node(Op op, std::span<const Var> inputs,
                    std::span<const double> partials, double value) {
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    check_owned(inputs[k]);
    edge_parent_.push_back(inputs[k].handle());
    edge_partial_.push_back(partials[k]);
  }
  return push(op, value);
}

Gradient Tape::backward(const Var& root, double seed) const {
  check_owned(root);
  std::vector<double> adjoint(root.handle() + 1, 0.0);
  adjoint[root.handle()] = seed;
  for (std::uint32_t node = root.handle() + 1; node-- > 0;) {
    const double a = adjoint[node];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[node]; e < edge_begin_[node + 1]; ++e) {
      adjoint[edge_parent_[e]] += a * edge_partial_[e];
    }
  }
  return Gradient(std::move(adjoint));
}

void Tape::reset() {
  values_.clear();
  ops_.clear();
  edge_begin_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  ++generation_;
}

Var operator+(const Var& a, const Var& b) {
  return tape_of(a, b).binary_node(Op::add, a, 1.0, b, 1.0, a.value() + b.value());
}

Var operator-(const Var& a, const Var& b) {
  return tape_of(a, b).binary_node(Op::sub, a, 1.0, b, -1.0, a.value() - b.value());
}

Var operator*(const Var& a, const Var& b) {
  return tape_of(a, b).binary_node(Op::mul, a, b.value(), b, a.value(),
                                   a.value() * b.value());
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw TapeError("division by zero at " + describe(b.handle()), b.handle());
  const double inv = 1.0 / b.value();
  return tape_of(a, b).binary_node(Op::div, a, inv, b, -a.value() * inv * inv,
                                   a.value() / b.value());
}

Var operator+(const Var& a, double b) {
  return tape_of(a).unary_node(Op::add, a, a.value() + b, 1.0);
}
Var operator+(double a, const Var& b) {
  return tape_of(b).unary_node(Op::add, b, a + b.value(), 1.0);
}
Var operator-(const Var& a, double b) {
  return tape_of(a).unary_node(Op::sub, a, a.value() - b, 1.0);
}
Var operator-(double a, const Var& b) {
  return tape_of(b).unary_node(Op::sub, b, a - b.value(), -1.0);
}
Var operator*(const Var& a, double b) {
  return tape_of(a).unary_node(Op::mul, a, a.value() * b, b);
}
Var operator*(double a, const Var& b) {
  return tape_of(b).unary_node(Op::mul, b, a * b.value(), a);
}
Var operator/(const Var& a, double b) {
  if (b == 0.0) throw TapeError("division by a zero constant", a.handle());
  return tape_of(a).unary_node(Op::div, a, a.value() / b, 1.0 / b);
}
Var operator/(double a, const Var& b) {
  if (b.value() == 0.0) throw TapeError("division by zero at " + describe(b.handle()), b.handle());
  const double inv = 1.0 / b.value();
  return tape_of(b).unary_node(Op::div, b, a / b.value(), -a * inv * inv);
}

Var operator-(const Var& a) { return tape_of(a).unary_node(Op::neg, a, -a.value(), -1.0); }

Var pow_int(const Var& a, int n) {
  const double value = lebound::pow_int(a.value(), n);
  const double partial = n == 0 ? 0.0 : n * lebound::pow_int(a.value(), n - 1);
  return tape_of(a).unary_node(Op::pow_int, a, value, partial);
}

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return tape_of(a).unary_node(Op::exp, a, e, e);
}

Var log(const Var& a) {
  if (!(a.value() > 0.0)) {
    throw TapeError("log of non-positive value at " + describe(a.handle()), a.handle());
  }
  return tape_of(a).unary_node(Op::log, a, std::log(a.value()), 1.0 / a.value());
}

Var sqrt(const Var& a) {
  if (!(a.value() > 0.0)) {
    throw TapeError("sqrt of non-positive value at " + describe(a.handle()), a.handle());
  }
  const double s = std::sqrt(a.value());
  return tape_of(a).unary_node(Op::sqrt, a, s, 0.5 / s);
}

Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return tape_of(a).unary_node(Op::tanh, a, t, 1.0 - t * t);
}

Var sigmoid(const Var& a) {
  const double s = lebound::sigmoid(a.value());
  // 1 - s computed as sigmoid(-x) to keep precision in the upper tail.
  return tape_of(a).unary_node(Op::sigmoid, a, s, s * lebound::sigmoid(-a.value()));
}

Var log_sigmoid(const Var& a) {
  return tape_of(a).unary_node(Op::log_sigmoid, a, lebound::log_sigmoid(a.value()),
                               lebound::sigmoid(-a.value()));
}

namespace {

std::vector<double> values_of(std::span<const Var> xs) {
  std::vector<double> v(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) v[i] = xs[i].value();
  return v;
}

}  // namespace

Var sum(std::span<const Var> xs) {
  Tape& t = tape_of(xs);
  const std::vector<double> v = values_of(xs);
  const std::vector<double> ones(xs.size(), 1.0);
  return t.nary_node(Op::sum, xs, ones, lebound::sum(v));
}

Var dot(std::span<const Var> xs, std::span<const Var> ys) {
  if (xs.size() != ys.size()) throw TapeError("dot length mismatch");
  Tape& t = tape_of(xs);
  tape_of(ys);
  const std::vector<double> xv = values_of(xs);
  const std::vector<double> yv = values_of(ys);
  const double value = lebound::dot(xv, yv);
  std::vector<Var> inputs(xs.begin(), xs.end());
  inputs.insert(inputs.end(), ys.begin(), ys.end());
  std::vector<double> partials(yv);
  partials.insert(partials.end(), xv.begin(), xv.end());
  for (const Var& y : ys) {
    if (y.tape() != &t) throw TapeError("operands live on different tapes", y.handle());
  }
  return t.nary_node(Op::dot, inputs, partials, value);
}

Var dot(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw TapeError("dot length mismatch");
  Tape& t = tape_of(xs);
  const std::vector<double> xv = values_of(xs);
  return t.nary_node(Op::dot, xs, weights, lebound::dot(xv, weights));
}

Var affine(double offset, std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw TapeError("affine length mismatch");
  Tape& t = tape_of(xs);
  const std::vector<double> xv = values_of(xs);
  return t.nary_node(Op::affine, xs, weights, lebound::affine(offset, xv, weights));
}

Var logsumexp(std::span<const Var> xs) {
  Tape& t = tape_of(xs);
  const std::vector<double> v = values_of(xs);
  const double value = lebound::logsumexp(v);
  std::vector<double> softmax(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) softmax[i] = std::exp(v[i] - value);
  return t.nary_node(Op::logsumexp, xs, softmax, value);
}

}  // namespace lebound
