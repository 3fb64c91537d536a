#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every primitive as a node holding its forward value and the
// local partial derivative with respect to each input. Handles are dense and
// issued in creation order, so a single reverse sweep over the node list
// accumulates adjoints. Var is a lightweight reference into a tape.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lebound {

class Tape;

/// Raised on contract violations inside the tape (domain errors, foreign
/// handles, non-finite leaves). Carries the offending handle when known.
class TapeError : public std::runtime_error {
 public:
  static constexpr std::uint32_t kNoHandle = 0xffffffffu;

  explicit TapeError(const std::string& what, std::uint32_t handle = kNoHandle)
      : std::runtime_error(what), handle_(handle) {}

  std::uint32_t handle() const { return handle_; }

 private:
  std::uint32_t handle_;
};

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  pow_int,
  exp,
  log,
  sqrt,
  neg,
  tanh,
  sigmoid,
  log_sigmoid,
  sum,
  dot,
  logsumexp,
  affine,
};

class Var {
 public:
  Var() = default;

  double value() const { return value_; }
  std::uint32_t handle() const { return handle_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t handle, std::uint32_t generation, double value)
      : tape_(tape), handle_(handle), generation_(generation), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t handle_ = 0;
  std::uint32_t generation_ = 0;
  double value_ = 0.0;
};

/// Adjoints of one backward sweep, indexed by handle.
class Gradient {
 public:
  Gradient() = default;
  explicit Gradient(std::vector<double> adjoints) : adjoints_(std::move(adjoints)) {}

  double operator[](const Var& v) const { return at(v.handle()); }
  double at(std::uint32_t handle) const {
    return handle < adjoints_.size() ? adjoints_[handle] : 0.0;
  }
  std::span<const double> adjoints() const { return adjoints_; }

 private:
  std::vector<double> adjoints_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent input. Rejects non-finite values.
  Var leaf(double value);
  /// Same as leaf, but documents that no gradient is wanted.
  Var constant(double value) { return leaf(value); }

  /// Reverse sweep seeded with `seed` at `root`.
  Gradient backward(const Var& root, double seed = 1.0) const;

  /// Invalidates every Var issued so far and empties the record.
  void reset();

  std::size_t size() const { return values_.size(); }
  Op op(std::uint32_t handle) const { return ops_.at(handle); }

  // Node construction used by the operator overloads below.
  Var unary_node(Op op, const Var& a, double value, double partial);
  Var binary_node(Op op, const Var& a, double da, const Var& b, double db,
                  double value);
  Var nary_node(Op op, std::span<const Var> inputs,
                std::span<const double> partials, double value);

  void check_owned(const Var& v) const;

 private:
  Var push(Op op, double value);

  std::vector<double> values_;
  std::vector<Op> ops_;
  std::vector<std::uint32_t> edge_begin_;  // size() + 1 offsets into edges
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::uint32_t generation_ = 1;
};

// Arithmetic. Mixed Var/double forms treat the double as a constant.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);
Var operator-(const Var& a);

Var pow_int(const Var& a, int n);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var log_sigmoid(const Var& a);

// Reductions. All require a nonempty input.
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> xs, std::span<const Var> ys);
Var dot(std::span<const Var> xs, std::span<const double> weights);
Var logsumexp(std::span<const Var> xs);
/// offset + Σ weights[i]·xs[i] as a single node.
Var affine(double offset, std::span<const Var> xs, std::span<const double> weights);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

/// A T-typed constant living on the same tape as `like` (identity for double).
inline double constant_like(double, double v) { return v; }
inline Var constant_like(const Var& like, double v) { return like.tape()->constant(v); }

}  // namespace lebound
