#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ntmlab/tensor.hpp"

namespace ntmlab {

/// Handle to a node on a Tape. Valid only for the tape that produced it.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Gradient of the loss with respect to each registered parameter, keyed by
/// parameter name. Iteration order is lexicographic and therefore stable.
using Gradients = std::map<std::string, Tensor>;

/// Reverse-mode autodiff tape. Nodes are appended in execution order
/// (define-by-run); a tape is built fresh for every training step and
/// confined to one thread. All arithmetic is double precision and the
/// node order is fixed, so forward and backward replays are bit-identical.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Named trainable leaf. backward() reports a gradient for every
  /// registered parameter, zero-filled if the loss does not reach it.
  Var param(const std::string& name, const Tensor& value);

  /// Anonymous non-trainable leaf.
  Var constant(Tensor value);
  Var constant_scalar(double value) { return constant(Tensor::scalar(value)); }

  // -- primitive operations ------------------------------------------------
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// t * s with s a size-1 node broadcast over t.
  Var scale(Var t, Var s);
  Var scale_const(Var t, double c);
  Var add_const(Var t, double c);
  Var concat(const std::vector<Var>& parts, int axis);
  Var slice(Var t, int axis, std::size_t start, std::size_t len);
  /// Sums away one axis (rank drops by one; scalar result has shape {1}).
  Var sum(Var t, int axis);
  Var sum_all(Var t);
  Var sigmoid(Var t);
  Var tanh(Var t);
  Var softplus(Var t);
  Var exp(Var t);
  Var softmax(Var t, int axis);
  /// base ^ e with e a size-1 node. Gradient contributions at base == 0 are
  /// defined as zero (limit convention; keeps one-hot attention NaN-free).
  Var pow(Var base, Var e);
  Var pow_const(Var base, double e);
  /// Clamp to [lo, hi]; gradient passes through on the closed interval.
  Var clip(Var t, double lo, double hi);
  /// Eq-style circular convolution: out(i) = sum_j t(j) * kernel(i - j) with
  /// kernel indexed by centered offsets {-(K-1)/2, ..., +(K-1)/2}, i - j mod N.
  Var circular_convolve_1d(Var t, Var kernel);
  Var l2_norm(Var t);
  Var reshape(Var t, Shape shape);

  const Tensor& value(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  /// Reverse pass from a scalar loss node.
  Gradients backward(Var loss) const;

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatmul,
    kAdd,
    kSub,
    kMul,
    kScale,
    kScaleConst,
    kAddConst,
    kConcat,
    kSlice,
    kSum,
    kSumAll,
    kSigmoid,
    kTanh,
    kSoftplus,
    kExp,
    kSoftmax,
    kPow,
    kPowConst,
    kClip,
    kCircConv,
    kL2Norm,
    kReshape,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::int32_t> in;
    Tensor val;
    int axis = 0;
    double c0 = 0.0;  // clip lo / scalar constant / exponent
    double c1 = 0.0;  // clip hi
    std::size_t start = 0;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, std::int32_t>> params_;
};

// -- helpers composed from primitives ----------------------------------------

/// 1 - t.
Var one_minus(Tape& tape, Var t);
/// Mean over all elements.
Var mean_all(Tape& tape, Var t);
/// outer(u, v) for vectors u {n}, v {m} -> {n, m}.
Var outer(Tape& tape, Var u, Var v);

}  // namespace ntmlab
