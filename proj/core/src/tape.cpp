#include "ntmlab/tape.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace ntmlab {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Derivative of b^p at b, with the zero-base convention: at b == 0 the
/// contribution is p == 1 ? 1 : 0 (limit of p * b^(p-1) where it exists).
double pow_grad_base(double b, double p) {
  if (b == 0.0) return p == 1.0 ? 1.0 : 0.0;
  return p * std::pow(b, p - 1.0);
}

struct AxisSpan {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSpan axis_span(const Shape& shape, int axis) {
  AxisSpan s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  check(v, "node");
  return nodes_[v.id];
}

void Tape::check(Var v, const char* op) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::logic_error(std::string(op) + ": variable is not on this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check(v, "value");
  return nodes_[v.id].val;
}

Var Tape::param(const std::string& name, const Tensor& value) {
  Node n;
  n.op = Op::kLeaf;
  n.val = value;
  Var v = push(std::move(n));
  params_.emplace_back(name, v.id);
  return v;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.val = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
    throw ShapeError("matmul: lhs " + shape_str(ta.shape()) + " rhs " +
                     shape_str(tb.shape()));
  }
  const std::size_t rows = ta.dim(0), k = ta.dim(1), cols = tb.dim(1);
  Node n;
  n.op = Op::kMatmul;
  n.in = {a.id, b.id};
  n.val = Tensor({rows, cols});
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* pc = n.val.data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * cols;
      double* crow = pc + i * cols;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  if (!ta.same_shape(tb)) {
    throw ShapeError("add: lhs " + shape_str(ta.shape()) + " rhs " +
                     shape_str(tb.shape()));
  }
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id};
  n.val = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.val[i] = ta[i] + tb[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  if (!ta.same_shape(tb)) {
    throw ShapeError("sub: lhs " + shape_str(ta.shape()) + " rhs " +
                     shape_str(tb.shape()));
  }
  Node n;
  n.op = Op::kSub;
  n.in = {a.id, b.id};
  n.val = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.val[i] = ta[i] - tb[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  if (!ta.same_shape(tb)) {
    throw ShapeError("mul: lhs " + shape_str(ta.shape()) + " rhs " +
                     shape_str(tb.shape()));
  }
  Node n;
  n.op = Op::kMul;
  n.in = {a.id, b.id};
  n.val = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.val[i] = ta[i] * tb[i];
  return push(std::move(n));
}

Var Tape::scale(Var t, Var s) {
  check(t, "scale");
  check(s, "scale");
  const Tensor& tt = nodes_[t.id].val;
  const Tensor& ts = nodes_[s.id].val;
  if (ts.size() != 1) {
    throw ShapeError("scale: scalar operand has shape " + shape_str(ts.shape()));
  }
  Node n;
  n.op = Op::kScale;
  n.in = {t.id, s.id};
  n.val = Tensor(tt.shape());
  const double c = ts[0];
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = tt[i] * c;
  return push(std::move(n));
}

Var Tape::scale_const(Var t, double c) {
  check(t, "scale_const");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kScaleConst;
  n.in = {t.id};
  n.c0 = c;
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = tt[i] * c;
  return push(std::move(n));
}

Var Tape::add_const(Var t, double c) {
  check(t, "add_const");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kAddConst;
  n.in = {t.id};
  n.c0 = c;
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = tt[i] + c;
  return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  for (Var p : parts) check(p, "concat");
  const Shape& first = nodes_[parts[0].id].val.shape();
  if (axis < 0 || static_cast<std::size_t>(axis) >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (Var p : parts) {
    const Shape& s = nodes_[p.id].val.shape();
    if (s.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " +
                       shape_str(s));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) != axis && s[d] != first[d]) {
        throw ShapeError("concat: shape mismatch " + shape_str(first) + " vs " +
                         shape_str(s));
      }
    }
    out_shape[axis] += s[axis];
  }
  Node n;
  n.op = Op::kConcat;
  n.axis = axis;
  for (Var p : parts) n.in.push_back(p.id);
  n.val = Tensor(out_shape);
  const AxisSpan span = axis_span(out_shape, axis);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& tp = nodes_[p.id].val;
    const std::size_t np = tp.shape()[axis];
    for (std::size_t o = 0; o < span.outer; ++o) {
      for (std::size_t i = 0; i < np; ++i) {
        const double* src = tp.data() + (o * np + i) * span.inner;
        double* dst = n.val.data() + (o * span.n + offset + i) * span.inner;
        for (std::size_t j = 0; j < span.inner; ++j) dst[j] = src[j];
      }
    }
    offset += np;
  }
  return push(std::move(n));
}

Var Tape::slice(Var t, int axis, std::size_t start, std::size_t len) {
  check(t, "slice");
  const Tensor& tt = nodes_[t.id].val;
  if (axis < 0 || static_cast<std::size_t>(axis) >= tt.rank() ||
      start + len > tt.dim(axis) || len == 0) {
    throw ShapeError("slice: [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(tt.shape()));
  }
  Shape out_shape = tt.shape();
  out_shape[axis] = len;
  Node n;
  n.op = Op::kSlice;
  n.in = {t.id};
  n.axis = axis;
  n.start = start;
  n.val = Tensor(out_shape);
  const AxisSpan span = axis_span(tt.shape(), axis);
  for (std::size_t o = 0; o < span.outer; ++o) {
    for (std::size_t i = 0; i < len; ++i) {
      const double* src = tt.data() + (o * span.n + start + i) * span.inner;
      double* dst = n.val.data() + (o * len + i) * span.inner;
      for (std::size_t j = 0; j < span.inner; ++j) dst[j] = src[j];
    }
  }
  return push(std::move(n));
}

Var Tape::sum(Var t, int axis) {
  check(t, "sum");
  const Tensor& tt = nodes_[t.id].val;
  if (axis < 0 || static_cast<std::size_t>(axis) >= tt.rank()) {
    throw ShapeError("sum: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(tt.shape()));
  }
  Shape out_shape;
  for (std::size_t d = 0; d < tt.rank(); ++d) {
    if (static_cast<int>(d) != axis) out_shape.push_back(tt.dim(d));
  }
  if (out_shape.empty()) out_shape = {1};
  Node n;
  n.op = Op::kSum;
  n.in = {t.id};
  n.axis = axis;
  n.val = Tensor(out_shape);
  const AxisSpan span = axis_span(tt.shape(), axis);
  for (std::size_t o = 0; o < span.outer; ++o) {
    for (std::size_t i = 0; i < span.n; ++i) {
      const double* src = tt.data() + (o * span.n + i) * span.inner;
      double* dst = n.val.data() + o * span.inner;
      for (std::size_t j = 0; j < span.inner; ++j) dst[j] += src[j];
    }
  }
  return push(std::move(n));
}

Var Tape::sum_all(Var t) {
  check(t, "sum_all");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kSumAll;
  n.in = {t.id};
  n.val = Tensor({1});
  double acc = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) acc += tt[i];
  n.val[0] = acc;
  return push(std::move(n));
}

Var Tape::sigmoid(Var t) {
  check(t, "sigmoid");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kSigmoid;
  n.in = {t.id};
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = stable_sigmoid(tt[i]);
  return push(std::move(n));
}

Var Tape::tanh(Var t) {
  check(t, "tanh");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kTanh;
  n.in = {t.id};
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = std::tanh(tt[i]);
  return push(std::move(n));
}

Var Tape::softplus(Var t) {
  check(t, "softplus");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kSoftplus;
  n.in = {t.id};
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = stable_softplus(tt[i]);
  return push(std::move(n));
}

Var Tape::exp(Var t) {
  check(t, "exp");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kExp;
  n.in = {t.id};
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) n.val[i] = std::exp(tt[i]);
  return push(std::move(n));
}

Var Tape::softmax(Var t, int axis) {
  check(t, "softmax");
  const Tensor& tt = nodes_[t.id].val;
  if (axis < 0 || static_cast<std::size_t>(axis) >= tt.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(tt.shape()));
  }
  Node n;
  n.op = Op::kSoftmax;
  n.in = {t.id};
  n.axis = axis;
  n.val = Tensor(tt.shape());
  const AxisSpan span = axis_span(tt.shape(), axis);
  for (std::size_t o = 0; o < span.outer; ++o) {
    for (std::size_t j = 0; j < span.inner; ++j) {
      const std::size_t base = o * span.n * span.inner + j;
      double mx = tt[base];
      for (std::size_t i = 1; i < span.n; ++i) {
        mx = std::max(mx, tt[base + i * span.inner]);
      }
      double denom = 0.0;
      for (std::size_t i = 0; i < span.n; ++i) {
        const double e = std::exp(tt[base + i * span.inner] - mx);
        n.val[base + i * span.inner] = e;
        denom += e;
      }
      for (std::size_t i = 0; i < span.n; ++i) n.val[base + i * span.inner] /= denom;
    }
  }
  return push(std::move(n));
}

Var Tape::pow(Var base, Var e) {
  check(base, "pow");
  check(e, "pow");
  const Tensor& tb = nodes_[base.id].val;
  const Tensor& te = nodes_[e.id].val;
  if (te.size() != 1) {
    throw ShapeError("pow: exponent has shape " + shape_str(te.shape()));
  }
  Node n;
  n.op = Op::kPow;
  n.in = {base.id, e.id};
  n.val = Tensor(tb.shape());
  const double p = te[0];
  for (std::size_t i = 0; i < tb.size(); ++i) n.val[i] = std::pow(tb[i], p);
  return push(std::move(n));
}

Var Tape::pow_const(Var base, double e) {
  check(base, "pow_const");
  const Tensor& tb = nodes_[base.id].val;
  Node n;
  n.op = Op::kPowConst;
  n.in = {base.id};
  n.c0 = e;
  n.val = Tensor(tb.shape());
  for (std::size_t i = 0; i < tb.size(); ++i) n.val[i] = std::pow(tb[i], e);
  return push(std::move(n));
}

Var Tape::clip(Var t, double lo, double hi) {
  check(t, "clip");
  if (lo > hi) throw std::invalid_argument("clip: lo > hi");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kClip;
  n.in = {t.id};
  n.c0 = lo;
  n.c1 = hi;
  n.val = Tensor(tt.shape());
  for (std::size_t i = 0; i < tt.size(); ++i) {
    n.val[i] = std::min(std::max(tt[i], lo), hi);
  }
  return push(std::move(n));
}

Var Tape::circular_convolve_1d(Var t, Var kernel) {
  check(t, "circular_convolve_1d");
  check(kernel, "circular_convolve_1d");
  const Tensor& tt = nodes_[t.id].val;
  const Tensor& tk = nodes_[kernel.id].val;
  if (tt.rank() != 1 || tk.rank() != 1 || tk.size() % 2 == 0 ||
      tk.size() > tt.size()) {
    throw ShapeError("circular_convolve_1d: weights " + shape_str(tt.shape()) +
                     " kernel " + shape_str(tk.shape()));
  }
  const std::size_t len = tt.size();
  const std::size_t klen = tk.size();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(klen / 2);
  Node n;
  n.op = Op::kCircConv;
  n.in = {t.id, kernel.id};
  n.val = Tensor({len});
  for (std::size_t i = 0; i < len; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < klen; ++m) {
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(m) - half;
      const std::size_t j =
          static_cast<std::size_t>((static_cast<std::ptrdiff_t>(i) - off +
                                    static_cast<std::ptrdiff_t>(len)) %
                                   static_cast<std::ptrdiff_t>(len));
      acc += tt[j] * tk[m];
    }
    n.val[i] = acc;
  }
  return push(std::move(n));
}

Var Tape::l2_norm(Var t) {
  check(t, "l2_norm");
  const Tensor& tt = nodes_[t.id].val;
  Node n;
  n.op = Op::kL2Norm;
  n.in = {t.id};
  n.val = Tensor({1});
  double acc = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) acc += tt[i] * tt[i];
  n.val[0] = std::sqrt(acc);
  return push(std::move(n));
}

Var Tape::reshape(Var t, Shape shape) {
  check(t, "reshape");
  Node n;
  n.op = Op::kReshape;
  n.in = {t.id};
  n.val = nodes_[t.id].val.reshaped(std::move(shape));
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  check(loss, "backward");
  const Tensor& lv = nodes_[loss.id].val;
  if (lv.size() != 1) {
    throw std::invalid_argument("backward: loss has shape " +
                                shape_str(lv.shape()) + ", expected a scalar");
  }

  std::vector<Tensor> grad(loss.id + 1);
  grad[loss.id] = Tensor::full(lv.shape(), 1.0);

  auto acc = [&](std::int32_t id) -> Tensor& {
    Tensor& g = grad[id];
    if (g.size() == 0) g = Tensor(nodes_[id].val.shape());
    return g;
  };

  for (std::int32_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Tensor& g = grad[id];
    if (g.size() == 0 || n.op == Op::kLeaf) continue;

    switch (n.op) {
      case Op::kMatmul: {
        const Tensor& a = nodes_[n.in[0]].val;
        const Tensor& b = nodes_[n.in[1]].val;
        const std::size_t rows = a.dim(0), k = a.dim(1), cols = b.dim(1);
        Tensor& da = acc(n.in[0]);
        Tensor& db = acc(n.in[1]);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* grow = g.data() + i * cols;
            const double* brow = b.data() + kk * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += grow[j] * brow[j];
            da[i * k + kk] += dot;
          }
        }
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* grow = g.data() + i * cols;
            double* dbrow = db.data() + kk * cols;
            for (std::size_t j = 0; j < cols; ++j) dbrow[j] += aik * grow[j];
          }
        }
        break;
      }
      case Op::kAdd: {
        Tensor& da = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        Tensor& db = acc(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
        break;
      }
      case Op::kSub: {
        Tensor& da = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        Tensor& db = acc(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[n.in[0]].val;
        const Tensor& b = nodes_[n.in[1]].val;
        Tensor& da = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
        Tensor& db = acc(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
        break;
      }
      case Op::kScale: {
        const Tensor& t = nodes_[n.in[0]].val;
        const double s = nodes_[n.in[1]].val[0];
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i] * s;
        Tensor& ds = acc(n.in[1]);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * t[i];
        ds[0] += dot;
        break;
      }
      case Op::kScaleConst: {
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i] * n.c0;
        break;
      }
      case Op::kAddConst: {
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i];
        break;
      }
      case Op::kConcat: {
        const AxisSpan span = axis_span(n.val.shape(), n.axis);
        std::size_t offset = 0;
        for (std::int32_t pid : n.in) {
          const std::size_t np = nodes_[pid].val.shape()[n.axis];
          Tensor& dp = acc(pid);
          for (std::size_t o = 0; o < span.outer; ++o) {
            for (std::size_t i = 0; i < np; ++i) {
              const double* src = g.data() + (o * span.n + offset + i) * span.inner;
              double* dst = dp.data() + (o * np + i) * span.inner;
              for (std::size_t j = 0; j < span.inner; ++j) dst[j] += src[j];
            }
          }
          offset += np;
        }
        break;
      }
      case Op::kSlice: {
        const Tensor& t = nodes_[n.in[0]].val;
        const std::size_t len = n.val.shape()[n.axis];
        const AxisSpan span = axis_span(t.shape(), n.axis);
        Tensor& dt = acc(n.in[0]);
        for (std::size_t o = 0; o < span.outer; ++o) {
          for (std::size_t i = 0; i < len; ++i) {
            const double* src = g.data() + (o * len + i) * span.inner;
            double* dst = dt.data() + (o * span.n + n.start + i) * span.inner;
            for (std::size_t j = 0; j < span.inner; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::kSum: {
        const Tensor& t = nodes_[n.in[0]].val;
        const AxisSpan span = axis_span(t.shape(), n.axis);
        Tensor& dt = acc(n.in[0]);
        for (std::size_t o = 0; o < span.outer; ++o) {
          for (std::size_t i = 0; i < span.n; ++i) {
            const double* src = g.data() + o * span.inner;
            double* dst = dt.data() + (o * span.n + i) * span.inner;
            for (std::size_t j = 0; j < span.inner; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::kSumAll: {
        Tensor& dt = acc(n.in[0]);
        const double g0 = g[0];
        for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += g0;
        break;
      }
      case Op::kSigmoid: {
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.val[i];
          dt[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kTanh: {
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.val[i];
          dt[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSoftplus: {
        const Tensor& t = nodes_[n.in[0]].val;
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          dt[i] += g[i] * stable_sigmoid(t[i]);
        }
        break;
      }
      case Op::kExp: {
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i] * n.val[i];
        break;
      }
      case Op::kSoftmax: {
        const AxisSpan span = axis_span(n.val.shape(), n.axis);
        Tensor& dt = acc(n.in[0]);
        for (std::size_t o = 0; o < span.outer; ++o) {
          for (std::size_t j = 0; j < span.inner; ++j) {
            const std::size_t base = o * span.n * span.inner + j;
            double dot = 0.0;
            for (std::size_t i = 0; i < span.n; ++i) {
              const std::size_t ix = base + i * span.inner;
              dot += g[ix] * n.val[ix];
            }
            for (std::size_t i = 0; i < span.n; ++i) {
              const std::size_t ix = base + i * span.inner;
              dt[ix] += n.val[ix] * (g[ix] - dot);
            }
          }
        }
        break;
      }
      case Op::kPow: {
        const Tensor& b = nodes_[n.in[0]].val;
        const double p = nodes_[n.in[1]].val[0];
        Tensor& db = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          db[i] += g[i] * pow_grad_base(b[i], p);
        }
        Tensor& dp = acc(n.in[1]);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (b[i] > 0.0) dot += g[i] * n.val[i] * std::log(b[i]);
        }
        dp[0] += dot;
        break;
      }
      case Op::kPowConst: {
        const Tensor& b = nodes_[n.in[0]].val;
        Tensor& db = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          db[i] += g[i] * pow_grad_base(b[i], n.c0);
        }
        break;
      }
      case Op::kClip: {
        const Tensor& t = nodes_[n.in[0]].val;
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (t[i] >= n.c0 && t[i] <= n.c1) dt[i] += g[i];
        }
        break;
      }
      case Op::kCircConv: {
        const Tensor& t = nodes_[n.in[0]].val;
        const Tensor& k = nodes_[n.in[1]].val;
        const std::size_t len = t.size();
        const std::size_t klen = k.size();
        const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(klen / 2);
        Tensor& dt = acc(n.in[0]);
        Tensor& dk = acc(n.in[1]);
        for (std::size_t i = 0; i < len; ++i) {
          const double gi = g[i];
          for (std::size_t m = 0; m < klen; ++m) {
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(m) - half;
            const std::size_t j =
                static_cast<std::size_t>((static_cast<std::ptrdiff_t>(i) - off +
                                          static_cast<std::ptrdiff_t>(len)) %
                                         static_cast<std::ptrdiff_t>(len));
            dt[j] += gi * k[m];
            dk[m] += gi * t[j];
          }
        }
        break;
      }
      case Op::kL2Norm: {
        const Tensor& t = nodes_[n.in[0]].val;
        const double norm = n.val[0];
        if (norm > 0.0) {
          Tensor& dt = acc(n.in[0]);
          const double g0 = g[0];
          for (std::size_t i = 0; i < t.size(); ++i) dt[i] += g0 * t[i] / norm;
        } else {
          acc(n.in[0]);
        }
        break;
      }
      case Op::kReshape: {
        const Tensor& t = nodes_[n.in[0]].val;
        Tensor& dt = acc(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i];
        (void)t;
        break;
      }
      case Op::kLeaf:
        break;
    }
  }

  Gradients out;
  for (const auto& [name, id] : params_) {
    if (id <= loss.id && grad[id].size() != 0) {
      out[name] = std::move(grad[id]);
    } else {
      out[name] = Tensor(nodes_[id].val.shape());
    }
  }
  return out;
}

Var one_minus(Tape& tape, Var t) {
  return tape.add_const(tape.scale_const(t, -1.0), 1.0);
}

Var mean_all(Tape& tape, Var t) {
  const std::size_t n = tape.value(t).size();
  return tape.scale_const(tape.sum_all(t), 1.0 / static_cast<double>(n));
}

Var outer(Tape& tape, Var u, Var v) {
  const std::size_t nu = tape.value(u).size();
  const std::size_t nv = tape.value(v).size();
  return tape.matmul(tape.reshape(u, {nu, 1}), tape.reshape(v, {1, nv}));
}

}  // namespace ntmlab
