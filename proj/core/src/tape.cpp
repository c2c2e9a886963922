#include "wran/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "wran/error.hpp"

namespace wran {
namespace {

std::atomic<bool> g_deterministic{false};

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kParam: return "param";
    case OpKind::kConstant: return "constant";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kMaxPool: return "max_pool";
    case OpKind::kPiecewiseMaxPool: return "piecewise_max_pool";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kAffine: return "affine";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMeanRows: return "mean_rows";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kPick: return "pick";
    case OpKind::kGrl: return "grl";
    case OpKind::kDropout: return "dropout";
    case OpKind::kClamp: return "clamp";
  }
  return "?";
}

void set_deterministic_mode(bool on) { g_deterministic.store(on); }
bool deterministic_mode() { return g_deterministic.load(); }

Var Tape::push(OpKind op, Tensor value, std::vector<std::size_t> inputs, BackFn back) {
  const std::size_t id = nodes_.size();
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(op) + " at node " +
                           std::to_string(id),
                       id);
  }
  bool needs_grad = false;
  for (std::size_t in : inputs) needs_grad = needs_grad || nodes_[in].needs_grad;
  nodes_.push_back(Node{op, std::move(value), Tensor{}, needs_grad, std::move(inputs),
                        std::move(back), nullptr});
  return Var{id};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::param(ParamStore& store, const std::string& name, bool trainable) {
  auto& entry = store.entry(name);
  Var v = push(OpKind::kParam, entry.value, {}, nullptr);
  nodes_[v.id].needs_grad = trainable;
  if (trainable) nodes_[v.id].param_grad = &entry.grad;
  return v;
}

Var Tape::input(Tensor value, bool requires_grad) {
  Var v = push(OpKind::kConstant, std::move(value), {}, nullptr);
  nodes_[v.id].needs_grad = requires_grad;
  return v;
}

Var Tape::embedding(Var table, std::span<const std::size_t> ids) {
  const Tensor& t = node(table).value;
  const std::size_t vocab = t.rows();
  const std::size_t dim = t.cols();
  require(!ids.empty(), "embedding: empty id sequence");
  Tensor out = Tensor::matrix(ids.size(), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " out of vocabulary of size " +
                       std::to_string(vocab));
    }
    std::copy_n(t.data().begin() + ids[i] * dim, dim, out.data().begin() + i * dim);
  }
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return push(OpKind::kEmbedding, std::move(out), {table.id},
              [saved = std::move(saved), dim](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gt = tp.grad_slot(in);
                for (std::size_t i = 0; i < saved.size(); ++i) {
                  for (std::size_t d = 0; d < dim; ++d) gt[saved[i] * dim + d] += g[i * dim + d];
                }
              });
}

Var Tape::conv1d(Var x, Var w, Var b, std::size_t kernel) {
  const Tensor& xv = node(x).value;
  const Tensor& wv = node(w).value;
  const Tensor& bv = node(b).value;
  require(kernel % 2 == 1, "conv1d: kernel must be odd");
  const std::size_t len = xv.rows();
  const std::size_t din = xv.cols();
  const std::size_t ch = wv.cols();
  require(wv.rows() == kernel * din,
          "conv1d: weight " + wv.shape_string() + " incompatible with input " + xv.shape_string());
  require(bv.size() == ch, "conv1d: bias width mismatch");
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  Tensor out = Tensor::matrix(len, ch);
  for (std::size_t t = 0; t < len; ++t) {
    double* o = &out[t * ch];
    for (std::size_t c = 0; c < ch; ++c) o[c] = bv[c];
    for (std::size_t j = 0; j < kernel; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const double* xr = &xv[static_cast<std::size_t>(src) * din];
      for (std::size_t d = 0; d < din; ++d) {
        const double xd = xr[d];
        if (xd == 0.0) continue;
        const double* wr = &wv[(j * din + d) * ch];
        for (std::size_t c = 0; c < ch; ++c) o[c] += xd * wr[c];
      }
    }
  }
  return push(OpKind::kConv1d, std::move(out), {x.id, w.id, b.id},
              [kernel, half, len, din, ch](Tape& tp, std::size_t self) {
                const auto& ins = tp.nodes_[self].inputs;
                const Tensor& g = tp.out_grad(self);
                const Tensor& xv = tp.val(ins[0]);
                const Tensor& wv = tp.val(ins[1]);
                Tensor* gx = tp.needs(ins[0]) ? &tp.grad_slot(ins[0]) : nullptr;
                Tensor* gw = tp.needs(ins[1]) ? &tp.grad_slot(ins[1]) : nullptr;
                if (tp.needs(ins[2])) {
                  Tensor& gb = tp.grad_slot(ins[2]);
                  for (std::size_t t = 0; t < len; ++t)
                    for (std::size_t c = 0; c < ch; ++c) gb[c] += g[t * ch + c];
                }
                for (std::size_t t = 0; t < len; ++t) {
                  const double* gr = &g[t * ch];
                  for (std::size_t j = 0; j < kernel; ++j) {
                    const std::ptrdiff_t src =
                        static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                    const auto s = static_cast<std::size_t>(src);
                    for (std::size_t d = 0; d < din; ++d) {
                      const std::size_t wrow = (j * din + d) * ch;
                      if (gx) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < ch; ++c) acc += gr[c] * wv[wrow + c];
                        (*gx)[s * din + d] += acc;
                      }
                      if (gw) {
                        const double xd = xv[s * din + d];
                        if (xd == 0.0) continue;
                        for (std::size_t c = 0; c < ch; ++c) (*gw)[wrow + c] += gr[c] * xd;
                      }
                    }
                  }
                }
              });
}

Var Tape::max_pool(Var x) {
  const Tensor& xv = node(x).value;
  const std::size_t len = xv.rows();
  const std::size_t ch = xv.cols();
  Tensor out = Tensor::matrix(1, ch);
  std::vector<std::size_t> arg(ch, 0);
  for (std::size_t c = 0; c < ch; ++c) {
    double best = xv[c];
    for (std::size_t t = 1; t < len; ++t) {
      if (xv[t * ch + c] > best) {
        best = xv[t * ch + c];
        arg[c] = t;
      }
    }
    out[c] = best;
  }
  return push(OpKind::kMaxPool, std::move(out), {x.id},
              [arg = std::move(arg), ch](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gx = tp.grad_slot(in);
                for (std::size_t c = 0; c < ch; ++c) gx[arg[c] * ch + c] += g[c];
              });
}

Var Tape::piecewise_max_pool(Var x, std::size_t p1, std::size_t p2) {
  const Tensor& xv = node(x).value;
  const std::size_t len = xv.rows();
  const std::size_t ch = xv.cols();
  if (p1 > p2) std::swap(p1, p2);
  // Segment s covers rows [begin[s], end[s]).
  const std::size_t begin[3] = {0, std::min(p1 + 1, len), std::min(p2 + 1, len)};
  const std::size_t end[3] = {std::min(p1 + 1, len), std::min(p2 + 1, len), len};
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  Tensor out = Tensor::matrix(1, 3 * ch);
  std::vector<std::size_t> arg(3 * ch, kNone);
  for (std::size_t s = 0; s < 3; ++s) {
    if (begin[s] >= end[s]) continue;
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best_t = begin[s];
      for (std::size_t t = begin[s] + 1; t < end[s]; ++t) {
        if (xv[t * ch + c] > xv[best_t * ch + c]) best_t = t;
      }
      out[s * ch + c] = xv[best_t * ch + c];
      arg[s * ch + c] = best_t;
    }
  }
  return push(OpKind::kPiecewiseMaxPool, std::move(out), {x.id},
              [arg = std::move(arg), ch](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gx = tp.grad_slot(in);
                for (std::size_t k = 0; k < arg.size(); ++k) {
                  if (arg[k] == kNone) continue;
                  gx[arg[k] * ch + k % ch] += g[k];
                }
              });
}

Var Tape::unary(OpKind op, Var x, const std::function<double(double)>& f,
                const std::function<double(double, double)>& df_from_xy) {
  const Tensor& xv = node(x).value;
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return push(op, std::move(out), {x.id}, [df_from_xy](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.val(in);
    const Tensor& yv = tp.val(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df_from_xy(xv[i], yv[i]);
  });
}

Var Tape::tanh(Var x) {
  return unary(OpKind::kTanh, x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Var Tape::relu(Var x) {
  return unary(OpKind::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var Tape::sigmoid(Var x) {
  return unary(OpKind::kSigmoid, x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Var Tape::log(Var x) {
  return unary(OpKind::kLog, x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Var Tape::softmax(Var x) {
  const Tensor& xv = node(x).value;
  const std::size_t n = xv.rows();
  const std::size_t m = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double mx = xv[r * m];
    for (std::size_t c = 1; c < m; ++c) mx = std::max(mx, xv[r * m + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += (out[r * m + c] = std::exp(xv[r * m + c] - mx));
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] /= z;
  }
  return push(OpKind::kSoftmax, std::move(out), {x.id}, [n, m](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& y = tp.val(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
      for (std::size_t c = 0; c < m; ++c) gx[r * m + c] += y[r * m + c] * (g[r * m + c] - dot);
    }
  });
}

Var Tape::log_softmax(Var x) {
  const Tensor& xv = node(x).value;
  const std::size_t n = xv.rows();
  const std::size_t m = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double mx = xv[r * m];
    for (std::size_t c = 1; c < m; ++c) mx = std::max(mx, xv[r * m + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += std::exp(xv[r * m + c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = xv[r * m + c] - lse;
  }
  return push(OpKind::kLogSoftmax, std::move(out), {x.id}, [n, m](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& y = tp.val(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t r = 0; r < n; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < m; ++c) gsum += g[r * m + c];
      for (std::size_t c = 0; c < m; ++c)
        gx[r * m + c] += g[r * m + c] - std::exp(y[r * m + c]) * gsum;
    }
  });
}

Var Tape::matmul(Var x, Var w) {
  const Tensor& xv = node(x).value;
  const Tensor& wv = node(w).value;
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  const std::size_t m = wv.cols();
  require(wv.rows() == d, "matmul: " + xv.shape_string() + " x " + wv.shape_string());
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double a = xv[i * d + k];
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += a * wv[k * m + j];
    }
  }
  return push(OpKind::kMatmul, std::move(out), {x.id, w.id}, [n, d, m](Tape& tp, std::size_t self) {
    const auto& ins = tp.nodes_[self].inputs;
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.val(ins[0]);
    const Tensor& wv = tp.val(ins[1]);
    if (tp.needs(ins[0])) {
      Tensor& gx = tp.grad_slot(ins[0]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * wv[k * m + j];
          gx[i * d + k] += acc;
        }
    }
    if (tp.needs(ins[1])) {
      Tensor& gw = tp.grad_slot(ins[1]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
          const double a = xv[i * d + k];
          if (a == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gw[k * m + j] += a * g[i * m + j];
        }
    }
  });
}

Var Tape::affine(Var x, Var w, Var b) {
  const Tensor bv = node(b).value;  // copied: matmul below may grow the node list
  const std::size_t m = node(w).value.cols();
  require(bv.size() == m, "affine: bias " + bv.shape_string() + " does not match output width");
  Var prod = matmul(x, w);
  Tensor out = nodes_[prod.id].value;
  const std::size_t n = out.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  return push(OpKind::kAffine, std::move(out), {prod.id, b.id}, [n, m](Tape& tp, std::size_t self) {
    const auto& ins = tp.nodes_[self].inputs;
    const Tensor& g = tp.out_grad(self);
    if (tp.needs(ins[0])) {
      Tensor& gp = tp.grad_slot(ins[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
    if (tp.needs(ins[1])) {
      Tensor& gb = tp.grad_slot(ins[1]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  require_same(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(OpKind::kAdd, std::move(out), {a.id, b.id}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    for (std::size_t in : tp.nodes_[self].inputs) {
      if (!tp.needs(in)) continue;
      Tensor& gi = tp.grad_slot(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  require_same(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return push(OpKind::kSub, std::move(out), {a.id, b.id}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const auto& ins = tp.nodes_[self].inputs;
    if (tp.needs(ins[0])) {
      Tensor& ga = tp.grad_slot(ins[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs(ins[1])) {
      Tensor& gb = tp.grad_slot(ins[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  require_same(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(OpKind::kMul, std::move(out), {a.id, b.id}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const auto& ins = tp.nodes_[self].inputs;
    if (tp.needs(ins[0])) {
      const Tensor& bv = tp.val(ins[1]);
      Tensor& ga = tp.grad_slot(ins[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.needs(ins[1])) {
      const Tensor& av = tp.val(ins[0]);
      Tensor& gb = tp.grad_slot(ins[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var Tape::scale(Var x, double a, double b) {
  Tensor out = node(x).value;
  for (double& v : out.data()) v = a * v + b;
  return push(OpKind::kScale, std::move(out), {x.id}, [a](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
  });
}

Var Tape::sum(Var x) {
  const Tensor& xv = node(x).value;
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return push(OpKind::kSum, Tensor::scalar(s), {x.id}, [](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const double g = tp.out_grad(self)[0];
    Tensor& gx = tp.grad_slot(in);
    for (double& v : gx.data()) v += g;
  });
}

Var Tape::mean(Var x) {
  const Tensor& xv = node(x).value;
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return push(OpKind::kMean, Tensor::scalar(s * inv), {x.id}, [inv](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const double g = tp.out_grad(self)[0] * inv;
    Tensor& gx = tp.grad_slot(in);
    for (double& v : gx.data()) v += g;
  });
}

Var Tape::mean_rows(Var x) {
  const Tensor& xv = node(x).value;
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  Tensor out = Tensor::matrix(1, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv[i * d + j];
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : out.data()) v *= inv;
  return push(OpKind::kMeanRows, std::move(out), {x.id}, [n, d, inv](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
  });
}

Var Tape::stack_rows(std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows: no rows");
  const std::size_t d = node(rows[0]).value.size();
  Tensor out = Tensor::matrix(rows.size(), d);
  std::vector<std::size_t> ins;
  ins.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& rv = node(rows[i]).value;
    require(rv.size() == d, "stack_rows: row " + std::to_string(i) + " has width " +
                                std::to_string(rv.size()) + ", expected " + std::to_string(d));
    std::copy(rv.data().begin(), rv.data().end(), out.data().begin() + i * d);
    ins.push_back(rows[i].id);
  }
  return push(OpKind::kStackRows, std::move(out), std::move(ins), [d](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const auto& ins = tp.nodes_[self].inputs;
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!tp.needs(ins[i])) continue;
      Tensor& gi = tp.grad_slot(ins[i]);
      for (std::size_t j = 0; j < d; ++j) gi[j] += g[i * d + j];
    }
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const std::size_t n = node(parts[0]).value.rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& pv = node(p).value;
    require(pv.rows() == n, "concat_cols: row count mismatch");
    widths.push_back(pv.cols());
    total += pv.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::vector<std::size_t> ins;
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = node(parts[k]).value;
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(pv.data().begin() + i * widths[k], widths[k], out.data().begin() + i * total + off);
    off += widths[k];
    ins.push_back(parts[k].id);
  }
  return push(OpKind::kConcatCols, std::move(out), std::move(ins),
              [widths = std::move(widths), n, total](Tape& tp, std::size_t self) {
                const Tensor& g = tp.out_grad(self);
                const auto& ins = tp.nodes_[self].inputs;
                std::size_t off = 0;
                for (std::size_t k = 0; k < ins.size(); ++k) {
                  if (tp.needs(ins[k])) {
                    Tensor& gk = tp.grad_slot(ins[k]);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < widths[k]; ++j)
                        gk[i * widths[k] + j] += g[i * total + off + j];
                  }
                  off += widths[k];
                }
              });
}

Var Tape::gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = node(x).value;
  const std::size_t d = xv.cols();
  require(!rows.empty(), "gather_rows: no rows");
  Tensor out = Tensor::matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < xv.rows(), "gather_rows: row index out of range");
    std::copy_n(xv.data().begin() + rows[i] * d, d, out.data().begin() + i * d);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return push(OpKind::kGatherRows, std::move(out), {x.id},
              [saved = std::move(saved), d](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gx = tp.grad_slot(in);
                for (std::size_t i = 0; i < saved.size(); ++i)
                  for (std::size_t j = 0; j < d; ++j) gx[saved[i] * d + j] += g[i * d + j];
              });
}

Var Tape::pick(Var x, std::span<const std::size_t> cols) {
  const Tensor& xv = node(x).value;
  const std::size_t n = xv.rows();
  const std::size_t m = xv.cols();
  require(cols.size() == n, "pick: need one column index per row");
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    require(cols[i] < m, "pick: column index out of range");
    out[i] = xv[i * m + cols[i]];
  }
  std::vector<std::size_t> saved(cols.begin(), cols.end());
  return push(OpKind::kPick, std::move(out), {x.id},
              [saved = std::move(saved), m](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gx = tp.grad_slot(in);
                for (std::size_t i = 0; i < saved.size(); ++i) gx[i * m + saved[i]] += g[i];
              });
}

Var Tape::grl(Var x, double lambda) {
  if (lambda < 0.0) throw ContractError("grl: lambda must be non-negative");
  return push(OpKind::kGrl, node(x).value, {x.id}, [lambda](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += -lambda * g[i];
  });
}

Var Tape::dropout(Var x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  if (rate == 0.0 || deterministic_mode()) return x;
  const Tensor& xv = node(x).value;
  Tensor mask(xv.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return push(OpKind::kDropout, std::move(out), {x.id},
              [mask = std::move(mask)](Tape& tp, std::size_t self) {
                const std::size_t in = tp.nodes_[self].inputs[0];
                if (!tp.needs(in)) return;
                const Tensor& g = tp.out_grad(self);
                Tensor& gx = tp.grad_slot(in);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
              });
}

Var Tape::clamp(Var x, double lo, double hi) {
  const Tensor& xv = node(x).value;
  Tensor out = xv;
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return push(OpKind::kClamp, std::move(out), {x.id}, [lo, hi](Tape& tp, std::size_t self) {
    const std::size_t in = tp.nodes_[self].inputs[0];
    if (!tp.needs(in)) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.val(in);
    Tensor& gx = tp.grad_slot(in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
    }
  });
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
}

OpKind Tape::kind(Var v) const { return node(v).op; }

void Tape::backward(Var out, const Tensor& seed) {
  if (nodes_.empty() || out.id >= nodes_.size()) {
    throw ContractError("backward called before forward: output is not on this tape");
  }
  require(seed.same_shape(nodes_[out.id].value),
          "backward: seed " + seed.shape_string() + " does not match output " +
              nodes_[out.id].value.shape_string());
  for (Node& n : nodes_) n.grad = Tensor{};
  nodes_[out.id].grad = seed;
  for (std::size_t id = out.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.back) {
      n.back(*this, id);
    } else if (n.param_grad) {
      Tensor& pg = *n.param_grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  }
}

void Tape::backward(Var out) {
  if (nodes_.empty() || out.id >= nodes_.size()) {
    throw ContractError("backward called before forward: output is not on this tape");
  }
  if (nodes_[out.id].value.size() != 1) throw ShapeError("backward without seed needs a scalar output");
  backward(out, Tensor(nodes_[out.id].value.shape(), 1.0));
}

double grad_check(const std::function<Var(Tape&, ParamStore&)>& build, ParamStore& params,
                  double epsilon, const std::vector<std::string>& names) {
  const std::vector<std::string> checked = names.empty() ? params.names() : names;
  params.zero_grad();
  {
    Tape tape;
    Var out = build(tape, params);
    if (tape.value(out).size() != 1) throw ShapeError("grad_check requires a scalar output");
    tape.backward(out);
  }
  auto evaluate = [&]() {
    Tape tape;
    return tape.value(build(tape, params)).item();
  };
  double worst = 0.0;
  for (const auto& name : checked) {
    Tensor& value = params.value(name);
    const Tensor analytic = params.grad(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + epsilon;
      const double up = evaluate();
      value[i] = saved - epsilon;
      const double down = evaluate();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace wran
