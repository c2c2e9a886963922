#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wran/param_store.hpp"
#include "wran/random.hpp"
#include "wran/tensor.hpp"

namespace wran {

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  std::size_t id = 0;
};

enum class OpKind {
  kParam,
  kConstant,
  kEmbedding,
  kConv1d,
  kMaxPool,
  kPiecewiseMaxPool,
  kTanh,
  kRelu,
  kSigmoid,
  kLog,
  kSoftmax,
  kLogSoftmax,
  kAffine,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSum,
  kMean,
  kMeanRows,
  kStackRows,
  kConcatCols,
  kGatherRows,
  kPick,
  kGrl,
  kDropout,
  kClamp,
};

const char* op_name(OpKind op);

// Dropout is disabled everywhere while deterministic mode is on.
void set_deterministic_mode(bool on);
bool deterministic_mode();

// Define-by-run reverse-mode tape. Each operation evaluates eagerly and
// records what backward() needs. Node ids are assigned in creation order, so
// the node list is already topologically sorted.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to a ParamStore entry. When trainable, backward() accumulates
  // into the entry's gradient slot; otherwise the value is a constant.
  Var param(ParamStore& store, const std::string& name, bool trainable = true);
  // Leaf without a parameter slot. Its gradient is still retrievable through
  // grad() when `requires_grad` is set.
  Var input(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return input(std::move(value), false); }

  // table: V x d, ids -> n x d.
  Var embedding(Var table, std::span<const std::size_t> ids);
  // Same-padding 1-D convolution. x: L x Din, w: (k*Din) x C, b: 1 x C.
  Var conv1d(Var x, Var w, Var b, std::size_t kernel);
  // Column-wise max over rows: L x C -> 1 x C.
  Var max_pool(Var x);
  // Max over rows [0, p1], (p1, p2], (p2, L) -> 1 x 3C. Empty segments give 0.
  Var piecewise_max_pool(Var x, std::size_t p1, std::size_t p2);
  Var tanh(Var x);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var log(Var x);
  Var softmax(Var x);       // row-wise
  Var log_softmax(Var x);   // row-wise
  // x: n x d, w: d x m, b: 1 x m.
  Var affine(Var x, Var w, Var b);
  Var matmul(Var x, Var w);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // a * x + b elementwise.
  Var scale(Var x, double a, double b = 0.0);
  Var sum(Var x);
  Var mean(Var x);
  Var mean_rows(Var x);
  Var stack_rows(std::span<const Var> rows);
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var x, std::span<const std::size_t> rows);
  // out[i] = x[i, cols[i]], n x 1.
  Var pick(Var x, std::span<const std::size_t> cols);
  // Identity forward; backward multiplies the upstream gradient by -lambda.
  Var grl(Var x, double lambda);
  // Inverted dropout. Identity when rate == 0 or in deterministic mode.
  Var dropout(Var x, double rate, Rng& rng);
  // Clamp to [lo, hi]; gradient passes only where the input was inside.
  Var clamp(Var x, double lo, double hi);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() seed w.r.t. this node. Zeros when the
  // node did not receive any gradient.
  Tensor grad(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Propagates `seed` (shape of out) back through the tape and accumulates
  // into trainable parameter slots.
  void backward(Var out, const Tensor& seed);
  void backward(Var out);  // scalar output, seed 1

 private:
  using BackFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    OpKind op;
    Tensor value;
    Tensor grad;  // lazily allocated
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    BackFn back;
    Tensor* param_grad = nullptr;
  };

  Var push(OpKind op, Tensor value, std::vector<std::size_t> inputs, BackFn back);
  const Node& node(Var v) const;
  bool needs(std::size_t id) const { return nodes_[id].needs_grad; }
  Tensor& grad_slot(std::size_t id);
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& val(std::size_t id) const { return nodes_[id].value; }

  Var unary(OpKind op, Var x, const std::function<double(double)>& f,
            const std::function<double(double, double)>& df_from_xy);

  std::vector<Node> nodes_;
};

// Verifies analytic gradients of a scalar graph against central differences.
// `build` must construct the scalar loss on the given tape from `params`; it
// is invoked once for the analytic pass and twice per parameter entry.
// Returns max |a - n| / max(1e-12, |a| + |n|) over every trainable entry
// listed in `names` (all entries when empty).
double grad_check(const std::function<Var(Tape&, ParamStore&)>& build, ParamStore& params,
                  double epsilon = 1e-5, const std::vector<std::string>& names = {});

}  // namespace wran
