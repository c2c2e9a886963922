#include "wran/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "wran/error.hpp"
#include "wran/format.hpp"

namespace wran {

double schedule_phi(double p, double u, double a) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("schedule_phi: progress must lie in [0, 1]");
  return 2.0 * u / (1.0 + std::exp(-a * p)) - u;
}

Var mask_na_loss(Tape& tape, Var per_instance, std::span<const std::size_t> labels) {
  const Tensor& v = tape.value(per_instance);
  if (v.rows() != labels.size() || v.cols() != 1) throw ShapeError("mask_na_loss expects an n x 1 loss column");
  Tensor mask = Tensor::matrix(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == kNaRelation ? 0.0 : 1.0;
  return tape.mul(per_instance, tape.constant(std::move(mask)));
}

Var masked_mean(Tape& tape, Var per_instance, std::span<const std::size_t> labels) {
  const auto kept = static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::size_t y) { return y != kNaRelation; }));
  if (kept == 0) return tape.constant(Tensor::scalar(0.0));
  return tape.scale(tape.sum(mask_na_loss(tape, per_instance, labels)), 1.0 / static_cast<double>(kept));
}

void TrainConfig::validate() const {
  for (double r : {learning_rate, target_lr, gate_lr})
    if (!(r > 0.0)) throw ContractError("learning rates must be positive");
  if (!(u > 0.0)) throw ContractError("schedule bound u must be positive");
  if (batch_size == 0) throw ContractError("batch_size must be at least 1");
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw ContractError("zeta must lie in [0, 1]");
  if (!(sm_coeff >= 0.0)) throw ContractError("sm_coeff must be nonnegative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("dropout must lie in [0, 1)");
}

KeyValues TrainConfig::to_keyvalues() const {
  KeyValues kv;
  kv.set("learning_rate", format_real(learning_rate));
  kv.set("target_lr", format_real(target_lr));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("epochs_source", std::to_string(epochs_source));
  kv.set("epochs_weights", std::to_string(epochs_weights));
  kv.set("epochs_adapt", std::to_string(epochs_adapt));
  kv.set("u", format_real(u));
  kv.set("schedule_alpha", format_real(schedule_alpha));
  kv.set("beta1", format_real(beta1));
  kv.set("beta2", format_real(beta2));
  kv.set("adam_eps", format_real(adam_eps));
  kv.set("seed", std::to_string(seed));
  kv.set("sm_coeff", format_real(sm_coeff));
  kv.set("zeta", format_real(zeta));
  kv.set("dropout", format_real(dropout));
  kv.set("gate_steps", std::to_string(gate_steps));
  kv.set("gate_lr", format_real(gate_lr));
  kv.set("per_class_alpha", per_class_alpha ? "1" : "0");
  kv.set("fine_tune_epochs", std::to_string(fine_tune_epochs));
  return kv;
}

TrainConfig TrainConfig::from_keyvalues(const KeyValues& kv, const std::string& p) {
  TrainConfig c;
  c.learning_rate = kv.get_real(p + "learning_rate", c.learning_rate);
  c.target_lr = kv.get_real(p + "target_lr", c.target_lr);
  c.batch_size = kv.get_size(p + "batch_size", c.batch_size);
  c.epochs_source = kv.get_size(p + "epochs_source", c.epochs_source);
  c.epochs_weights = kv.get_size(p + "epochs_weights", c.epochs_weights);
  c.epochs_adapt = kv.get_size(p + "epochs_adapt", c.epochs_adapt);
  c.u = kv.get_real(p + "u", c.u);
  c.schedule_alpha = kv.get_real(p + "schedule_alpha", c.schedule_alpha);
  c.beta1 = kv.get_real(p + "beta1", c.beta1);
  c.beta2 = kv.get_real(p + "beta2", c.beta2);
  c.adam_eps = kv.get_real(p + "adam_eps", c.adam_eps);
  c.seed = kv.get_u64(p + "seed", c.seed);
  c.sm_coeff = kv.get_real(p + "sm_coeff", c.sm_coeff);
  c.zeta = kv.get_real(p + "zeta", c.zeta);
  c.dropout = kv.get_real(p + "dropout", c.dropout);
  c.gate_steps = kv.get_size(p + "gate_steps", c.gate_steps);
  c.gate_lr = kv.get_real(p + "gate_lr", c.gate_lr);
  c.per_class_alpha = kv.get_bool(p + "per_class_alpha", c.per_class_alpha);
  c.fine_tune_epochs = kv.get_size(p + "fine_tune_epochs", c.fine_tune_epochs);
  return c;
}

std::string WeightingOptions::name() const {
  if (!relation && !instance) return "wo_both";
  if (!relation) return "wo_relation";
  if (!instance) return "wo_instance";
  if (!gate) return "wo_gate";
  return "full";
}

std::vector<double> effective_weights(const WeightTable& table, const WeightingOptions& opt,
                                      std::span<const std::size_t> source_labels) {
  if (!opt.relation && !opt.instance) return std::vector<double>(source_labels.size(), 1.0);
  if (!table.complete()) throw ContractError("weight table is incomplete");
  if (table.instance_weights().size() != source_labels.size())
    throw ShapeError("weight table covers " + std::to_string(table.instance_weights().size()) +
                     " source instances, data has " + std::to_string(source_labels.size()));
  if (opt.relation && opt.instance && opt.gate) return table.total_weights();
  double alpha = opt.fixed_alpha;
  if (!opt.relation) alpha = 1.0;
  else if (!opt.instance) alpha = 0.0;
  return total_weights(alpha, table.instance_weights(), table.relation_weights(), source_labels);
}

void Adam::step(ParamStore& params, std::span<const std::string> names) {
  for (const auto& name : names) {
    auto& e = params.entry(name);
    auto& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m = Tensor(e.value.shape(), 0.0);
      mo.v = Tensor(e.value.shape(), 0.0);
    }
    ++mo.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(mo.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(mo.t));
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      e.value[i] -= lr_ * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + eps_);
    }
  }
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kNone: return "none";
    case Stage::kPretrained: return "pretrained";
    case Stage::kRelationWeights: return "relation_weights";
    case Stage::kInstanceWeights: return "instance_weights";
    case Stage::kAdapted: return "adapted";
    case Stage::kDone: return "done";
  }
  return "?";
}

namespace {

EncoderConfig with_dropout(EncoderConfig enc, double dropout) {
  enc.dropout = dropout;
  return enc;
}

template <typename Instance>
std::vector<Instance> gather(std::span<const Instance> data, std::span<const std::size_t> idx) {
  std::vector<Instance> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
  Tensor out = Tensor::matrix(idx.size(), t.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(t.row_view(idx[r]).begin(), t.cols(), out.data().begin() + r * t.cols());
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& probs) { return pseudo_label(probs); }

}  // namespace

template <typename Instance>
Trainer<Instance>::Trainer(EncoderConfig encoder, std::size_t num_classes, TrainConfig cfg)
    : enc_(with_dropout(encoder, cfg.dropout)),
      num_classes_(num_classes),
      cfg_(cfg),
      mask_na_(encoder.arch != Architecture::kTriple),
      fs_(enc_, kSourceEncoder),
      ft_(enc_, kTargetEncoder),
      c_(enc_.feature_width(), num_classes, kClassifier),
      ct_(enc_.feature_width(), num_classes, kTargetHead),
      da_(enc_.feature_width(), kAuxDiscriminator),
      dr_(enc_.feature_width(), kRelDiscriminator) {
  cfg_.validate();
  Rng root(cfg_.seed);
  Rng a = root.fork(1);
  Rng b = root.fork(2);
  fs_.init(state_.params, a);
  c_.init(state_.params, b);
}

template <typename Instance>
void Trainer<Instance>::require(Stage s, const char* op) const {
  if (state_.stage != s)
    throw ContractError(std::string(op) + " requires stage '" + stage_name(s) + "', trainer is at '" +
                        stage_name(state_.stage) + "'");
}

template <typename Instance>
std::vector<std::size_t> Trainer<Instance>::shuffled(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

template <typename Instance>
Tensor Trainer<Instance>::source_features(std::span<const Instance> data) {
  return fs_.features(state_.params, data);
}

template <typename Instance>
double Trainer<Instance>::stage1_pretrain_source(std::span<const Instance> source) {
  require(Stage::kNone, "stage1_pretrain_source");
  if (source.empty()) throw ContractError("stage1_pretrain_source: empty source data");
  const auto labels = labels_of(source);
  std::vector<std::string> names = fs_.param_names();
  for (auto& n : c_.param_names()) names.push_back(n);
  Adam adam(cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  Rng rng = Rng(cfg_.seed).fork(10);
  Rng drop = rng.fork(1);
  auto& params = state_.params;
  for (std::size_t epoch = 0; epoch < cfg_.epochs_source; ++epoch) {
    const auto order = shuffled(source.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg_.batch_size, order.size() - start));
      const auto batch = gather(source, idx);
      std::vector<std::size_t> y;
      for (std::size_t i : idx) y.push_back(labels[i]);
      Tape tape;
      Var feats = fs_.encode_batch(tape, params, std::span<const Instance>(batch),
                                   {.trainable = true, .dropout_rng = &drop});
      Var loss = source_loss(tape, params, c_, feats, y, mask_na_);
      params.zero_grad();
      tape.backward(loss);
      adam.step(params, names);
    }
  }
  const auto pred = argmax_rows(predict_source_only(source));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  state_.source_accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  state_.stage = Stage::kPretrained;
  return state_.source_accuracy;
}

template <typename Instance>
const std::vector<double>& Trainer<Instance>::stage2_relation_weights(std::span<const Instance> target) {
  require(Stage::kPretrained, "stage2_relation_weights");
  if (target.empty()) throw ContractError("stage2_relation_weights: empty target data");
  state_.weights.set_relation_weights(relation_weights(predict_source_only(target)));
  state_.stage = Stage::kRelationWeights;
  return state_.weights.relation_weights();
}

template <typename Instance>
void Trainer<Instance>::adversarial_loop(std::span<const Instance> source, std::span<const Instance> target,
                                         const Discriminator& d, std::span<const double> weights,
                                         std::size_t epochs, bool record, bool semantic,
                                         std::uint64_t salt) {
  auto& params = state_.params;
  const std::vector<std::string> enc_names = ft_.param_names();
  const std::vector<std::string> disc_names = d.param_names();
  Adam enc_opt(cfg_.target_lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  Adam disc_opt(cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  Rng rng = Rng(cfg_.seed).fork(salt);
  Rng drop = rng.fork(1);

  std::vector<std::size_t> src_labels, pseudo;
  if (semantic) {
    src_labels = labels_of(source);
    pseudo = pseudo_label(predict_source_only(target));
    state_.bank = CentroidBank(num_classes_, enc_.feature_width(), cfg_.zeta);
  }

  const std::size_t b = cfg_.batch_size;
  const std::size_t per_epoch = (target.size() + b - 1) / b;
  const std::size_t total = epochs * per_epoch;
  std::size_t step = 0;
  std::vector<std::size_t> src_order = shuffled(source.size(), rng);
  std::size_t src_pos = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled(target.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::span<const std::size_t> tidx(order.data() + start, std::min(b, order.size() - start));
      std::vector<std::size_t> sidx;
      while (sidx.size() < std::min(b, source.size())) {
        if (src_pos == src_order.size()) {
          src_order = shuffled(source.size(), rng);
          src_pos = 0;
        }
        sidx.push_back(src_order[src_pos++]);
      }
      const double p = static_cast<double>(step) / static_cast<double>(total);
      const double lambda = schedule_phi(std::min(p, 1.0), cfg_.u, cfg_.schedule_alpha);
      if (record) {
        state_.lambdas.push_back(lambda);
        state_.progress = p;
        state_.step = step + 1;
      }
      std::vector<double> w;
      if (!weights.empty())
        for (std::size_t i : sidx) w.push_back(weights[i]);

      const auto tbatch = gather(target, tidx);
      Tape tape;
      Var tf = ft_.encode_batch(tape, params, std::span<const Instance>(tbatch),
                                {.trainable = true, .dropout_rng = &drop});
      Var sf = tape.constant(gather_rows(source_cache_, sidx));
      Var loss = adv_loss(tape, params, d, sf, grl_wrap(tape, tf, lambda), w);
      Var objective = tape.scale(loss, -1.0);
      std::optional<CentroidBank> next;
      if (semantic) {
        std::vector<std::size_t> sy, ty;
        for (std::size_t i : sidx) sy.push_back(src_labels[i]);
        for (std::size_t i : tidx) ty.push_back(pseudo[i]);
        const Tensor srows = gather_rows(source_cache_, sidx);
        auto sm = sm_loss_step(tape, state_.bank, batch_centroids(srows, sy, num_classes_), tf, ty);
        objective = tape.add(objective, tape.scale(sm.loss, cfg_.sm_coeff));
        next = std::move(sm.updated);
      }
      params.zero_grad();
      tape.backward(objective);
      enc_opt.step(params, enc_names);
      disc_opt.step(params, disc_names);
      if (next) state_.bank = std::move(*next);
      ++step;
    }
    if (record && on_epoch_) on_epoch_(epoch);
  }
}

template <typename Instance>
const WeightTable& Trainer<Instance>::stage3_instance_weights(std::span<const Instance> source,
                                                              std::span<const Instance> target) {
  require(Stage::kRelationWeights, "stage3_instance_weights");
  if (source.empty() || target.empty()) throw ContractError("stage3_instance_weights: empty data");
  auto& params = state_.params;
  params.copy_prefix(kSourceEncoder, kTargetEncoder);
  if (!params.contains(da_.param_names().front())) {
    Rng rng = Rng(cfg_.seed).fork(3);
    da_.init(params, rng);
  }
  source_cache_ = source_features(source);
  adversarial_loop(source, target, da_, {}, cfg_.epochs_weights, false, false, 30);

  const auto inst = instance_weights(da_, params, source_cache_);
  const auto labels = labels_of(source);
  const auto& rel = state_.weights.relation_weights();
  if (rel.size() != num_classes_) throw ShapeError("relation weights do not match the class count");

  // Gate: alpha = sigmoid(W_r . mean F_t(x_t)), W_r fitted by gradient descent
  // on the weighted source term of the frozen D_a objective,
  // J(alpha) = sum_i raw_i log D_a(f_i) / sum_i raw_i.
  const Tensor tfeat = ft_.features(params, target);
  Tensor mean = Tensor::matrix(1, tfeat.cols());
  for (std::size_t r = 0; r < tfeat.rows(); ++r)
    for (std::size_t c = 0; c < tfeat.cols(); ++c) mean[c] += tfeat.at(r, c) / static_cast<double>(tfeat.rows());
  const std::string gate = std::string(kGate) + "w";
  if (!params.contains(gate)) params.add_zeros(gate, {1, tfeat.cols()});
  const auto d_src = da_.discriminate_all(params, source_cache_);
  double a_sum = 0.0, b_sum = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double l = std::log(d_src[i]);
    a_sum += inst[i] * l;
    b_sum += rel[labels[i]] * l;
    sa += inst[i];
    sb += rel[labels[i]];
  }
  Adam gate_opt(cfg_.gate_lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  const std::vector<std::string> gate_names = {gate};
  for (std::size_t s = 0; s < cfg_.gate_steps; ++s) {
    const double alpha = gate_alpha(params.value(gate).data(), tfeat);
    const double num = alpha * a_sum + (1.0 - alpha) * b_sum;
    const double den = alpha * sa + (1.0 - alpha) * sb;
    if (den <= 0.0) break;
    const double dj = ((a_sum - b_sum) * den - num * (sa - sb)) / (den * den);
    Tensor& g = params.grad(gate);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = dj * alpha * (1.0 - alpha) * mean[c];
    gate_opt.step(params, gate_names);
  }
  const double alpha = gate_alpha(params.value(gate).data(), tfeat);

  std::vector<double> total;
  if (cfg_.per_class_alpha) {
    const auto pseudo = pseudo_label(predict_source_only(target));
    total = total_weights(gate_alpha_per_class(params.value(gate).data(), tfeat, pseudo, num_classes_),
                          inst, rel, labels);
  } else {
    total = total_weights(alpha, inst, rel, labels);
  }
  state_.weights.set_instance_weights(inst);
  state_.weights.set_alpha(alpha);
  state_.weights.set_total_weights(std::move(total));
  state_.weights.freeze();
  state_.stage = Stage::kInstanceWeights;
  return state_.weights;
}

template <typename Instance>
void Trainer<Instance>::stage4_adversarial_adapt(std::span<const Instance> source,
                                                 std::span<const Instance> target,
                                                 const WeightingOptions& opt) {
  require(Stage::kInstanceWeights, "stage4_adversarial_adapt");
  if (source.empty() || target.empty()) throw ContractError("stage4_adversarial_adapt: empty data");
  auto& params = state_.params;
  const auto labels = labels_of(source);
  const auto w = effective_weights(state_.weights, opt, labels);
  params.copy_prefix(kSourceEncoder, kTargetEncoder);
  for (const auto& n : dr_.param_names())
    if (params.contains(n)) throw ContractError("relation discriminator already initialized");
  Rng rng = Rng(cfg_.seed).fork(4);
  dr_.init(params, rng);
  if (source_cache_.empty() || source_cache_.rows() != source.size()) source_cache_ = source_features(source);
  state_.lambdas.clear();
  adversarial_loop(source, target, dr_, w, cfg_.epochs_adapt, true, cfg_.sm_coeff > 0.0, 40);
  state_.stage = Stage::kAdapted;
}

template <typename Instance>
void Trainer<Instance>::fine_tune(std::span<const Instance> labeled_target) {
  require(Stage::kAdapted, "fine_tune");
  if (labeled_target.empty()) throw ContractError("fine_tune: empty labeled target data");
  auto& params = state_.params;
  Rng rng = Rng(cfg_.seed).fork(5);
  if (!params.contains(ct_.param_names().front())) ct_.init(params, rng);
  std::vector<std::string> names = ft_.param_names();
  for (auto& n : ct_.param_names()) names.push_back(n);
  const auto labels = labels_of(labeled_target);
  Adam adam(cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  Rng drop = rng.fork(1);
  for (std::size_t epoch = 0; epoch < cfg_.fine_tune_epochs; ++epoch) {
    const auto order = shuffled(labeled_target.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg_.batch_size, order.size() - start));
      const auto batch = gather(labeled_target, idx);
      std::vector<std::size_t> y;
      for (std::size_t i : idx) y.push_back(labels[i]);
      Tape tape;
      Var feats = ft_.encode_batch(tape, params, std::span<const Instance>(batch),
                                   {.trainable = true, .dropout_rng = &drop});
      Var loss = source_loss(tape, params, ct_, feats, y, mask_na_);
      params.zero_grad();
      tape.backward(loss);
      adam.step(params, names);
    }
  }
  state_.has_target_head = true;
  state_.stage = Stage::kDone;
}

template <typename Instance>
void Trainer<Instance>::finish() {
  require(Stage::kAdapted, "finish");
  state_.stage = Stage::kDone;
}

template <typename Instance>
Tensor Trainer<Instance>::predict_source_only(std::span<const Instance> data) {
  return c_.probabilities(state_.params, source_features(data));
}

template <typename Instance>
Tensor Trainer<Instance>::predict(std::span<const Instance> data) {
  if (state_.stage < Stage::kAdapted) throw ContractError("predict requires an adapted target encoder");
  const Tensor f = ft_.features(state_.params, data);
  return (state_.has_target_head ? ct_ : c_).probabilities(state_.params, f);
}

template <typename Instance>
void Trainer<Instance>::restore(TrainState state) {
  auto need = [&](const std::vector<std::string>& names) {
    for (const auto& n : names)
      if (!state.params.contains(n)) throw ContractError("checkpoint lacks parameter " + n);
  };
  if (state.stage >= Stage::kPretrained) {
    need(fs_.param_names());
    need(c_.param_names());
  }
  if (state.stage >= Stage::kInstanceWeights) {
    need(da_.param_names());
    if (!state.weights.frozen()) throw ContractError("restored weight table is not frozen");
  }
  if (state.stage >= Stage::kAdapted) {
    need(ft_.param_names());
    need(dr_.param_names());
  }
  if (state.has_target_head) need(ct_.param_names());
  state_ = std::move(state);
  source_cache_ = Tensor();
}

template class Trainer<SentenceInstance>;
template class Trainer<TripleInstance>;

namespace {

constexpr char kMagic[8] = {'W', 'R', 'A', 'N', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_params(std::ostream& out, const ParamStore& params) {
  out.write(kMagic, 8);
  put_u64(out, params.size());
  for (const auto& [name, e] : params.entries()) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, e.value.rank());
    for (std::size_t d : e.value.shape()) put_u64(out, d);
    for (double v : e.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

ParamStore read_params(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a checkpoint file");
  ParamStore out;
  const auto count = get_u64(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get_u64(in);
    if (len > (1u << 16)) throw Error("checkpoint record name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw Error("checkpoint truncated");
    const auto rank = get_u64(in);
    if (rank == 0 || rank > 8) throw Error("checkpoint record has invalid rank");
    std::vector<std::size_t> shape;
    std::size_t n = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(get_u64(in));
      n *= shape.back();
    }
    std::vector<double> data(n);
    for (double& v : data) v = std::bit_cast<double>(get_u64(in));
    out.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void save_params(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_params(out, params);
}

ParamStore load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_params(in);
}

void Manifest::set_real(const std::string& key, double value) { kv_.set(key, format_real(value)); }

void Manifest::merge(const KeyValues& kv, const std::string& prefix) {
  for (const auto& [k, v] : kv.entries()) kv_.set(prefix + k, v);
}

void Manifest::stage_done(const std::string& stage) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  kv_.set("stage." + std::to_string(stages_++) + "." + stage, std::to_string(secs));
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  kv_.write(out);
}

}  // namespace wran
