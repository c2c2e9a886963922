#include "wran/adversary.hpp"

#include <cmath>

#include "wran/error.hpp"

namespace wran {

Discriminator::Discriminator(std::size_t input_width, std::string prefix, std::size_t hidden_width)
    : input_width_(input_width),
      hidden_width_(hidden_width == 0 ? input_width : hidden_width),
      prefix_(std::move(prefix)) {
  if (input_width_ == 0) throw ContractError("discriminator input width must be positive");
}

void Discriminator::init(ParamStore& params, Rng& rng) const {
  const double l1 = std::sqrt(6.0 / static_cast<double>(input_width_ + hidden_width_));
  const double l2 = std::sqrt(6.0 / static_cast<double>(hidden_width_ + 1));
  params.add_uniform(prefix_ + "w1", {input_width_, hidden_width_}, l1, rng);
  params.add_zeros(prefix_ + "b1", {1, hidden_width_});
  params.add_uniform(prefix_ + "w2", {hidden_width_, 1}, l2, rng);
  params.add_zeros(prefix_ + "b2", {1, 1});
}

std::vector<std::string> Discriminator::param_names() const {
  return {prefix_ + "w1", prefix_ + "b1", prefix_ + "w2", prefix_ + "b2"};
}

Var Discriminator::logit(Tape& tape, ParamStore& params, Var features, bool trainable) const {
  if (tape.value(features).cols() != input_width_) {
    throw ShapeError("discriminator expects width " + std::to_string(input_width_) + ", got " +
                     std::to_string(tape.value(features).cols()));
  }
  Var h = tape.tanh(tape.affine(features, tape.param(params, prefix_ + "w1", trainable),
                                tape.param(params, prefix_ + "b1", trainable)));
  return tape.affine(h, tape.param(params, prefix_ + "w2", trainable),
                     tape.param(params, prefix_ + "b2", trainable));
}

Var Discriminator::probability(Tape& tape, ParamStore& params, Var features, bool trainable) const {
  return tape.clamp(tape.sigmoid(logit(tape, params, features, trainable)), kProbClamp,
                    1.0 - kProbClamp);
}

double Discriminator::discriminate(ParamStore& params, std::span<const double> feature) const {
  Tape tape;
  Var f = tape.constant(Tensor::row({feature.begin(), feature.end()}));
  return tape.value(probability(tape, params, f, false)).item();
}

std::vector<double> Discriminator::discriminate_all(ParamStore& params, const Tensor& features) const {
  Tape tape;
  const Tensor& p = tape.value(probability(tape, params, tape.constant(features), false));
  return {p.data().begin(), p.data().end()};
}

Var adv_loss(Tape& tape, Var source_prob, Var target_prob, std::span<const double> source_weights) {
  const std::size_t ns = tape.value(source_prob).rows();
  if (ns == 0 || tape.value(target_prob).rows() == 0) {
    throw ContractError("adv_loss needs non-empty source and target batches");
  }
  Var log_src = tape.log(source_prob);
  if (!source_weights.empty()) {
    if (source_weights.size() != ns) throw ShapeError("adv_loss: one weight per source row required");
    for (double w : source_weights) {
      if (!(w >= 0.0)) throw ContractError("adv_loss: source weights must be non-negative");
    }
    Tensor wt = Tensor::matrix(ns, 1);
    std::copy(source_weights.begin(), source_weights.end(), wt.data().begin());
    log_src = tape.mul(log_src, tape.constant(std::move(wt)));
  }
  Var log_tgt = tape.log(tape.scale(target_prob, -1.0, 1.0));
  return tape.add(tape.mean(log_src), tape.mean(log_tgt));
}

Var adv_loss(Tape& tape, ParamStore& params, const Discriminator& d, Var source_features,
             Var target_features, std::span<const double> source_weights, bool trainable) {
  return adv_loss(tape, d.probability(tape, params, source_features, trainable),
                  d.probability(tape, params, target_features, trainable), source_weights);
}

double adv_loss(ParamStore& params, const Discriminator& d, const AdvBatch& batch) {
  if (batch.source_features.empty() || batch.target_features.empty()) {
    throw ContractError("adv_loss needs non-empty source and target batches");
  }
  Tape tape;
  std::span<const double> w;
  if (batch.source_weights) w = *batch.source_weights;
  return tape
      .value(adv_loss(tape, params, d, tape.constant(batch.source_features),
                      tape.constant(batch.target_features), w, false))
      .item();
}

}  // namespace wran
