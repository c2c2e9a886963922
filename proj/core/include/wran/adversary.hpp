#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wran/param_store.hpp"
#include "wran/random.hpp"
#include "wran/tape.hpp"

namespace wran {

// Discriminator outputs are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-7;

// Binary relation discriminator: affine -> tanh -> affine -> sigmoid.
// Source features are labelled 1, target features 0.
class Discriminator {
 public:
  // hidden_width == 0 selects hidden width = input width.
  Discriminator(std::size_t input_width, std::string prefix, std::size_t hidden_width = 0);

  std::size_t input_width() const { return input_width_; }
  std::size_t hidden_width() const { return hidden_width_; }
  const std::string& prefix() const { return prefix_; }

  void init(ParamStore& params, Rng& rng) const;
  std::vector<std::string> param_names() const;

  Var logit(Tape& tape, ParamStore& params, Var features, bool trainable = true) const;
  // n x 1 probabilities p(source | f).
  Var probability(Tape& tape, ParamStore& params, Var features, bool trainable = true) const;

  double discriminate(ParamStore& params, std::span<const double> feature) const;
  std::vector<double> discriminate_all(ParamStore& params, const Tensor& features) const;

 private:
  std::size_t input_width_;
  std::size_t hidden_width_;
  std::string prefix_;
};

// Source and target features for one adversarial evaluation. When present,
// source_weights align 1:1 with the rows of source_features.
struct AdvBatch {
  Tensor source_features;
  Tensor target_features;
  std::optional<std::vector<double>> source_weights;
};

// mean_i w_i log D(f_i^s) + mean_j log(1 - D(f_j^t)) from discriminator
// outputs already on the tape (n x 1 and m x 1). Weights default to 1.
Var adv_loss(Tape& tape, Var source_prob, Var target_prob,
             std::span<const double> source_weights = {});

// Convenience form that builds the discriminator graph for a batch.
Var adv_loss(Tape& tape, ParamStore& params, const Discriminator& d, Var source_features,
             Var target_features, std::span<const double> source_weights = {},
             bool trainable = true);

double adv_loss(ParamStore& params, const Discriminator& d, const AdvBatch& batch);

// Forward identity, backward scaled by -lambda.
inline Var grl_wrap(Tape& tape, Var x, double lambda) { return tape.grl(x, lambda); }

}  // namespace wran
