#pragma once

#include <span>
#include <vector>

#include "wran/tape.hpp"
#include "wran/tensor.hpp"

namespace wran {

// Per-class exponential-moving-average feature centroids for both domains.
struct CentroidBank {
  Tensor source;  // K x width
  Tensor target;  // K x width
  double zeta = 0.7;

  CentroidBank() = default;
  CentroidBank(std::size_t num_classes, std::size_t width, double zeta);
  std::size_t num_classes() const { return source.rows(); }
  std::size_t width() const { return source.cols(); }
};

struct BatchCentroids {
  Tensor centroids;            // K x width; rows of absent classes are zero
  std::vector<bool> present;   // class k has at least one row in the batch
};

BatchCentroids batch_centroids(const Tensor& features, std::span<const std::size_t> labels,
                               std::size_t num_classes);

// bank <- zeta * bank + (1 - zeta) * batch for present classes.
void ema_update(Tensor& bank, const BatchCentroids& batch, double zeta);
void ema_update(CentroidBank& bank, const BatchCentroids& source, const BatchCentroids& target);

// argmax per row, ties broken towards the lowest class index.
std::vector<std::size_t> pseudo_label(const Tensor& probs);

// sum_k || C_s^k - C_t^k ||^2.
double sm_loss(const CentroidBank& bank);

// One moving-semantic-transfer step with gradients flowing into the target
// features. Source centroids are constants. Returns the loss node and the bank
// after the moving-average update (values only).
struct SemanticStep {
  Var loss;
  CentroidBank updated;
};
SemanticStep sm_loss_step(Tape& tape, const CentroidBank& bank, const BatchCentroids& source,
                          Var target_features, std::span<const std::size_t> target_labels);

}  // namespace wran
