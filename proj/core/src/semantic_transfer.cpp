#include "wran/semantic_transfer.hpp"

#include "wran/error.hpp"

namespace wran {

CentroidBank::CentroidBank(std::size_t num_classes, std::size_t width, double z)
    : source(Tensor::matrix(num_classes, width)), target(Tensor::matrix(num_classes, width)), zeta(z) {
  if (zeta < 0.0 || zeta > 1.0) throw ContractError("zeta must be in [0, 1]");
}

BatchCentroids batch_centroids(const Tensor& features, std::span<const std::size_t> labels,
                               std::size_t num_classes) {
  if (labels.size() != features.rows()) throw ShapeError("one label per feature row required");
  const std::size_t width = features.cols();
  BatchCentroids out{Tensor::matrix(num_classes, width), std::vector<bool>(num_classes, false)};
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw ShapeError("label outside [0, K)");
    ++counts[labels[i]];
    for (std::size_t c = 0; c < width; ++c) out.centroids.at(labels[i], c) += features.at(i, c);
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) continue;
    out.present[k] = true;
    for (std::size_t c = 0; c < width; ++c) out.centroids.at(k, c) /= static_cast<double>(counts[k]);
  }
  return out;
}

void ema_update(Tensor& bank, const BatchCentroids& batch, double zeta) {
  if (!bank.same_shape(batch.centroids)) throw ShapeError("centroid bank shape mismatch");
  for (std::size_t k = 0; k < bank.rows(); ++k) {
    if (!batch.present[k]) continue;
    for (std::size_t c = 0; c < bank.cols(); ++c) {
      bank.at(k, c) = zeta * bank.at(k, c) + (1.0 - zeta) * batch.centroids.at(k, c);
    }
  }
}

void ema_update(CentroidBank& bank, const BatchCentroids& source, const BatchCentroids& target) {
  ema_update(bank.source, source, bank.zeta);
  ema_update(bank.target, target, bank.zeta);
}

std::vector<std::size_t> pseudo_label(const Tensor& probs) {
  std::vector<std::size_t> out(probs.rows(), 0);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (std::size_t k = 1; k < probs.cols(); ++k) {
      if (probs.at(i, k) > probs.at(i, out[i])) out[i] = k;
    }
  }
  return out;
}

double sm_loss(const CentroidBank& bank) {
  if (!bank.source.same_shape(bank.target)) throw ShapeError("centroid bank shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < bank.source.size(); ++i) {
    const double d = bank.source[i] - bank.target[i];
    s += d * d;
  }
  return s;
}

SemanticStep sm_loss_step(Tape& tape, const CentroidBank& bank, const BatchCentroids& source,
                          Var target_features, std::span<const std::size_t> target_labels) {
  const std::size_t k_count = bank.num_classes();
  const std::size_t width = bank.width();
  if (tape.value(target_features).cols() != width) throw ShapeError("target feature width mismatch");
  if (target_labels.size() != tape.value(target_features).rows()) {
    throw ShapeError("one pseudo label per target row required");
  }
  SemanticStep step{Var{}, bank};
  ema_update(step.updated.source, source, bank.zeta);

  std::vector<std::vector<std::size_t>> members(k_count);
  for (std::size_t i = 0; i < target_labels.size(); ++i) {
    if (target_labels[i] >= k_count) throw ShapeError("pseudo label outside [0, K)");
    members[target_labels[i]].push_back(i);
  }
  std::vector<Var> rows;
  rows.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    Tensor prev = Tensor::matrix(1, width);
    for (std::size_t c = 0; c < width; ++c) prev[c] = bank.target.at(k, c);
    if (members[k].empty()) {
      rows.push_back(tape.constant(std::move(prev)));
      continue;
    }
    Var batch_mean = tape.mean_rows(tape.gather_rows(target_features, members[k]));
    Var moved = tape.scale(batch_mean, 1.0 - bank.zeta);
    for (double& v : prev.data()) v *= bank.zeta;
    rows.push_back(tape.add(moved, tape.constant(std::move(prev))));
  }
  Var target_bank = tape.stack_rows(rows);
  const Tensor& tv = tape.value(target_bank);
  std::copy(tv.data().begin(), tv.data().end(), step.updated.target.data().begin());
  Var diff = tape.sub(tape.constant(step.updated.source), target_bank);
  step.loss = tape.sum(tape.mul(diff, diff));
  return step;
}

}  // namespace wran
