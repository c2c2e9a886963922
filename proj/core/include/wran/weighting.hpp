#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wran/adversary.hpp"
#include "wran/tensor.hpp"

namespace wran {

// Average of the frozen source classifier's predictions over target data:
// target_probs is n_t x |C_s| with softmax rows.
std::vector<double> relation_weights(const Tensor& target_probs);

// w_i = 1 - D_a(f_i) for every source feature row.
std::vector<double> instance_weights(const Discriminator& aux, ParamStore& params,
                                     const Tensor& source_features);

// alpha = sigmoid(W_r . mean(target_features)). gate has feature width.
double gate_alpha(std::span<const double> gate, const Tensor& target_features);

// One alpha per class from the mean target feature among rows pseudo-labelled
// with that class. Classes without target rows fall back to the global alpha.
std::vector<double> gate_alpha_per_class(std::span<const double> gate, const Tensor& target_features,
                                         std::span<const std::size_t> pseudo_labels,
                                         std::size_t num_classes);

// raw_i = alpha * inst_i + (1 - alpha) * rel[y_i]; total_i = n * raw_i / sum(raw).
// Throws ContractError when sum(raw) == 0.
std::vector<double> total_weights(double alpha, std::span<const double> instance,
                                  std::span<const double> relation,
                                  std::span<const std::size_t> labels);
std::vector<double> total_weights(std::span<const double> alpha_per_class,
                                  std::span<const double> instance,
                                  std::span<const double> relation,
                                  std::span<const std::size_t> labels);

// Relation weights, instance weights, gate value and fused weights. Write-once:
// after freeze() every setter throws.
class WeightTable {
 public:
  const std::vector<double>& relation_weights() const { return relation_; }
  const std::vector<double>& instance_weights() const { return instance_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& total_weights() const { return total_; }
  bool frozen() const { return frozen_; }
  bool has_relation_weights() const { return !relation_.empty(); }
  bool has_instance_weights() const { return !instance_.empty(); }
  bool complete() const { return !relation_.empty() && !instance_.empty() && !total_.empty(); }

  void set_relation_weights(std::vector<double> w);
  void set_instance_weights(std::vector<double> w);
  void set_alpha(double alpha);
  void set_total_weights(std::vector<double> w);
  // Idempotent. Requires all fields populated.
  void freeze();

  // Line-oriented text form:
  //   wran-weights v1
  //   section relation_weights <n>
  //   <index> <value>
  //   ...
  //   section instance_weights <n> / section alpha 1 / section total_weights <n>
  //   frozen <0|1>
  void write(std::ostream& out) const;
  static WeightTable read(std::istream& in);
  void save(const std::string& path) const;
  static WeightTable load(const std::string& path);

  friend bool operator==(const WeightTable&, const WeightTable&) = default;

 private:
  void check_mutable() const;

  std::vector<double> relation_;
  std::vector<double> instance_;
  double alpha_ = 0.5;
  std::vector<double> total_;
  bool frozen_ = false;
};

}  // namespace wran
