#include "wran/weighting.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "wran/error.hpp"
#include "wran/format.hpp"

namespace wran {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> column_mean(const Tensor& m, std::span<const std::size_t> rows) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m.at(r, c);
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("gate width does not match feature width");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> relation_weights(const Tensor& target_probs) {
  if (target_probs.empty() || target_probs.rows() == 0) {
    throw ContractError("relation weights need at least one target instance");
  }
  std::vector<std::size_t> all(target_probs.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return column_mean(target_probs, all);
}

std::vector<double> instance_weights(const Discriminator& aux, ParamStore& params,
                                     const Tensor& source_features) {
  std::vector<double> w = aux.discriminate_all(params, source_features);
  for (double& v : w) v = 1.0 - v;
  return w;
}

double gate_alpha(std::span<const double> gate, const Tensor& target_features) {
  if (target_features.empty()) throw ContractError("gate needs at least one target feature");
  std::vector<std::size_t> all(target_features.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return sigmoid(dot(gate, column_mean(target_features, all)));
}

std::vector<double> gate_alpha_per_class(std::span<const double> gate, const Tensor& target_features,
                                         std::span<const std::size_t> pseudo_labels,
                                         std::size_t num_classes) {
  if (pseudo_labels.size() != target_features.rows()) {
    throw ShapeError("one pseudo label per target row required");
  }
  const double global = gate_alpha(gate, target_features);
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < pseudo_labels.size(); ++i) {
    if (pseudo_labels[i] >= num_classes) throw ShapeError("pseudo label out of range");
    members[pseudo_labels[i]].push_back(i);
  }
  std::vector<double> alpha(num_classes, global);
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (!members[k].empty()) alpha[k] = sigmoid(dot(gate, column_mean(target_features, members[k])));
  }
  return alpha;
}

std::vector<double> total_weights(std::span<const double> alpha_per_class,
                                  std::span<const double> instance,
                                  std::span<const double> relation,
                                  std::span<const std::size_t> labels) {
  if (instance.size() != labels.size()) throw ShapeError("one instance weight per label required");
  std::vector<double> raw(instance.size());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (labels[i] >= relation.size()) throw ShapeError("label outside relation weight vector");
    const double a = alpha_per_class.size() == 1 ? alpha_per_class[0] : alpha_per_class[labels[i]];
    raw[i] = a * instance[i] + (1.0 - a) * relation[labels[i]];
    total += raw[i];
  }
  if (!(total > 0.0)) throw ContractError("degenerate weights: all importance weights are zero");
  const double n = static_cast<double>(raw.size());
  for (double& v : raw) v = n * v / total;
  return raw;
}

std::vector<double> total_weights(double alpha, std::span<const double> instance,
                                  std::span<const double> relation,
                                  std::span<const std::size_t> labels) {
  const double a[1] = {alpha};
  return total_weights(std::span<const double>(a, 1), instance, relation, labels);
}

void WeightTable::check_mutable() const {
  if (frozen_) throw ContractError("weight table is frozen");
}

void WeightTable::set_relation_weights(std::vector<double> w) {
  check_mutable();
  relation_ = std::move(w);
}

void WeightTable::set_instance_weights(std::vector<double> w) {
  check_mutable();
  instance_ = std::move(w);
}

void WeightTable::set_alpha(double alpha) {
  check_mutable();
  alpha_ = alpha;
}

void WeightTable::set_total_weights(std::vector<double> w) {
  check_mutable();
  total_ = std::move(w);
}

void WeightTable::freeze() {
  if (frozen_) return;
  if (!complete()) throw ContractError("cannot freeze an incomplete weight table");
  frozen_ = true;
}

void WeightTable::write(std::ostream& out) const {
  auto section = [&](const char* name, const std::vector<double>& values) {
    out << "section " << name << ' ' << values.size() << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ' ' << format_real(values[i]) << '\n';
  };
  out << "wran-weights v1\n";
  section("relation_weights", relation_);
  section("instance_weights", instance_);
  section("alpha", {alpha_});
  section("total_weights", total_);
  out << "frozen " << (frozen_ ? 1 : 0) << '\n';
}

WeightTable WeightTable::read(std::istream& in) {
  WeightTable table;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of weight file", lineno + 1);
    ++lineno;
    return std::istringstream(line);
  };
  if (next().str() != "wran-weights v1") throw ParseError("missing weight file header", lineno);
  auto read_section = [&](const std::string& expected) {
    auto ss = next();
    std::string kw, name;
    std::size_t n = 0;
    if (!(ss >> kw >> name >> n) || kw != "section" || name != expected) {
      throw ParseError("expected section " + expected, lineno);
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = next();
      std::size_t idx = 0;
      std::string token;
      if (!(row >> idx >> token) || idx != i) throw ParseError("malformed weight entry", lineno);
      values[i] = parse_real(token, lineno);
    }
    return values;
  };
  table.relation_ = read_section("relation_weights");
  table.instance_ = read_section("instance_weights");
  const auto alpha = read_section("alpha");
  if (alpha.size() != 1) throw ParseError("alpha section must hold one value", lineno);
  table.alpha_ = alpha[0];
  table.total_ = read_section("total_weights");
  auto tail = next();
  std::string kw;
  int frozen = 0;
  if (!(tail >> kw >> frozen) || kw != "frozen") throw ParseError("missing frozen flag", lineno);
  table.frozen_ = frozen != 0;
  return table;
}

void WeightTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write(out);
}

WeightTable WeightTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read(in);
}

}  // namespace wran
