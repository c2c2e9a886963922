#pragma once

#include <map>
#include <string>
#include <vector>

#include "wran/random.hpp"
#include "wran/tensor.hpp"

namespace wran {

// Named parameters with gradient slots of identical shape.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  // Throws ContractError when the name is already taken.
  Tensor& add(const std::string& name, Tensor value);
  Tensor& add_uniform(const std::string& name, std::vector<std::size_t> shape, double limit, Rng& rng);
  Tensor& add_zeros(const std::string& name, std::vector<std::size_t> shape);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  Entry& entry(const std::string& name);

  void zero_grad();
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  // Copies every entry under `from` into `to`, replacing the prefix.
  void copy_prefix(const std::string& from, const std::string& to);
  // Inserts or overwrites entries from `other`.
  void merge(const ParamStore& other);
  ParamStore subset(const std::string& prefix) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace wran
