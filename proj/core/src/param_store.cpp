#include "wran/param_store.hpp"

#include "wran/error.hpp"

namespace wran {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Tensor grad(value.shape(), 0.0);
  auto [it, ok] = entries_.emplace(name, Entry{std::move(value), std::move(grad)});
  return it->second.value;
}

Tensor& ParamStore::add_uniform(const std::string& name, std::vector<std::size_t> shape,
                                double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return add(name, std::move(t));
}

Tensor& ParamStore::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
  return add(name, Tensor(std::move(shape)));
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return entry(name).grad; }

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.value;
}

const Tensor& ParamStore::grad(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.grad;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::copy_prefix(const std::string& from, const std::string& to) {
  for (const auto& name : names_with_prefix(from)) {
    const std::string target = to + name.substr(from.size());
    Entry copy{entries_.at(name).value, Tensor(entries_.at(name).value.shape(), 0.0)};
    entries_.insert_or_assign(target, std::move(copy));
  }
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [name, e] : other.entries_) entries_.insert_or_assign(name, e);
}

ParamStore ParamStore::subset(const std::string& prefix) const {
  ParamStore out;
  for (const auto& name : names_with_prefix(prefix)) out.entries_.emplace(name, entries_.at(name));
  return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (const auto& [name, e] : a.entries_) {
    auto it = b.entries_.find(name);
    if (it == b.entries_.end() || !(it->second.value == e.value)) return false;
  }
  return true;
}

}  // namespace wran
