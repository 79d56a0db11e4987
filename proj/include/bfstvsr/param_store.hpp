#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfstvsr {

/// Handle to an entry of a ParamStore. Stable for the lifetime of the store.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
};

/// Named parameter tensors, each paired with a gradient buffer of the same
/// shape. Insertion order is the canonical order for checkpoints and Adam.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
  };

  ParamId add(const std::string& name, std::vector<std::size_t> shape) {
    if (by_name_.count(name) != 0) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    entries_.push_back(Entry{name, std::move(shape), std::vector<T>(n, T(0)), std::vector<T>(n, T(0))});
    by_name_.emplace(name, entries_.size() - 1);
    return ParamId{entries_.size() - 1};
  }

  std::optional<ParamId> find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return ParamId{it->second};
  }

  Entry& entry(ParamId id) { return entries_.at(id.index); }
  const Entry& entry(ParamId id) const { return entries_.at(id.index); }

  std::span<T> value(ParamId id) { return entries_[id.index].value; }
  std::span<const T> value(ParamId id) const { return entries_[id.index].value; }
  std::span<T> grad(ParamId id) { return entries_[id.index].grad; }
  std::span<const T> grad(ParamId id) const { return entries_[id.index].grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), T(0));
  }

  /// Copies values (not gradients) into a store of another scalar type.
  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) {
      auto id = out.add(e.name, e.shape);
      std::transform(e.value.begin(), e.value.end(), out.value(id).begin(), [](T v) { return static_cast<U>(v); });
    }
    return out;
  }

  /// Copies values from a store with the same names and shapes.
  template <class U>
  void assign_values(const ParamStore<U>& other) {
    for (auto& e : entries_) {
      auto id = other.find(e.name);
      if (!id) throw std::invalid_argument("ParamStore: missing parameter '" + e.name + "'");
      const auto& src = other.entry(*id);
      if (src.shape != e.shape) throw std::invalid_argument("ParamStore: shape mismatch for '" + e.name + "'");
      std::transform(src.value.begin(), src.value.end(), e.value.begin(), [](U v) { return static_cast<T>(v); });
    }
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> by_name_;
};

}  // namespace bfstvsr
