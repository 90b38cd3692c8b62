#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "strnet/container.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

// Ordered set of named parameter buffers. Forward passes bind leaf tensors
// that share these buffers; the optimizer is the single writer and mutates
// them only between graphs.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::shared_ptr<std::vector<double>> value;
  };

  void add(const std::string& name, const Tensor& init) {
    if (index_.count(name)) throw ValueError("parameter '" + name + "' already registered");
    index_[name] = entries_.size();
    entries_.push_back({name, init.shape(),
                        std::make_shared<std::vector<double>>(init.values().begin(),
                                                              init.values().end())});
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<double>& values(std::size_t i) { return *entries_.at(i).value; }
  const std::vector<double>& values(std::size_t i) const { return *entries_.at(i).value; }

  // Tracked leaf sharing the parameter buffer.
  Tensor bind(std::size_t i) const {
    const Entry& e = entries_.at(i);
    return Tensor::leaf(e.shape, std::shared_ptr<const std::vector<double>>(e.value));
  }

  // Untracked view for evaluation passes.
  Tensor view(std::size_t i) const {
    const Entry& e = entries_.at(i);
    return Tensor::from_op(e.shape, std::shared_ptr<const std::vector<double>>(e.value), {},
                           nullptr);
  }

  std::vector<std::vector<double>*> value_ptrs() {
    std::vector<std::vector<double>*> out;
    out.reserve(entries_.size());
    for (auto& e : entries_) out.push_back(e.value.get());
    return out;
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value->size();
    return n;
  }

  void write_to(ArrayContainer& c, const std::string& prefix) const {
    for (const auto& e : entries_) c.add(prefix + e.name, e.shape, *e.value);
  }

  void read_from(const ArrayContainer& c, const std::string& prefix) {
    for (auto& e : entries_) {
      const NamedArray& a = c.get(prefix + e.name);
      if (a.shape != e.shape)
        throw ValueError("checkpoint parameter '" + e.name + "' shaped " +
                         shape_str(a.shape) + ", model expects " + shape_str(e.shape));
      *e.value = a.data;
    }
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace strnet
