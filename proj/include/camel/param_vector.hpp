#pragma once

#include <string>
#include <utility>
#include <vector>

#include "camel/tensor.hpp"

namespace camel {

/// Ordered, uniquely named collection of tensors treated as one vector.
class ParamVector {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParamVector() = default;

  void add(std::string name, Tensor value);
  void set(const std::string& name, Tensor value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;

  /// Empty string when compatible, otherwise a description of the first difference.
  std::string incompatibility(const ParamVector& other) const;
  bool compatible(const ParamVector& other) const { return incompatibility(other).empty(); }

  std::vector<double> flatten() const;
  ParamVector with_flat(std::span<const double> values) const;

  bool operator==(const ParamVector& other) const = default;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<Entry> entries_;
};

ParamVector zeros_like(const ParamVector& p);

/// y + alpha * x. Throws DimensionError naming the first mismatch.
ParamVector param_axpy(const ParamVector& y, double alpha, const ParamVector& x);
ParamVector param_scale(const ParamVector& p, double s);
double param_dot(const ParamVector& a, const ParamVector& b);
double param_norm(const ParamVector& p);
double param_distance(const ParamVector& a, const ParamVector& b);
double param_max_abs_diff(const ParamVector& a, const ParamVector& b);

}  // namespace camel
