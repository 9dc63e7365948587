#include "camel/param_vector.hpp"

#include <algorithm>
#include <cmath>

namespace camel {

void ParamVector::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

void ParamVector::set(const std::string& name, Tensor value) {
  auto& slot = entries_[index_of(name)].second;
  if (slot.shape() != value.shape()) {
    throw DimensionError("parameter '" + name + "' has shape " + shape_string(slot.shape()) +
                         ", cannot assign " + shape_string(value.shape()));
  }
  slot = std::move(value);
}

const Tensor& ParamVector::get(const std::string& name) const { return entries_[index_of(name)].second; }

bool ParamVector::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

std::size_t ParamVector::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].first == name) return i;
  throw ContractError("unknown parameter '" + name + "'");
}

std::size_t ParamVector::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

std::string ParamVector::incompatibility(const ParamVector& other) const {
  if (entries_.size() != other.entries_.size()) {
    return "entry count " + std::to_string(entries_.size()) + " vs " + std::to_string(other.entries_.size());
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, ta] = entries_[i];
    const auto& [nb, tb] = other.entries_[i];
    if (na != nb) return "entry " + std::to_string(i) + " name '" + na + "' vs '" + nb + "'";
    if (ta.shape() != tb.shape()) {
      return "entry '" + na + "' shape " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape());
    }
  }
  return {};
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& [_, t] : entries_) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

ParamVector ParamVector::with_flat(std::span<const double> values) const {
  if (values.size() != scalar_count()) {
    throw DimensionError("flat vector of length " + std::to_string(values.size()) + " does not match " +
                         std::to_string(scalar_count()) + " parameters");
  }
  ParamVector out;
  std::size_t off = 0;
  for (const auto& [name, t] : entries_) {
    out.entries_.emplace_back(name, Tensor(t.shape(), {values.begin() + off, values.begin() + off + t.size()}));
    off += t.size();
  }
  return out;
}

namespace {

void require_compatible(const char* op, const ParamVector& a, const ParamVector& b) {
  auto why = a.incompatibility(b);
  if (!why.empty()) throw DimensionError(std::string(op) + ": incompatible parameter vectors: " + why);
}

}  // namespace

ParamVector zeros_like(const ParamVector& p) {
  ParamVector out;
  for (const auto& [name, t] : p.entries()) out.add(name, Tensor::zeros(t.shape()));
  return out;
}

ParamVector param_axpy(const ParamVector& y, double alpha, const ParamVector& x) {
  require_compatible("param_axpy", y, x);
  ParamVector out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto& [name, ty] = y.entries()[i];
    const auto& tx = x.entries()[i].second;
    std::vector<double> v(ty.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = ty[j] + alpha * tx[j];
    out.add(name, Tensor(ty.shape(), std::move(v)));
  }
  return out;
}

ParamVector param_scale(const ParamVector& p, double s) {
  ParamVector out;
  for (const auto& [name, t] : p.entries()) out.add(name, scale(t, s));
  return out;
}

double param_dot(const ParamVector& a, const ParamVector& b) {
  require_compatible("param_dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ta = a.entries()[i].second;
    const auto& tb = b.entries()[i].second;
    for (std::size_t j = 0; j < ta.size(); ++j) acc += ta[j] * tb[j];
  }
  return acc;
}

double param_norm(const ParamVector& p) { return std::sqrt(param_dot(p, p)); }

double param_distance(const ParamVector& a, const ParamVector& b) {
  return param_norm(param_axpy(a, -1.0, b));
}

double param_max_abs_diff(const ParamVector& a, const ParamVector& b) {
  require_compatible("param_max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a.entries()[i].second, b.entries()[i].second));
  return m;
}

}  // namespace camel
