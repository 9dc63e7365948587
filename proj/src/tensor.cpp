#include "camel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace camel {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("matrix literal needs at least one row");
  std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return Tensor({m, n}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return Tensor({n, m}, std::move(out));
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  const char* name = op == Elementwise::add ? "add" : op == Elementwise::sub ? "sub" : "mul";
  if (op != Elementwise::add && op != Elementwise::sub && op != Elementwise::mul) {
    throw ContractError("elementwise: binary form only supports add, sub, mul");
  }
  require_same_shape(name, a, b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (op) {
      case Elementwise::add: out[i] = A[i] + B[i]; break;
      case Elementwise::sub: out[i] = A[i] - B[i]; break;
      default: out[i] = A[i] * B[i]; break;
    }
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor elementwise(Elementwise op, const Tensor& a, double scalar) {
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = A[i];
    switch (op) {
      case Elementwise::scale: out[i] = x * scalar; break;
      case Elementwise::exp: out[i] = std::exp(x); break;
      case Elementwise::log:
        if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
        out[i] = std::log(x);
        break;
      case Elementwise::relu: out[i] = x > 0.0 ? x : 0.0; break;
      case Elementwise::tanh: out[i] = std::tanh(x); break;
      case Elementwise::softplus: out[i] = softplus(x); break;
      default: throw ContractError("elementwise: unary form does not support binary ops");
    }
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }
Tensor scale(const Tensor& a, double s) { return elementwise(Elementwise::scale, a, s); }

Tensor reduce(Reduction op, const Tensor& x, std::optional<std::size_t> axis) {
  std::size_t outer = 1, n = x.size(), inner = 1;
  Shape out_shape{1};
  if (axis) {
    if (*axis >= x.rank()) {
      throw DimensionError("reduce: axis " + std::to_string(*axis) + " invalid for shape " +
                           shape_string(x.shape()));
    }
    const auto& s = x.shape();
    outer = 1;
    for (std::size_t d = 0; d < *axis; ++d) outer *= s[d];
    n = s[*axis];
    inner = 1;
    for (std::size_t d = *axis + 1; d < s.size(); ++d) inner *= s[d];
    out_shape = s;
    out_shape[*axis] = 1;
  }
  std::vector<double> out(outer * inner);
  auto X = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      auto idx = [&](std::size_t k) { return (o * n + k) * inner + i; };
      double acc = 0.0;
      if (op == Reduction::logsumexp) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, X[idx(k)]);
        for (std::size_t k = 0; k < n; ++k) acc += std::exp(X[idx(k)] - mx);
        acc = mx + std::log(acc);
      } else {
        for (std::size_t k = 0; k < n; ++k) acc += X[idx(k)];
        if (op == Reduction::mean) acc /= static_cast<double>(n);
      }
      out[o * inner + i] = acc;
    }
  }
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor normalize_rows(const Tensor& x) {
  require_matrix("normalize_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += out[i * n + j] * out[i * n + j];
    if (!(ss > 0.0)) throw DomainError("normalize_rows: row " + std::to_string(i) + " has zero norm");
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= inv;
  }
  return Tensor(x.shape(), std::move(out));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace camel
