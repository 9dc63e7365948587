#include "camel/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace camel {

namespace {

std::atomic<bool> g_corrupt_tanh{false};

Tape& same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands live on different tapes");
  return a.tape();
}

Var checked(const char* op, Tape& tape, Tensor value, std::span<const Var> parents, Tape::Backward fn) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  return tape.record(std::move(value), parents, std::move(fn));
}

Var checked(const char* op, Tape& tape, Tensor value, std::initializer_list<Var> parents, Tape::Backward fn) {
  return checked(op, tape, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

}  // namespace

namespace testing {
void set_corrupt_tanh_backward(bool on) { g_corrupt_tanh = on; }
bool corrupt_tanh_backward() { return g_corrupt_tanh; }
}  // namespace testing

const Tensor& Var::value() const { return tape().value(id_); }

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

Var ParamMap::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("parameter '" + name + "' is not bound on this tape");
  return it->second;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const std::string& name, Tensor value) {
  for (const auto& [n, _] : params_)
    if (n == name) throw ContractError("parameter '" + name + "' already registered on this tape");
  nodes_.push_back(Node{std::move(value), true, nullptr});
  params_.emplace_back(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

ParamMap Tape::bind(const ParamVector& params) {
  ParamMap map;
  for (const auto& [name, t] : params.entries()) map.insert(name, param(name, t));
  return map;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) {
    if (&p.tape() != this) throw ContractError("operand recorded on a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, std::span<const double> grad) {
  if (!nodes_[id].requires_grad) return;
  auto& g = grads_[id];
  if (g.empty()) {
    g.assign(grad.begin(), grad.end());
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad[i];
  }
}

ParamVector Tape::backward(Var loss) {
  if (&loss.tape() != this || loss.id() >= nodes_.size()) throw ContractError("backward: loss is not on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }
  grads_.assign(nodes_.size(), {});
  visits_ = 0;
  if (nodes_[loss.id()].requires_grad) grads_[loss.id()] = {1.0};
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (grads_[i].empty() || !nodes_[i].backward) continue;
    ++visits_;
    // copy: the callback may accumulate into other nodes, never into i itself
    const std::vector<double> g = grads_[i];
    nodes_[i].backward(g, *this);
  }
  ParamVector out;
  for (const auto& [name, id] : params_) {
    const auto& shape = nodes_[id].value.shape();
    if (grads_[id].empty()) {
      out.add(name, Tensor::zeros(shape));
    } else {
      out.add(name, Tensor(shape, grads_[id]));
    }
  }
  grads_.clear();
  return out;
}

void Tape::clear() {
  nodes_.clear();
  params_.clear();
  grads_.clear();
  visits_ = 0;
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  Tensor out = matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return checked("matmul", t, std::move(out), {a, b}, [ia, ib](std::span<const double> g, Tape& tape) {
    const Tensor& A = tape.value(ia);
    const Tensor& B = tape.value(ib);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (tape.requires_grad(ia)) {
      std::vector<double> ga(m * k, 0.0);
      auto Bd = B.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * Bd[p * n + j];
          ga[i * k + p] = acc;
        }
      tape.accumulate(ia, ga);
    }
    if (tape.requires_grad(ib)) {
      std::vector<double> gb(k * n, 0.0);
      auto Ad = A.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Ad[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      tape.accumulate(ib, gb);
    }
  });
}

Var transpose(Var a) {
  Tensor out = transpose(a.value());
  const std::size_t ia = a.id();
  const std::size_t m = a.value().rows(), n = a.value().cols();
  return checked("transpose", a.tape(), std::move(out), {a}, [ia, m, n](std::span<const double> g, Tape& tape) {
    std::vector<double> ga(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = g[j * m + i];
    tape.accumulate(ia, ga);
  });
}

Var elementwise(Elementwise op, Var a, Var b) {
  Tape& t = same_tape("elementwise", a, b);
  Tensor out = elementwise(op, a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return checked("elementwise", t, std::move(out), {a, b}, [op, ia, ib](std::span<const double> g, Tape& tape) {
    std::vector<double> buf(g.size());
    if (tape.requires_grad(ia)) {
      if (op == Elementwise::mul) {
        auto B = tape.value(ib).data();
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * B[i];
        tape.accumulate(ia, buf);
      } else {
        tape.accumulate(ia, g);
      }
    }
    if (tape.requires_grad(ib)) {
      if (op == Elementwise::mul) {
        auto A = tape.value(ia).data();
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * A[i];
      } else if (op == Elementwise::sub) {
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] = -g[i];
      } else {
        std::copy(g.begin(), g.end(), buf.begin());
      }
      tape.accumulate(ib, buf);
    }
  });
}

Var elementwise(Elementwise op, Var a, double scalar) {
  Tensor out = elementwise(op, a.value(), scalar);
  const std::size_t ia = a.id();
  Tape& t = a.tape();
  const std::size_t io = t.size();  // id the output node will receive
  return checked("elementwise", t, std::move(out), {a},
                 [op, ia, io, scalar](std::span<const double> g, Tape& tape) {
                   auto X = tape.value(ia).data();
                   auto Y = tape.value(io).data();
                   std::vector<double> gx(g.size());
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     double d = 0.0;
                     switch (op) {
                       case Elementwise::scale: d = scalar; break;
                       case Elementwise::exp: d = Y[i]; break;
                       case Elementwise::log: d = 1.0 / X[i]; break;
                       case Elementwise::relu: d = X[i] > 0.0 ? 1.0 : 0.0; break;
                       case Elementwise::tanh:
                         d = 1.0 - Y[i] * Y[i];
                         if (testing::corrupt_tanh_backward()) d *= 1.01;
                         break;
                       case Elementwise::softplus: d = 1.0 / (1.0 + std::exp(-X[i])); break;
                       default: break;
                     }
                     gx[i] = g[i] * d;
                   }
                   tape.accumulate(ia, gx);
                 });
}

Var add(Var a, Var b) { return elementwise(Elementwise::add, a, b); }
Var sub(Var a, Var b) { return elementwise(Elementwise::sub, a, b); }
Var mul(Var a, Var b) { return elementwise(Elementwise::mul, a, b); }
Var scale(Var a, double s) { return elementwise(Elementwise::scale, a, s); }
Var exp(Var a) { return elementwise(Elementwise::exp, a); }
Var log(Var a) { return elementwise(Elementwise::log, a); }
Var relu(Var a) { return elementwise(Elementwise::relu, a); }
Var tanh(Var a) { return elementwise(Elementwise::tanh, a); }
Var softplus(Var a) { return elementwise(Elementwise::softplus, a); }

Var reduce(Reduction op, Var x, std::optional<std::size_t> axis) {
  Tensor out = reduce(op, x.value(), axis);
  const std::size_t ix = x.id();
  Tape& t = x.tape();
  const std::size_t io = t.size();
  const Shape& s = x.value().shape();
  std::size_t outer = 1, n = x.value().size(), inner = 1;
  if (axis) {
    outer = 1;
    for (std::size_t d = 0; d < *axis; ++d) outer *= s[d];
    n = s[*axis];
    inner = 1;
    for (std::size_t d = *axis + 1; d < s.size(); ++d) inner *= s[d];
  }
  return checked("reduce", t, std::move(out), {x},
                 [op, ix, io, outer, n, inner](std::span<const double> g, Tape& tape) {
                   auto X = tape.value(ix).data();
                   auto Y = tape.value(io).data();
                   std::vector<double> gx(outer * n * inner);
                   for (std::size_t o = 0; o < outer; ++o)
                     for (std::size_t i = 0; i < inner; ++i) {
                       const double go = g[o * inner + i];
                       for (std::size_t k = 0; k < n; ++k) {
                         const std::size_t idx = (o * n + k) * inner + i;
                         switch (op) {
                           case Reduction::sum: gx[idx] = go; break;
                           case Reduction::mean: gx[idx] = go / static_cast<double>(n); break;
                           case Reduction::logsumexp: gx[idx] = go * std::exp(X[idx] - Y[o * inner + i]); break;
                         }
                       }
                     }
                   tape.accumulate(ix, gx);
                 });
}

Var sum(Var x, std::optional<std::size_t> axis) { return reduce(Reduction::sum, x, axis); }
Var mean(Var x, std::optional<std::size_t> axis) { return reduce(Reduction::mean, x, axis); }
Var logsumexp(Var x, std::optional<std::size_t> axis) { return reduce(Reduction::logsumexp, x, axis); }

Var normalize_rows(Var x) {
  Tensor out = normalize_rows(x.value());
  const std::size_t ix = x.id();
  Tape& t = x.tape();
  const std::size_t io = t.size();
  return checked("normalize_rows", t, std::move(out), {x}, [ix, io](std::span<const double> g, Tape& tape) {
    const Tensor& X = tape.value(ix);
    auto Y = tape.value(io).data();
    const std::size_t m = X.rows(), n = X.cols();
    std::vector<double> gx(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      double ss = 0.0, yg = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        ss += X[i * n + j] * X[i * n + j];
        yg += Y[i * n + j] * g[i * n + j];
      }
      const double inv = 1.0 / std::sqrt(ss);
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] = (g[i * n + j] - Y[i * n + j] * yg) * inv;
    }
    tape.accumulate(ix, gx);
  });
}

Var tile_rows(Var row, std::size_t rows) {
  const Tensor& r = row.value();
  if (!(r.rank() == 1 || (r.rank() == 2 && r.rows() == 1))) {
    throw DimensionError("tile_rows: expected a row vector, got " + shape_string(r.shape()));
  }
  if (rows == 0) throw DimensionError("tile_rows: zero rows requested");
  const std::size_t n = r.size();
  std::vector<double> out(rows * n);
  for (std::size_t i = 0; i < rows; ++i) std::copy(r.data().begin(), r.data().end(), out.begin() + i * n);
  const std::size_t ir = row.id();
  return checked("tile_rows", row.tape(), Tensor({rows, n}, std::move(out)), {row},
                 [ir, rows, n](std::span<const double> g, Tape& tape) {
                   std::vector<double> gr(n, 0.0);
                   for (std::size_t i = 0; i < rows; ++i)
                     for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                   tape.accumulate(ir, gr);
                 });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& t = parts[0].tape();
  const std::size_t m = parts[0].value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.rows() != m) {
      throw DimensionError("concat_cols: " + shape_string(v.shape()) + " does not have " + std::to_string(m) +
                           " rows");
    }
    widths.push_back(v.cols());
    ids.push_back(p.id());
    total += v.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].value().data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(src.begin() + i * widths[k], widths[k], out.begin() + i * total + off);
    off += widths[k];
  }
  return checked("concat_cols", t, Tensor({m, total}, std::move(out)), parts,
                 [ids, widths, m, total](std::span<const double> g, Tape& tape) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < ids.size(); ++k) {
                     if (tape.requires_grad(ids[k])) {
                       std::vector<double> gk(m * widths[k]);
                       for (std::size_t i = 0; i < m; ++i)
                         std::copy_n(g.begin() + i * total + off, widths[k], gk.begin() + i * widths[k]);
                       tape.accumulate(ids[k], gk);
                     }
                     off += widths[k];
                   }
                 });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  Tape& t = parts[0].tape();
  const std::size_t n = parts[0].value().cols();
  std::vector<std::size_t> sizes, ids;
  std::vector<double> out;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.cols() != n) {
      throw DimensionError("concat_rows: " + shape_string(v.shape()) + " does not have " + std::to_string(n) +
                           " columns");
    }
    sizes.push_back(v.size());
    ids.push_back(p.id());
    out.insert(out.end(), v.data().begin(), v.data().end());
  }
  const std::size_t m = out.size() / n;
  return checked("concat_rows", t, Tensor({m, n}, std::move(out)), parts,
                 [ids, sizes](std::span<const double> g, Tape& tape) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < ids.size(); ++k) {
                     tape.accumulate(ids[k], g.subspan(off, sizes[k]));
                     off += sizes[k];
                   }
                 });
}

Var gather_rows(Var x, std::span<const std::size_t> indices) {
  const Tensor& v = x.value();
  if (v.rank() != 2) throw DimensionError("gather_rows: expected a matrix, got " + shape_string(v.shape()));
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  const std::size_t n = v.cols(), m = v.rows();
  std::vector<double> out(indices.size() * n);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(indices[r]) + " out of range for " +
                           shape_string(v.shape()));
    }
    std::copy_n(v.data().begin() + indices[r] * n, n, out.begin() + r * n);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t ix = x.id();
  return checked("gather_rows", x.tape(), Tensor({indices.size(), n}, std::move(out)), {x},
                 [ix, idx, m, n](std::span<const double> g, Tape& tape) {
                   std::vector<double> gx(m * n, 0.0);
                   for (std::size_t r = 0; r < idx.size(); ++r)
                     for (std::size_t j = 0; j < n; ++j) gx[idx[r] * n + j] += g[r * n + j];
                   tape.accumulate(ix, gx);
                 });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return checked("reshape", x.tape(), std::move(out), {x},
                 [ix](std::span<const double> g, Tape& tape) { tape.accumulate(ix, g); });
}

}  // namespace camel
