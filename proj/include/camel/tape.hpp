#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camel/param_vector.hpp"
#include "camel/tensor.hpp"

namespace camel {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Name -> Var lookup for parameters bound onto a tape.
class ParamMap {
 public:
  void insert(const std::string& name, Var v) { vars_[name] = v; }
  Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) != 0; }

 private:
  std::map<std::string, Var> vars_;
};

/// Records a forward computation and replays it in reverse to produce
/// gradients for the tracked parameters. Nodes are appended in evaluation
/// order, so reverse insertion order is a reverse topological order.
class Tape {
 public:
  /// Receives the gradient flowing into a node and pushes parent gradients
  /// through Tape::accumulate.
  using Backward = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(const std::string& name, Tensor value);
  ParamMap bind(const ParamVector& params);

  /// Appends a derived node. `backward` runs only if some parent needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, std::span<const double> grad);

  /// d loss / d p for every parameter registered on this tape, in
  /// registration order. Parameters the loss does not touch get zeros.
  ParamVector backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }
  std::size_t last_backward_visits() const { return visits_; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::vector<std::pair<std::string, std::size_t>> params_;
  std::vector<std::vector<double>> grads_;
  std::size_t visits_ = 0;
};

// Differentiable operations. All operands must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var elementwise(Elementwise op, Var a, Var b);
Var elementwise(Elementwise op, Var a, double scalar = 0.0);

Var reduce(Reduction op, Var x, std::optional<std::size_t> axis = std::nullopt);
Var sum(Var x, std::optional<std::size_t> axis = std::nullopt);
Var mean(Var x, std::optional<std::size_t> axis = std::nullopt);
Var logsumexp(Var x, std::optional<std::size_t> axis = std::nullopt);

Var normalize_rows(Var x);
/// Explicit broadcast of a [n] or [1 x n] row to [rows x n].
Var tile_rows(Var row, std::size_t rows);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const std::size_t> indices);
Var reshape(Var x, Shape shape);

namespace testing {
/// Negative-control hook: when set, tanh's backward pass is scaled by 1.01.
void set_corrupt_tanh_backward(bool on);
bool corrupt_tanh_backward();
}  // namespace testing

}  // namespace camel
