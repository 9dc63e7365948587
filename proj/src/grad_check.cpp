#include "camel/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace camel {

double evaluate_loss(const LossBuilder& f, const ParamVector& theta) {
  Tape tape;
  auto params = tape.bind(theta);
  return f(tape, params).value().item();
}

std::pair<double, ParamVector> value_and_grad(const LossBuilder& f, const ParamVector& theta) {
  Tape tape;
  auto params = tape.bind(theta);
  Var loss = f(tape, params);
  const double v = loss.value().item();
  return {v, tape.backward(loss)};
}

GradCheckResult grad_check(const LossBuilder& f, const ParamVector& theta, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  const auto analytic = value_and_grad(f, theta).second.flatten();
  auto flat = theta.flatten();

  GradCheckResult result;
  result.coordinates = flat.size();
  std::size_t entry = 0, entry_offset = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    while (i >= entry_offset + theta.entries()[entry].second.size()) {
      entry_offset += theta.entries()[entry].second.size();
      ++entry;
    }
    const double saved = flat[i];
    flat[i] = saved + step;
    const double up = evaluate_loss(f, theta.with_flat(flat));
    flat[i] = saved - step;
    const double down = evaluate_loss(f, theta.with_flat(flat));
    flat[i] = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = theta.entries()[entry].first;
      result.worst_index = i - entry_offset;
    }
  }
  return result;
}

}  // namespace camel
