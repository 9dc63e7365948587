#pragma once

#include <functional>
#include <string>

#include "camel/param_vector.hpp"
#include "camel/tape.hpp"

namespace camel {

/// Builds a scalar loss on `tape` from parameters already bound to it.
using LossBuilder = std::function<Var(Tape& tape, const ParamMap& params)>;

/// Evaluates the loss value without keeping the tape around.
double evaluate_loss(const LossBuilder& f, const ParamVector& theta);

/// Loss value and gradient from one forward/backward cycle.
std::pair<double, ParamVector> value_and_grad(const LossBuilder& f, const ParamVector& theta);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Central-difference check of every coordinate. The error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const LossBuilder& f, const ParamVector& theta, double step = 1e-5);

}  // namespace camel
