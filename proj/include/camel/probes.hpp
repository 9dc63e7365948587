#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camel/grad_check.hpp"
#include "camel/model.hpp"

namespace camel {

/// A scalar loss around one differentiable operation, with the point to check it at.
struct GradProbe {
  std::string name;
  LossBuilder loss;
  ParamVector theta;
};

/// Small encoder used wherever the full model has to be differentiated numerically.
EncoderConfig tiny_encoder_config();

/// One probe per differentiable op (each reduction axis separately), the
/// encoders, both losses, and the full ITC+ITM objective with memory negatives.
/// Inputs stay away from kinks (relu near 0) and domain edges (log near 0).
std::vector<GradProbe> gradient_probes(std::uint64_t seed);

}  // namespace camel
