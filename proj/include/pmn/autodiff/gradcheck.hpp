#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pmn/autodiff/tensor.hpp"

namespace pmn::ad {

struct LossEvaluation {
    double loss = 0.0;
    /// Tape branch signature; used to skip probes that straddle a kink.
    std::uint64_t branch_signature = 0;
};

/// Evaluates the loss at the current parameter values. When
/// `with_gradient` is set it must also zero and then fill the parameters'
/// gradient buffers.
using LossFunction = std::function<LossEvaluation(bool with_gradient)>;

struct NamedParameter {
    std::string name;
    Tensor<double>* tensor;
};

struct GradCheckOptions {
    /// Probe step relative to the parameter's RMS scale.
    double relative_step = 1e-3;
    /// Lower bound on the scale used for the step (zero-initialized biases).
    double min_scale = 1e-2;
    double tolerance = 1e-4;
    /// Denominator floor in |a - n| / max(|a|, |n|, floor).
    double denominator_floor = 1e-7;
    std::size_t max_probes_per_parameter = 32;
    std::uint64_t seed = 0;
    /// Combine differences at h and h/2, cancelling the h^2 error term.
    bool richardson = false;
};

struct ParameterCheck {
    std::string name;
    std::size_t probes = 0;
    std::size_t kinks_skipped = 0;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<ParameterCheck> parameters;
    double max_relative_error = 0.0;
    std::size_t total_probes = 0;
    std::size_t kinks_skipped = 0;
    bool passed = false;
    /// Non-empty when the check failed for a reason other than tolerance.
    std::string failure;
};

double relative_error(double analytic, double numeric, double floor);

/// Compares analytic gradients against central differences
/// D(h) = (L(theta + h) - L(theta - h)) / 2h on sampled elements of each
/// parameter, optionally extrapolated as (4 D(h/2) - D(h)) / 3.
GradCheckReport grad_check(const LossFunction& loss, const std::vector<NamedParameter>& params,
                           const GradCheckOptions& options = {});

}  // namespace pmn::ad
