#pragma once

#include <cstdint>

#include "pmn/autodiff/gradcheck.hpp"
#include "pmn/model/config.hpp"

namespace pmn::model {

/// d = 8, l = 4, T = 20, K = 2 with three 8-channel conv layers.
PMNConfig tiny_config(Variant variant = Variant::pmn,
                      AttentionMode attention = AttentionMode::sigmoid);

struct ModelGradCheckOptions {
    std::uint64_t seed = 1;
    std::size_t samples = 2;  // random sequences in the checked objective
    ad::GradCheckOptions check{1e-3, 1e-2, 1e-4, 1e-6, 64, 0, true};
};

/// Finite-difference check of the full per-sample objective (summed over a
/// few random one-hot sequences and label vectors) in double precision.
/// Dropout runs with a fixed mask so the objective stays deterministic.
ad::GradCheckReport model_grad_check(const PMNConfig& config,
                                     const ModelGradCheckOptions& options = {});

}  // namespace pmn::model
