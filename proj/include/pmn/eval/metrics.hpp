#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pmn::eval {

/// Mann-Whitney statistic with ties counted half. nullopt unless both
/// classes are present.
std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Average precision over positives in descending-score order; ties keep
/// input order. nullopt without positives.
std::optional<double> aupr(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Largest recall over thresholds at observed scores (predict score >= t)
/// whose precision is at least 1 - fdr; 0 when none qualifies. nullopt
/// without positives.
std::optional<double> recall_at_fdr(std::span<const double> scores,
                                    std::span<const std::uint8_t> labels, double fdr = 0.5);

struct LabelMetrics {
    std::optional<double> auroc;
    std::optional<double> aupr;
    std::optional<double> recall_fdr50;
    std::size_t positives = 0;
    std::size_t samples = 0;
};

LabelMetrics label_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace pmn::eval
