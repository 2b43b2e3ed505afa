#include "pmn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pmn/common/error.hpp"

namespace pmn::eval {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError(std::to_string(scores.size()) + " scores for " +
                             std::to_string(labels.size()) + " labels");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw ContractError("metric scores must be finite");
    }
}

// Indices by descending score; equal scores keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
    return order;
}

std::size_t count_positives(std::span<const std::uint8_t> labels) {
    std::size_t p = 0;
    for (auto y : labels) p += y ? 1 : 0;
    return p;
}

}  // namespace

std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    const std::size_t pos = count_positives(labels);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    // Twice the rank sum of positives, using midranks, keeps ties exact.
    double rank_sum_2 = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank_2 = double(i + 1) + double(j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank_sum_2 += midrank_2;
        }
        i = j;
    }
    const double u = rank_sum_2 / 2.0 - double(pos) * double(pos + 1) / 2.0;
    return u / (double(pos) * double(neg));
}

std::optional<double> aupr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels);
    const std::size_t pos = count_positives(labels);
    if (pos == 0) return std::nullopt;
    const auto order = descending_order(scores);
    double total = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]]) {
            ++tp;
            total += double(tp) / double(k + 1);
        }
    }
    return total / double(pos);
}

std::optional<double> recall_at_fdr(std::span<const double> scores,
                                    std::span<const std::uint8_t> labels, double fdr) {
    check_inputs(scores, labels);
    if (!(fdr >= 0.0 && fdr <= 1.0)) throw ContractError("fdr must lie in [0, 1]");
    const std::size_t pos = count_positives(labels);
    if (pos == 0) return std::nullopt;
    const auto order = descending_order(scores);
    const double min_precision = 1.0 - fdr;
    double best = 0.0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]] ? 1 : 0;
            ++j;
        }
        const double precision = double(tp) / double(j);
        if (precision >= min_precision) best = std::max(best, double(tp) / double(pos));
        i = j;
    }
    return best;
}

LabelMetrics label_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    LabelMetrics m;
    m.auroc = auroc(scores, labels);
    m.aupr = aupr(scores, labels);
    m.recall_fdr50 = recall_at_fdr(scores, labels, 0.5);
    m.positives = count_positives(labels);
    m.samples = labels.size();
    return m;
}

}  // namespace pmn::eval
