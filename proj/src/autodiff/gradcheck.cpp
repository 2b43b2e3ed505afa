#include "pmn/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmn/common/rng.hpp"

namespace pmn::ad {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

// Full shuffle: elements past the probe quota serve as fallbacks for kinks.
std::vector<std::size_t> shuffled_indices(std::size_t size, Rng& rng) {
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < size; ++i) {
        const std::size_t j = i + rng.below(size - i);
        std::swap(order[i], order[j]);
    }
    return order;
}

}  // namespace

GradCheckReport grad_check(const LossFunction& loss, const std::vector<NamedParameter>& params,
                           const GradCheckOptions& options) {
    GradCheckReport report;
    const LossEvaluation base = loss(true);
    if (!std::isfinite(base.loss)) {
        report.failure = "non-finite loss at the unperturbed parameters";
        return report;
    }
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());

    Rng rng(options.seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& tensor = *params[pi].tensor;
        ParameterCheck check;
        check.name = params[pi].name;

        double sq = 0;
        for (double v : tensor.values()) sq += v * v;
        const double rms = std::sqrt(sq / static_cast<double>(tensor.size()));
        const double step = options.relative_step * std::max(rms, options.min_scale);

        const std::size_t wanted = std::min(tensor.size(), options.max_probes_per_parameter);
        for (std::size_t index : shuffled_indices(tensor.size(), rng)) {
            if (check.probes == wanted) break;
            const double original = tensor[index];
            // Central differences at h (and h/2 when extrapolating).
            const std::size_t levels = options.richardson ? 2 : 1;
            double diffs[2] = {0.0, 0.0};
            bool kink = false;
            for (std::size_t level = 0; level < levels && !kink; ++level) {
                const double h = level == 0 ? step : step / 2.0;
                tensor[index] = original + h;
                const LossEvaluation plus = loss(false);
                tensor[index] = original - h;
                const LossEvaluation minus = loss(false);
                tensor[index] = original;
                if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
                    report.failure = "non-finite loss probing " + check.name + "[" +
                                     std::to_string(index) + "]";
                    report.parameters.push_back(check);
                    return report;
                }
                kink = plus.branch_signature != base.branch_signature ||
                       minus.branch_signature != base.branch_signature;
                diffs[level] = (plus.loss - minus.loss) / (2.0 * h);
            }
            if (kink) {
                ++check.kinks_skipped;
                continue;
            }
            const double numeric =
                options.richardson ? (4.0 * diffs[1] - diffs[0]) / 3.0 : diffs[0];
            const double a = analytic[pi][index];
            const double err = relative_error(a, numeric, options.denominator_floor);
            ++check.probes;
            if (check.probes == 1 || err > check.max_relative_error) {
                check.max_relative_error = err;
                check.worst_index = index;
                check.worst_analytic = a;
                check.worst_numeric = numeric;
            }
        }
        report.total_probes += check.probes;
        report.kinks_skipped += check.kinks_skipped;
        report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
        report.parameters.push_back(std::move(check));
    }
    report.passed = report.max_relative_error < options.tolerance;
    return report;
}

}  // namespace pmn::ad
