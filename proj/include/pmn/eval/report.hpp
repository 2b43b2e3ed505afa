#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pmn/eval/metrics.hpp"

namespace pmn::eval {

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;         // sample standard deviation; 0 for a single value
    std::size_t defined = 0;  // labels contributing
};

enum class Metric { auroc, aupr, recall_fdr50 };
inline constexpr Metric kMetrics[] = {Metric::auroc, Metric::aupr, Metric::recall_fdr50};
const char* to_string(Metric metric);
std::optional<double> metric_value(const LabelMetrics& m, Metric metric);

struct SubsetSummary {
    std::string name;
    std::vector<std::size_t> labels;
    MetricSummary metrics[3];
};

struct MetricReport {
    std::string model;
    std::vector<std::string> label_names;
    std::vector<LabelMetrics> per_label;
    MetricSummary metrics[3];
    std::vector<std::size_t> undefined_labels;  // labels with an undefined auROC
    std::string baseline;
    std::optional<double> percent_increase[3];
    std::vector<SubsetSummary> subsets;

    const MetricSummary& summary(Metric m) const { return metrics[static_cast<int>(m)]; }
};

/// Mean and sample std of the defined values; throws ContractError on an empty array.
MetricSummary summarize_values(const std::vector<std::optional<double>>& values);

/// 100 (m - m_base) / m_base.
double percent_increase(double value, double base);

/// Aggregates per-label metrics. With `sample_counts`, adds summaries over the
/// `subset_size` labels with the fewest and the most training samples.
MetricReport summarize(const std::string& model, const std::vector<std::string>& label_names,
                       const std::vector<LabelMetrics>& per_label,
                       const MetricReport* baseline = nullptr,
                       const std::vector<std::size_t>* sample_counts = nullptr,
                       std::size_t subset_size = 10);

/// `model metric mean std defined [increase]` rows, then subset rows.
void write_report_tsv(std::ostream& out, const MetricReport& report);
/// One row per label with all three metrics; undefined values print as NA.
void write_per_label_tsv(std::ostream& out, const MetricReport& report);

}  // namespace pmn::eval
