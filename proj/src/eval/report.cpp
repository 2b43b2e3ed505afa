#include "pmn/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "pmn/common/error.hpp"
#include "pmn/common/keyvalue.hpp"

namespace pmn::eval {

const char* to_string(Metric metric) {
    switch (metric) {
        case Metric::auroc: return "auroc";
        case Metric::aupr: return "aupr";
        case Metric::recall_fdr50: return "recall_fdr50";
    }
    return "?";
}

std::optional<double> metric_value(const LabelMetrics& m, Metric metric) {
    switch (metric) {
        case Metric::auroc: return m.auroc;
        case Metric::aupr: return m.aupr;
        case Metric::recall_fdr50: return m.recall_fdr50;
    }
    return std::nullopt;
}

MetricSummary summarize_values(const std::vector<std::optional<double>>& values) {
    if (values.empty()) throw ContractError("cannot summarize an empty metric array");
    MetricSummary s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++s.defined;
        }
    }
    if (s.defined == 0) {
        s.mean = NAN;
        s.std = NAN;
        return s;
    }
    s.mean = sum / double(s.defined);
    if (s.defined > 1) {
        double ss = 0.0;
        for (const auto& v : values) {
            if (v) ss += (*v - s.mean) * (*v - s.mean);
        }
        s.std = std::sqrt(ss / double(s.defined - 1));
    }
    return s;
}

double percent_increase(double value, double base) {
    if (base == 0.0) throw ContractError("percent increase over a zero baseline");
    return 100.0 * (value - base) / base;
}

namespace {

MetricSummary summarize_subset(const std::vector<LabelMetrics>& per_label,
                               const std::vector<std::size_t>& labels, Metric metric) {
    std::vector<std::optional<double>> values;
    for (std::size_t i : labels) values.push_back(metric_value(per_label[i], metric));
    return summarize_values(values);
}

void write_value(std::ostream& out, double v) {
    if (std::isnan(v)) out << "NA";
    else out << format_double(v);
}

}  // namespace

MetricReport summarize(const std::string& model, const std::vector<std::string>& label_names,
                       const std::vector<LabelMetrics>& per_label, const MetricReport* baseline,
                       const std::vector<std::size_t>* sample_counts, std::size_t subset_size) {
    if (per_label.empty()) throw ContractError("cannot summarize an empty metric array");
    if (label_names.size() != per_label.size()) {
        throw DimensionError("report has " + std::to_string(label_names.size()) + " names for " +
                             std::to_string(per_label.size()) + " labels");
    }
    MetricReport r;
    r.model = model;
    r.label_names = label_names;
    r.per_label = per_label;
    std::vector<std::size_t> all(per_label.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (Metric m : kMetrics) r.metrics[static_cast<int>(m)] = summarize_subset(per_label, all, m);
    for (std::size_t i = 0; i < per_label.size(); ++i) {
        if (!per_label[i].auroc) r.undefined_labels.push_back(i);
    }
    if (baseline) {
        if (baseline->label_names != label_names) {
            throw ContractError("baseline report " + baseline->model + " covers different labels");
        }
        r.baseline = baseline->model;
        for (Metric m : kMetrics) {
            const int k = static_cast<int>(m);
            const double base = baseline->metrics[k].mean;
            if (!std::isnan(base) && !std::isnan(r.metrics[k].mean) && base != 0.0) {
                r.percent_increase[k] = percent_increase(r.metrics[k].mean, base);
            }
        }
    }
    if (sample_counts) {
        if (sample_counts->size() != per_label.size()) {
            throw DimensionError("sample counts do not match the label count");
        }
        std::vector<std::size_t> order = all;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return (*sample_counts)[i] < (*sample_counts)[j];
        });
        const std::size_t k = std::min(subset_size, order.size());
        SubsetSummary smallest{"smallest_" + std::to_string(k), {order.begin(), order.begin() + k}, {}};
        SubsetSummary largest{"largest_" + std::to_string(k), {order.end() - k, order.end()}, {}};
        for (auto* s : {&smallest, &largest}) {
            std::sort(s->labels.begin(), s->labels.end());
            for (Metric m : kMetrics) {
                s->metrics[static_cast<int>(m)] = summarize_subset(per_label, s->labels, m);
            }
            r.subsets.push_back(*s);
        }
    }
    return r;
}

void write_report_tsv(std::ostream& out, const MetricReport& report) {
    out << "model\tsubset\tmetric\tmean\tstd\tdefined";
    if (!report.baseline.empty()) out << "\tpercent_increase_over_" << report.baseline;
    out << '\n';
    for (Metric m : kMetrics) {
        const int k = static_cast<int>(m);
        const auto& s = report.metrics[k];
        out << report.model << "\tall\t" << to_string(m) << '\t';
        write_value(out, s.mean);
        out << '\t';
        write_value(out, s.std);
        out << '\t' << s.defined;
        if (!report.baseline.empty()) {
            out << '\t';
            write_value(out, report.percent_increase[k].value_or(NAN));
        }
        out << '\n';
    }
    for (const auto& sub : report.subsets) {
        for (Metric m : kMetrics) {
            const auto& s = sub.metrics[static_cast<int>(m)];
            out << report.model << '\t' << sub.name << '\t' << to_string(m) << '\t';
            write_value(out, s.mean);
            out << '\t';
            write_value(out, s.std);
            out << '\t' << s.defined;
            if (!report.baseline.empty()) out << "\tNA";
            out << '\n';
        }
    }
}

void write_per_label_tsv(std::ostream& out, const MetricReport& report) {
    out << "label\tsamples\tpositives\tauroc\taupr\trecall_fdr50\n";
    for (std::size_t i = 0; i < report.per_label.size(); ++i) {
        const auto& m = report.per_label[i];
        out << report.label_names[i] << '\t' << m.samples << '\t' << m.positives;
        for (Metric metric : kMetrics) {
            out << '\t';
            write_value(out, metric_value(m, metric).value_or(NAN));
        }
        out << '\n';
    }
}

}  // namespace pmn::eval
