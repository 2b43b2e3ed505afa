#include "pmn/data/batch.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "pmn/common/error.hpp"
#include "pmn/common/rng.hpp"

namespace pmn::data {

DatasetStats dataset_stats(const std::vector<SequenceRecord>& records, std::size_t label_count) {
    DatasetStats s;
    s.samples = records.size();
    s.positives_per_label.assign(label_count, 0);
    std::size_t total = 0;
    for (const auto& r : records) {
        if (r.labels.size() != label_count) {
            throw DimensionError("record with " + std::to_string(r.labels.size()) +
                                 " labels in a " + std::to_string(label_count) + "-label set");
        }
        const std::size_t k = r.positive_count();
        total += k;
        if (k >= 2) ++s.cobinding_samples;
        for (std::size_t i = 0; i < label_count; ++i) s.positives_per_label[i] += r.labels[i];
    }
    s.mean_positives = s.samples ? double(total) / double(s.samples) : 0.0;
    s.positive_rate.assign(label_count, 0.0);
    if (s.samples) {
        for (std::size_t i = 0; i < label_count; ++i) {
            s.positive_rate[i] = double(s.positives_per_label[i]) / double(s.samples);
        }
    }
    return s;
}

std::string stats_report(const DatasetSplit& split) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "split\tsamples\tmean_tfs_per_sample\tcobinding_percent\n";
    std::vector<DatasetStats> stats;
    for (SplitPart part : {SplitPart::train, SplitPart::valid, SplitPart::test}) {
        stats.push_back(dataset_stats(records(split, part), split.label_count()));
        const auto& s = stats.back();
        out << to_string(part) << '\t' << s.samples << '\t' << s.mean_positives << '\t'
            << (s.samples ? 100.0 * double(s.cobinding_samples) / double(s.samples) : 0.0)
            << '\n';
    }
    out << "\nlabel\ttrain_positive_percent\tvalid_positive_percent\ttest_positive_percent\n";
    for (std::size_t i = 0; i < split.label_count(); ++i) {
        out << split.label_names[i];
        for (const auto& s : stats) out << '\t' << 100.0 * s.positive_rate[i];
        out << '\n';
    }
    return out.str();
}

std::vector<std::size_t> shuffled_order(std::size_t count, std::uint64_t seed,
                                        std::uint64_t epoch) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::derive(Rng::derive(seed, 0xba7c4), epoch));
    for (std::size_t i = count; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    return order;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    const auto order = shuffled_order(count, seed, epoch);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < count; i += batch_size) {
        const std::size_t end = std::min(count, i + batch_size);
        batches.emplace_back(order.begin() + i, order.begin() + end);
    }
    return batches;
}

}  // namespace pmn::data
