#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmn/data/records.hpp"

namespace pmn::data {

struct DatasetStats {
    std::size_t samples = 0;
    std::size_t cobinding_samples = 0;  // two or more positive labels
    double mean_positives = 0.0;
    std::vector<std::size_t> positives_per_label;
    std::vector<double> positive_rate;  // per label, in [0, 1]
};

DatasetStats dataset_stats(const std::vector<SequenceRecord>& records, std::size_t label_count);

/// Table of totals, co-binding share and per-TF positive percentages.
std::string stats_report(const DatasetSplit& split);

/// Record indices grouped into batches, shuffled by a Fisher-Yates pass keyed
/// by (seed, epoch). The final partial batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

std::vector<std::size_t> shuffled_order(std::size_t count, std::uint64_t seed,
                                        std::uint64_t epoch);

}  // namespace pmn::data
