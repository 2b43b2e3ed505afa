#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmn::data {

/// One ChIP-seq peak. Intervals are 0-based half-open.
struct PeakRecord {
    std::size_t tf_index = 0;
    std::string chrom;
    std::int64_t start = 0;
    std::int64_t end = 0;
    double score = 0.0;
};

struct SequenceRecord {
    std::string chrom;
    std::int64_t start = 0;
    std::string sequence;
    std::vector<std::uint8_t> labels;  // one 0/1 entry per TF

    std::vector<std::size_t> positive_indices() const;
    std::size_t positive_count() const;
    bool operator==(const SequenceRecord&) const = default;
};

struct DatasetSplit {
    std::vector<SequenceRecord> train;
    std::vector<SequenceRecord> valid;
    std::vector<SequenceRecord> test;
    std::vector<std::string> label_names;

    std::size_t label_count() const { return label_names.size(); }
};

enum class SplitPart { train, valid, test };

const char* to_string(SplitPart part);
const std::vector<SequenceRecord>& records(const DatasetSplit& split, SplitPart part);
std::vector<SequenceRecord>& records(DatasetSplit& split, SplitPart part);

}  // namespace pmn::data
