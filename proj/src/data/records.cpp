#include "pmn/data/records.hpp"

#include "pmn/common/error.hpp"

namespace pmn::data {

std::vector<std::size_t> SequenceRecord::positive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) out.push_back(i);
    }
    return out;
}

std::size_t SequenceRecord::positive_count() const {
    std::size_t n = 0;
    for (auto y : labels) n += y ? 1 : 0;
    return n;
}

const char* to_string(SplitPart part) {
    switch (part) {
        case SplitPart::train: return "train";
        case SplitPart::valid: return "valid";
        case SplitPart::test: return "test";
    }
    return "?";
}

const std::vector<SequenceRecord>& records(const DatasetSplit& split, SplitPart part) {
    switch (part) {
        case SplitPart::train: return split.train;
        case SplitPart::valid: return split.valid;
        case SplitPart::test: return split.test;
    }
    throw ContractError("unknown split part");
}

std::vector<SequenceRecord>& records(DatasetSplit& split, SplitPart part) {
    return const_cast<std::vector<SequenceRecord>&>(
        records(static_cast<const DatasetSplit&>(split), part));
}

}  // namespace pmn::data
