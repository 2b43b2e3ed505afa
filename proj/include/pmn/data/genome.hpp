#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pmn/data/records.hpp"

namespace pmn::data {

struct Window {
    std::string chrom;
    std::int64_t start = 0;
    bool operator==(const Window&) const = default;
};

struct Interval {
    std::int64_t start = 0;
    std::int64_t end = 0;
};

/// Ordered chromosome map; iteration order fixes the window order.
using ChromLengths = std::map<std::string, std::int64_t>;

/// Starts 0, stride, 2 stride, ... while start + window <= length.
std::vector<Window> build_windows(const ChromLengths& lengths, std::int64_t window = 200,
                                  std::int64_t stride = 50);

std::int64_t overlap_length(Interval a, Interval b);

/// True when the intervals share strictly more than window / 2 positions.
bool overlaps_majority(Interval a, Interval b, std::int64_t window);

/// `window`-length interval centred on the midpoint of the peak, midpoint
/// rounded down.
Interval peak_window(const PeakRecord& peak, std::int64_t window);

struct LabeledWindow {
    Window window;
    std::vector<std::uint8_t> labels;
};

struct LabelingResult {
    std::vector<LabeledWindow> windows;  // windows with at least one positive
    std::size_t peaks_used = 0;
    std::size_t peaks_below_threshold = 0;
    std::size_t peaks_unknown_chrom = 0;
};

/// Labels windows from peaks with score >= score_threshold. Output keeps the
/// input window order; known chromosomes are those present in `windows`
/// or `lengths`.
LabelingResult label_windows(const std::vector<Window>& windows,
                             const std::vector<PeakRecord>& peaks, std::size_t label_count,
                             std::int64_t window = 200, double score_threshold = 1.0,
                             const ChromLengths* lengths = nullptr);

/// Chromosome id without a leading "chr", e.g. "chr8" -> "8".
std::string normalize_chrom(const std::string& chrom);

struct ChromosomeSets {
    std::set<std::string> valid{"1", "8", "21"};
    std::set<std::string> test{"3", "12", "17"};
};

/// Partition by normalized chromosome id; everything else goes to train.
/// Throws ConfigError when the valid and test sets intersect.
DatasetSplit split_by_chromosome(std::vector<SequenceRecord> records,
                                 std::vector<std::string> label_names,
                                 const ChromosomeSets& sets = {});

SplitPart assign_split(const std::string& chrom, const ChromosomeSets& sets = {});

}  // namespace pmn::data
