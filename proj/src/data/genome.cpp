#include "pmn/data/genome.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pmn/common/error.hpp"

namespace pmn::data {

std::vector<Window> build_windows(const ChromLengths& lengths, std::int64_t window,
                                  std::int64_t stride) {
    if (window <= 0) throw ConfigError("window must be positive");
    if (stride <= 0) throw ConfigError("stride must be positive");
    std::vector<Window> out;
    for (const auto& [chrom, length] : lengths) {
        for (std::int64_t s = 0; s + window <= length; s += stride) out.push_back({chrom, s});
    }
    return out;
}

std::int64_t overlap_length(Interval a, Interval b) {
    return std::max<std::int64_t>(0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

bool overlaps_majority(Interval a, Interval b, std::int64_t window) {
    return 2 * overlap_length(a, b) > window;
}

Interval peak_window(const PeakRecord& peak, std::int64_t window) {
    const std::int64_t sum = peak.start + peak.end;
    const std::int64_t mid = sum >= 0 ? sum / 2 : -((-sum + 1) / 2);
    const std::int64_t start = mid - window / 2;
    return {start, start + window};
}

LabelingResult label_windows(const std::vector<Window>& windows,
                             const std::vector<PeakRecord>& peaks, std::size_t label_count,
                             std::int64_t window, double score_threshold,
                             const ChromLengths* lengths) {
    if (window <= 0) throw ConfigError("window must be positive");
    // Per chromosome: window starts sorted, with their position in `windows`.
    std::unordered_map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> index;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        index[windows[i].chrom].push_back({windows[i].start, i});
    }
    for (auto& [chrom, starts] : index) std::sort(starts.begin(), starts.end());

    LabelingResult result;
    std::vector<std::vector<std::uint8_t>> labels(windows.size());
    for (const auto& peak : peaks) {
        if (peak.tf_index >= label_count) {
            throw IndexError("peak tf index " + std::to_string(peak.tf_index) + " out of range");
        }
        if (!std::isfinite(peak.score) || peak.start >= peak.end) {
            throw ContractError("malformed peak on " + peak.chrom);
        }
        if (!(peak.score >= score_threshold)) {
            ++result.peaks_below_threshold;
            continue;
        }
        auto it = index.find(peak.chrom);
        if (it == index.end()) {
            if (!lengths || !lengths->contains(peak.chrom)) ++result.peaks_unknown_chrom;
            else ++result.peaks_used;
            continue;
        }
        ++result.peaks_used;
        const Interval pw = peak_window(peak, window);
        const auto& starts = it->second;
        auto lo = std::upper_bound(starts.begin(), starts.end(),
                                   std::pair<std::int64_t, std::size_t>{pw.start - window,
                                                                        SIZE_MAX});
        for (auto s = lo; s != starts.end() && s->first < pw.end; ++s) {
            if (!overlaps_majority(pw, {s->first, s->first + window}, window)) continue;
            auto& y = labels[s->second];
            if (y.empty()) y.assign(label_count, 0);
            y[peak.tf_index] = 1;
        }
    }
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!labels[i].empty()) result.windows.push_back({windows[i], std::move(labels[i])});
    }
    return result;
}

std::string normalize_chrom(const std::string& chrom) {
    if (chrom.size() > 3 && (chrom.compare(0, 3, "chr") == 0 || chrom.compare(0, 3, "Chr") == 0)) {
        return chrom.substr(3);
    }
    return chrom;
}

SplitPart assign_split(const std::string& chrom, const ChromosomeSets& sets) {
    const std::string id = normalize_chrom(chrom);
    if (sets.valid.contains(id)) return SplitPart::valid;
    if (sets.test.contains(id)) return SplitPart::test;
    return SplitPart::train;
}

DatasetSplit split_by_chromosome(std::vector<SequenceRecord> records,
                                 std::vector<std::string> label_names,
                                 const ChromosomeSets& sets) {
    for (const auto& c : sets.valid) {
        if (sets.test.contains(c)) {
            throw ConfigError("chromosome " + c + " is in both the validation and test sets");
        }
    }
    DatasetSplit split;
    split.label_names = std::move(label_names);
    for (auto& r : records) {
        data::records(split, assign_split(r.chrom, sets)).push_back(std::move(r));
    }
    return split;
}

}  // namespace pmn::data
