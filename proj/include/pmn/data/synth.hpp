#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmn/common/keyvalue.hpp"
#include "pmn/data/records.hpp"

namespace pmn::data {

/// TFs activated together with probability `probability`.
struct CobindingGroup {
    std::vector<std::size_t> members;
    double probability = 0.0;
};

/// `dependent` is labelled positive only alongside `anchor`.
struct ConditionalPair {
    std::size_t anchor = 0;
    std::size_t dependent = 0;
};

struct SynthSpec {
    std::size_t labels = 8;
    std::size_t seq_len = 100;
    std::size_t motif_len = 8;
    /// Per-TF consensus; generated from the seed when empty.
    std::vector<std::string> consensus;
    double conservation = 0.85;
    /// Activation rate of TFs outside any group and not dependent.
    double solo_probability = 0.3;
    std::vector<CobindingGroup> groups;
    std::vector<ConditionalPair> conditionals;
    /// P(dependent active | anchor active).
    double conditional_probability = 0.7;
    /// P(dependent motif planted as a decoy | anchor inactive).
    double distractor_rate = 0.5;
    /// Draws per split; draws with no positive label are discarded.
    std::size_t train_count = 1000;
    std::size_t valid_count = 200;
    std::size_t test_count = 200;
    std::size_t placement_retries = 100;
    std::uint64_t seed = 1;

    void validate() const;
    /// TFs that are not the dependent side of a conditional pair.
    std::vector<std::size_t> unconditional_labels() const;
    std::vector<std::size_t> conditional_labels() const;
    std::vector<std::vector<std::size_t>> planted_groups() const;
};

/// Keys: labels, seq_len, motif_len, consensus (comma list), conservation,
/// solo_probability, group (repeatable, `0,1 @ 0.3`), conditional
/// (repeatable, `4>5`), conditional_probability, distractor_rate,
/// train_count, valid_count, test_count, placement_retries, seed.
SynthSpec read_synth_spec(KeyValueReader& reader);
SynthSpec read_synth_spec_file(const std::string& path);
void write_synth_spec(std::ostream& out, const SynthSpec& spec);

struct SynthBookkeeping {
    std::vector<std::string> consensus;
    std::size_t draws[3] = {0, 0, 0};
    std::size_t discarded[3] = {0, 0, 0};
    std::vector<std::size_t> group_activations[3];
    std::vector<std::size_t> distractors_planted[3];
};

struct SynthResult {
    DatasetSplit split;
    SynthBookkeeping bookkeeping;
};

/// Pure function of the spec.
SynthResult synth_generate(const SynthSpec& spec);

/// `group<TAB>members` and `conditional<TAB>anchor<TAB>dependent` lines plus
/// `consensus<TAB>index<TAB>string`.
void write_ground_truth(std::ostream& out, const SynthSpec& spec,
                        const SynthBookkeeping& bookkeeping);
std::vector<std::vector<std::size_t>> read_ground_truth_groups(const std::string& path);

}  // namespace pmn::data
