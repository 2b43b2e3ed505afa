#include "pmn/data/synth.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>

#include "pmn/common/error.hpp"
#include "pmn/common/rng.hpp"

namespace pmn::data {

namespace {

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(std::string(what) + " must lie in [0, 1], got " + format_double(p));
    }
}

int base_index(char c) {
    switch (c) {
        case 'A': return 0;
        case 'C': return 1;
        case 'G': return 2;
        case 'T': return 3;
    }
    return -1;
}

std::size_t hamming(const std::string& a, const std::string& b) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

std::vector<std::string> make_consensus(const SynthSpec& spec) {
    if (!spec.consensus.empty()) return spec.consensus;
    Rng rng(Rng::derive(spec.seed, 0xc0de));
    std::vector<std::string> out;
    const std::size_t min_distance = spec.motif_len / 2;
    int misses = 0;
    while (out.size() < spec.labels) {
        std::string candidate;
        for (std::size_t i = 0; i < spec.motif_len; ++i) candidate.push_back(kBases[rng.below(4)]);
        bool distinct = true;
        for (const auto& other : out) distinct = distinct && hamming(candidate, other) >= min_distance;
        if (distinct || ++misses > 1000) {
            out.push_back(std::move(candidate));
            misses = 0;
        }
    }
    return out;
}

struct Planner {
    const SynthSpec& spec;
    const std::vector<std::string>& consensus;
    std::vector<int> group_of;     // group index or -1
    std::vector<int> anchor_of;    // anchor index for dependents or -1

    std::string sample_motif(std::size_t tf, Rng& rng) const {
        std::string motif = consensus[tf];
        for (char& c : motif) {
            if (rng.uniform() < spec.conservation) continue;
            const int keep = base_index(c);
            int other = static_cast<int>(rng.below(3));
            if (other >= keep) ++other;
            c = kBases[other];
        }
        return motif;
    }

    // Plants the motifs of `tfs` in order at uniform non-overlapping starts.
    void plant(std::string& sequence, const std::vector<std::size_t>& tfs, Rng& rng) const {
        const std::size_t m = spec.motif_len;
        const std::size_t slots = spec.seq_len - m + 1;
        for (std::size_t attempt = 0; attempt < spec.placement_retries; ++attempt) {
            std::vector<std::size_t> starts;
            bool ok = true;
            for (std::size_t k = 0; k < tfs.size() && ok; ++k) {
                std::vector<std::size_t> free;
                for (std::size_t s = 0; s < slots; ++s) {
                    bool clash = false;
                    for (std::size_t other : starts) clash = clash || (s < other + m && other < s + m);
                    if (!clash) free.push_back(s);
                }
                if (free.empty()) ok = false;
                else starts.push_back(free[rng.below(free.size())]);
            }
            if (!ok) continue;
            for (std::size_t k = 0; k < tfs.size(); ++k) {
                sequence.replace(starts[k], m, sample_motif(tfs[k], rng));
            }
            return;
        }
        throw GenerationError("could not place " + std::to_string(tfs.size()) +
                              " non-overlapping motifs in " + std::to_string(spec.seq_len) +
                              " bases after " + std::to_string(spec.placement_retries) +
                              " attempts");
    }
};

}  // namespace

void SynthSpec::validate() const {
    if (labels == 0) throw ConfigError("synth: labels must be at least 1");
    if (motif_len == 0) throw ConfigError("synth: motif_len must be at least 1");
    if (labels * motif_len > seq_len) {
        throw ConfigError("synth: " + std::to_string(labels) + " motifs of length " +
                          std::to_string(motif_len) + " do not fit in seq_len " +
                          std::to_string(seq_len));
    }
    if (placement_retries == 0) throw ConfigError("synth: placement_retries must be at least 1");
    if (!consensus.empty()) {
        if (consensus.size() != labels) {
            throw ConfigError("synth: " + std::to_string(consensus.size()) +
                              " consensus strings for " + std::to_string(labels) + " labels");
        }
        for (const auto& c : consensus) {
            if (c.size() != motif_len) throw ConfigError("synth: consensus " + c + " has wrong length");
            for (char b : c) {
                if (base_index(b) < 0) throw ConfigError("synth: consensus " + c + " is not over ACGT");
            }
        }
    }
    check_probability(conservation, "synth: conservation");
    check_probability(solo_probability, "synth: solo_probability");
    check_probability(conditional_probability, "synth: conditional_probability");
    check_probability(distractor_rate, "synth: distractor_rate");
    std::set<std::size_t> grouped;
    for (const auto& g : groups) {
        check_probability(g.probability, "synth: group probability");
        if (g.members.empty()) throw ConfigError("synth: empty co-binding group");
        for (std::size_t m : g.members) {
            if (m >= labels) throw ConfigError("synth: group member " + std::to_string(m) + " out of range");
            if (!grouped.insert(m).second) {
                throw ConfigError("synth: label " + std::to_string(m) + " is in two groups");
            }
        }
    }
    std::set<std::size_t> dependents, anchors;
    for (const auto& c : conditionals) {
        if (c.anchor >= labels || c.dependent >= labels) {
            throw ConfigError("synth: conditional pair index out of range");
        }
        if (c.anchor == c.dependent) throw ConfigError("synth: conditional pair on a single label");
        if (grouped.contains(c.dependent)) {
            throw ConfigError("synth: dependent label " + std::to_string(c.dependent) +
                              " is also in a co-binding group");
        }
        if (!dependents.insert(c.dependent).second) {
            throw ConfigError("synth: label " + std::to_string(c.dependent) + " depends on two anchors");
        }
        anchors.insert(c.anchor);
    }
    for (std::size_t a : anchors) {
        if (dependents.contains(a)) {
            throw ConfigError("synth: label " + std::to_string(a) + " is both anchor and dependent");
        }
    }
}

std::vector<std::size_t> SynthSpec::conditional_labels() const {
    std::vector<std::size_t> out;
    for (const auto& c : conditionals) out.push_back(c.dependent);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> SynthSpec::unconditional_labels() const {
    const auto dep = conditional_labels();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels; ++i) {
        if (!std::binary_search(dep.begin(), dep.end(), i)) out.push_back(i);
    }
    return out;
}

std::vector<std::vector<std::size_t>> SynthSpec::planted_groups() const {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& g : groups) out.push_back(g.members);
    return out;
}

SynthSpec read_synth_spec(KeyValueReader& reader) {
    SynthSpec s;
    auto count = [&](const char* key, std::size_t fallback) {
        const auto v = reader.get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError(std::string("synth: ") + key + " must be non-negative");
        return static_cast<std::size_t>(v);
    };
    s.labels = count("labels", s.labels);
    s.seq_len = count("seq_len", s.seq_len);
    s.motif_len = count("motif_len", s.motif_len);
    if (auto c = reader.take("consensus")) {
        for (const auto& item : split(*c, ',')) s.consensus.push_back(trim(item));
    }
    s.conservation = reader.get_double("conservation", s.conservation);
    s.solo_probability = reader.get_double("solo_probability", s.solo_probability);
    for (const auto& text : reader.take_all("group")) {
        const auto at = text.find('@');
        if (at == std::string::npos) throw ConfigError("synth: group '" + text + "' needs '@ probability'");
        CobindingGroup g;
        for (auto v : parse_int_list(trim(text.substr(0, at)))) {
            if (v < 0) throw ConfigError("synth: negative group member");
            g.members.push_back(static_cast<std::size_t>(v));
        }
        try {
            g.probability = std::stod(trim(text.substr(at + 1)));
        } catch (const std::exception&) {
            throw ConfigError("synth: bad group probability in '" + text + "'");
        }
        s.groups.push_back(std::move(g));
    }
    for (const auto& text : reader.take_all("conditional")) {
        const auto gt = text.find('>');
        if (gt == std::string::npos) throw ConfigError("synth: conditional '" + text + "' needs 'a>b'");
        const auto a = parse_int_list(trim(text.substr(0, gt)));
        const auto b = parse_int_list(trim(text.substr(gt + 1)));
        if (a.size() != 1 || b.size() != 1 || a[0] < 0 || b[0] < 0) {
            throw ConfigError("synth: bad conditional '" + text + "'");
        }
        s.conditionals.push_back({static_cast<std::size_t>(a[0]), static_cast<std::size_t>(b[0])});
    }
    s.conditional_probability = reader.get_double("conditional_probability", s.conditional_probability);
    s.distractor_rate = reader.get_double("distractor_rate", s.distractor_rate);
    s.train_count = count("train_count", s.train_count);
    s.valid_count = count("valid_count", s.valid_count);
    s.test_count = count("test_count", s.test_count);
    s.placement_retries = count("placement_retries", s.placement_retries);
    s.seed = static_cast<std::uint64_t>(reader.get_int("seed", static_cast<std::int64_t>(s.seed)));
    s.validate();
    return s;
}

SynthSpec read_synth_spec_file(const std::string& path) {
    KeyValueReader reader(parse_key_values_file(path));
    SynthSpec s = read_synth_spec(reader);
    reader.reject_unknown();
    return s;
}

void write_synth_spec(std::ostream& out, const SynthSpec& s) {
    out << "labels = " << s.labels << '\n'
        << "seq_len = " << s.seq_len << '\n'
        << "motif_len = " << s.motif_len << '\n';
    if (!s.consensus.empty()) {
        out << "consensus = ";
        for (std::size_t i = 0; i < s.consensus.size(); ++i) out << (i ? "," : "") << s.consensus[i];
        out << '\n';
    }
    out << "conservation = " << format_double(s.conservation) << '\n'
        << "solo_probability = " << format_double(s.solo_probability) << '\n';
    for (const auto& g : s.groups) {
        out << "group = ";
        for (std::size_t i = 0; i < g.members.size(); ++i) out << (i ? "," : "") << g.members[i];
        out << " @ " << format_double(g.probability) << '\n';
    }
    for (const auto& c : s.conditionals) out << "conditional = " << c.anchor << '>' << c.dependent << '\n';
    out << "conditional_probability = " << format_double(s.conditional_probability) << '\n'
        << "distractor_rate = " << format_double(s.distractor_rate) << '\n'
        << "train_count = " << s.train_count << '\n'
        << "valid_count = " << s.valid_count << '\n'
        << "test_count = " << s.test_count << '\n'
        << "placement_retries = " << s.placement_retries << '\n'
        << "seed = " << s.seed << '\n';
}

SynthResult synth_generate(const SynthSpec& spec) {
    spec.validate();
    SynthResult result;
    result.bookkeeping.consensus = make_consensus(spec);
    for (std::size_t i = 0; i < spec.labels; ++i) {
        result.split.label_names.push_back("TF" + std::to_string(i));
    }

    Planner planner{spec, result.bookkeeping.consensus,
                    std::vector<int>(spec.labels, -1), std::vector<int>(spec.labels, -1)};
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        for (std::size_t m : spec.groups[g].members) planner.group_of[m] = static_cast<int>(g);
    }
    for (const auto& c : spec.conditionals) planner.anchor_of[c.dependent] = static_cast<int>(c.anchor);

    const std::size_t counts[3] = {spec.train_count, spec.valid_count, spec.test_count};
    const SplitPart parts[3] = {SplitPart::train, SplitPart::valid, SplitPart::test};
    for (int p = 0; p < 3; ++p) {
        auto& book = result.bookkeeping;
        book.group_activations[p].assign(spec.groups.size(), 0);
        book.distractors_planted[p].assign(spec.labels, 0);
        Rng rng(Rng::derive(spec.seed, 0x5b11700 + static_cast<std::uint64_t>(p)));
        auto& out = records(result.split, parts[p]);
        for (std::size_t n = 0; n < counts[p]; ++n) {
            ++book.draws[p];
            std::vector<std::uint8_t> active(spec.labels, 0);
            for (std::size_t g = 0; g < spec.groups.size(); ++g) {
                if (rng.bernoulli(spec.groups[g].probability)) {
                    ++book.group_activations[p][g];
                    for (std::size_t m : spec.groups[g].members) active[m] = 1;
                }
            }
            for (std::size_t i = 0; i < spec.labels; ++i) {
                if (planner.group_of[i] < 0 && planner.anchor_of[i] < 0 &&
                    rng.bernoulli(spec.solo_probability)) {
                    active[i] = 1;
                }
            }
            std::vector<std::uint8_t> decoy(spec.labels, 0);
            for (const auto& c : spec.conditionals) {
                if (active[c.anchor]) {
                    if (rng.bernoulli(spec.conditional_probability)) active[c.dependent] = 1;
                } else if (rng.bernoulli(spec.distractor_rate)) {
                    decoy[c.dependent] = 1;
                    ++book.distractors_planted[p][c.dependent];
                }
            }
            if (std::none_of(active.begin(), active.end(), [](auto v) { return v != 0; })) {
                ++book.discarded[p];
                continue;
            }
            std::string sequence(spec.seq_len, 'A');
            for (char& c : sequence) c = kBases[rng.below(4)];
            std::vector<std::size_t> planted;
            for (std::size_t i = 0; i < spec.labels; ++i) {
                if (active[i] || decoy[i]) planted.push_back(i);
            }
            planner.plant(sequence, planted, rng);
            out.push_back({std::string("synth_") + to_string(parts[p]), static_cast<std::int64_t>(n),
                           std::move(sequence), std::move(active)});
        }
    }
    return result;
}

void write_ground_truth(std::ostream& out, const SynthSpec& spec,
                        const SynthBookkeeping& bookkeeping) {
    for (const auto& g : spec.groups) {
        out << "group\t";
        for (std::size_t i = 0; i < g.members.size(); ++i) out << (i ? "," : "") << g.members[i];
        out << '\n';
    }
    for (const auto& c : spec.conditionals) out << "conditional\t" << c.anchor << '\t' << c.dependent << '\n';
    for (std::size_t i = 0; i < bookkeeping.consensus.size(); ++i) {
        out << "consensus\t" << i << '\t' << bookkeeping.consensus[i] << '\n';
    }
}

std::vector<std::vector<std::size_t>> read_ground_truth_groups(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::vector<std::vector<std::size_t>> groups;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const auto fields = split(trim(line), '\t');
        if (fields.size() < 2 || fields[0] != "group") continue;
        std::vector<std::size_t> members;
        try {
            for (auto v : parse_int_list(fields[1])) {
                if (v < 0) throw ConfigError("negative member");
                members.push_back(static_cast<std::size_t>(v));
            }
        } catch (const ConfigError& e) {
            throw ParseError(path, n, e.what());
        }
        groups.push_back(std::move(members));
    }
    return groups;
}

}  // namespace pmn::data
