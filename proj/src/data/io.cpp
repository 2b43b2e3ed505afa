#include "pmn/data/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "pmn/common/error.hpp"
#include "pmn/common/keyvalue.hpp"

namespace pmn::data {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename V>
V parse_number(const std::string& text, const std::string& source, std::size_t line,
               const char* field) {
    V value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(source, line, std::string("bad ") + field + " '" + text + "'");
    }
    return value;
}

}  // namespace

std::vector<std::string> read_label_list(std::istream& in, const std::string& source) {
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        strip_cr(line);
        const std::string name = trim(line);
        if (name.empty() || name[0] == '#') continue;
        if (!seen.emplace(name, n).second) throw ParseError(source, n, "duplicate label " + name);
        names.push_back(name);
    }
    return names;
}

std::vector<std::string> read_label_list(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_label_list(in, path.string());
}

void write_label_list(std::ostream& out, const std::vector<std::string>& names) {
    for (const auto& n : names) out << n << '\n';
}

std::vector<PeakRecord> read_peaks(std::istream& in, const std::string& source,
                                   const std::vector<std::string>& label_names) {
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t i = 0; i < label_names.size(); ++i) lookup[label_names[i]] = i;
    std::vector<PeakRecord> peaks;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        strip_cr(line);
        if (trim(line).empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 5) {
            throw ParseError(source, n, "expected 5 tab-separated fields, got " +
                                            std::to_string(fields.size()));
        }
        auto it = lookup.find(fields[0]);
        if (it == lookup.end()) throw ParseError(source, n, "unknown TF " + fields[0]);
        PeakRecord p;
        p.tf_index = it->second;
        p.chrom = fields[1];
        p.start = parse_number<std::int64_t>(fields[2], source, n, "start");
        p.end = parse_number<std::int64_t>(fields[3], source, n, "end");
        p.score = parse_number<double>(fields[4], source, n, "score");
        if (p.chrom.empty()) throw ParseError(source, n, "empty chromosome");
        if (p.start < 0 || p.start >= p.end) throw ParseError(source, n, "need 0 <= start < end");
        if (!std::isfinite(p.score)) throw ParseError(source, n, "score is not finite");
        peaks.push_back(std::move(p));
    }
    return peaks;
}

std::vector<PeakRecord> read_peaks(const std::filesystem::path& path,
                                   const std::vector<std::string>& label_names) {
    auto in = open_input(path);
    return read_peaks(in, path.string(), label_names);
}

Genome read_genome(std::istream& in, const std::string& source) {
    Genome genome;
    std::string* current = nullptr;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '>') {
            std::string name = trim(line.substr(1));
            if (const auto space = name.find_first_of(" \t"); space != std::string::npos) {
                name.resize(space);
            }
            if (name.empty()) throw ParseError(source, n, "empty sequence name");
            auto [it, fresh] = genome.emplace(name, std::string());
            if (!fresh) throw ParseError(source, n, "duplicate sequence " + name);
            current = &it->second;
            continue;
        }
        if (!current) throw ParseError(source, n, "sequence data before the first '>' header");
        for (char c : trim(line)) {
            switch (c) {
                case 'A': case 'C': case 'G': case 'T': case 'N': current->push_back(c); break;
                case 'a': case 'c': case 'g': case 't': case 'n':
                    current->push_back(static_cast<char>(c - 'a' + 'A'));
                    break;
                default:
                    throw ParseError(source, n, std::string("invalid base '") + c + "'");
            }
        }
    }
    return genome;
}

Genome read_genome(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_genome(in, path.string());
}

ChromLengths chrom_lengths(const Genome& genome) {
    ChromLengths out;
    for (const auto& [name, seq] : genome) out[name] = static_cast<std::int64_t>(seq.size());
    return out;
}

void write_records(std::ostream& out, const std::vector<SequenceRecord>& records) {
    out << kDatasetHeader << '\n';
    for (const auto& r : records) {
        out << r.chrom << '\t' << r.start << '\t' << r.sequence << '\t';
        bool first = true;
        for (std::size_t i : r.positive_indices()) {
            if (!first) out << ',';
            out << i;
            first = false;
        }
        out << '\n';
    }
}

std::vector<SequenceRecord> read_records(std::istream& in, const std::string& source,
                                         std::size_t label_count) {
    std::vector<SequenceRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 4) {
            throw ParseError(source, n, "expected 4 tab-separated fields, got " +
                                            std::to_string(fields.size()));
        }
        SequenceRecord r;
        r.chrom = fields[0];
        r.start = parse_number<std::int64_t>(fields[1], source, n, "start");
        r.sequence = fields[2];
        if (r.sequence.empty()) throw ParseError(source, n, "empty sequence");
        if (!out.empty() && out.front().sequence.size() != r.sequence.size()) {
            throw ParseError(source, n, "sequence length " + std::to_string(r.sequence.size()) +
                                            " differs from " +
                                            std::to_string(out.front().sequence.size()));
        }
        r.labels.assign(label_count, 0);
        std::int64_t previous = -1;
        for (const auto& item : split(fields[3], ',')) {
            const auto idx = parse_number<std::int64_t>(item, source, n, "label index");
            if (idx < 0 || static_cast<std::size_t>(idx) >= label_count) {
                throw ParseError(source, n, "label index " + item + " out of range");
            }
            if (idx <= previous) throw ParseError(source, n, "label indices must be sorted");
            r.labels[idx] = 1;
            previous = idx;
        }
        if (previous < 0) throw ParseError(source, n, "record has no positive label");
        out.push_back(std::move(r));
    }
    return out;
}

std::filesystem::path split_file(const std::filesystem::path& dir, SplitPart part) {
    return dir / (std::string(to_string(part)) + ".tsv");
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "labels.txt");
        write_label_list(out, split.label_names);
    }
    for (SplitPart part : {SplitPart::train, SplitPart::valid, SplitPart::test}) {
        auto out = open_output(split_file(dir, part));
        write_records(out, records(split, part));
    }
}

DatasetSplit read_dataset(const std::filesystem::path& dir) {
    DatasetSplit split;
    split.label_names = read_label_list(dir / "labels.txt");
    if (split.label_names.empty()) throw ConfigError("no labels in " + (dir / "labels.txt").string());
    for (SplitPart part : {SplitPart::train, SplitPart::valid, SplitPart::test}) {
        const auto path = split_file(dir, part);
        auto in = open_input(path);
        records(split, part) = read_records(in, path.string(), split.label_count());
    }
    return split;
}

}  // namespace pmn::data
