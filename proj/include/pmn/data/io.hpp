#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pmn/data/genome.hpp"
#include "pmn/data/records.hpp"

namespace pmn::data {

/// One name per line; line order is the label index.
std::vector<std::string> read_label_list(std::istream& in, const std::string& source);
std::vector<std::string> read_label_list(const std::filesystem::path& path);
void write_label_list(std::ostream& out, const std::vector<std::string>& names);

/// Tab-separated `tf_name chrom start end score`; `#` lines are comments.
std::vector<PeakRecord> read_peaks(std::istream& in, const std::string& source,
                                   const std::vector<std::string>& label_names);
std::vector<PeakRecord> read_peaks(const std::filesystem::path& path,
                                   const std::vector<std::string>& label_names);

/// Plain per-chromosome sequence file: `>name` header lines, each followed by
/// sequence lines that are concatenated.
using Genome = std::map<std::string, std::string>;
Genome read_genome(std::istream& in, const std::string& source);
Genome read_genome(const std::filesystem::path& path);
ChromLengths chrom_lengths(const Genome& genome);

/// Tab-separated `chrom start sequence positive_indices` with a `#` header.
inline constexpr const char* kDatasetHeader = "#chrom\tstart\tsequence\tpositive_indices";

void write_records(std::ostream& out, const std::vector<SequenceRecord>& records);
std::vector<SequenceRecord> read_records(std::istream& in, const std::string& source,
                                         std::size_t label_count);

/// Directory layout: labels.txt, train.tsv, valid.tsv, test.tsv.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

std::filesystem::path split_file(const std::filesystem::path& dir, SplitPart part);

}  // namespace pmn::data
