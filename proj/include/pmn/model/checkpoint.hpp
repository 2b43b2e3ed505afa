#pragma once

// Binary checkpoint: magic "PMN1", u32 version, config text, epoch, best
// validation auROC, then named float32 arrays. A trailer holds the payload
// length and its FNV-1a-64 hash; all integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmn/model/params.hpp"

namespace pmn::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    PMNConfig config;
    ModelParams<float> params;
    std::uint32_t epoch = 0;
    double valid_auroc = 0.0;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and checks the stored configuration against `expected`; a mismatch
/// raises ConfigError naming the first differing key.
Checkpoint load_checkpoint(const std::filesystem::path& path, const PMNConfig& expected);

/// Text manifest: one line per array with name and shape.
std::string checkpoint_manifest(const Checkpoint& checkpoint);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

}  // namespace pmn::model
