#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pmn/common/keyvalue.hpp"

namespace pmn::model {

enum class Variant { cnn_single, cnn_multi, pmn_no_lstm, pmn };
enum class AttentionMode { sigmoid, softmax_hops };

std::string_view to_string(Variant variant);
std::string_view to_string(AttentionMode mode);
Variant parse_variant(std::string_view text);
AttentionMode parse_attention_mode(std::string_view text);

/// Whether a variant carries a prototype bank.
bool has_prototypes(Variant variant);

struct ConvLayerSpec {
    std::size_t channels;
    std::size_t width;
    bool operator==(const ConvLayerSpec&) const = default;
};

struct PMNConfig {
    std::size_t labels = 1;
    std::size_t seq_len = 200;
    std::size_t hops = 5;
    double sharpness = 20.0;
    double proto_weight = 1.0;
    AttentionMode attention = AttentionMode::sigmoid;
    Variant variant = Variant::pmn;
    std::vector<ConvLayerSpec> conv = {{512, 9}, {256, 5}, {128, 3}};
    double dropout = 0.2;
    /// Match prototypes against h^k = h_hat^k + x_hat instead of h_hat^k.
    bool attend_on_residual = false;
    /// Label predicted by a cnn_single model.
    std::size_t target_label = 0;

    /// d: the encoder output size, equal to the last conv layer's channels.
    std::size_t embed_dim() const { return conv.empty() ? 0 : conv.back().channels; }
    std::size_t output_count() const { return variant == Variant::cnn_single ? 1 : labels; }
    std::size_t max_kernel_width() const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    bool operator==(const PMNConfig&) const = default;
};

/// Reads model keys (labels, seq_len, hops, sharpness, proto_weight,
/// attention, variant, conv_channels, conv_widths, embed_dim, dropout,
/// attend_on_residual, target_label) on top of `defaults`.
PMNConfig read_model_config(KeyValueReader& reader, const PMNConfig& defaults = {});

/// Writes every model key as `key = value` lines.
void write_model_config(std::ostream& out, const PMNConfig& config);
std::string model_config_text(const PMNConfig& config);

}  // namespace pmn::model
