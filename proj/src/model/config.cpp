#include "pmn/model/config.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "pmn/common/error.hpp"

namespace pmn::model {

std::string_view to_string(Variant variant) {
    switch (variant) {
        case Variant::cnn_single: return "cnn_single";
        case Variant::cnn_multi: return "cnn_multi";
        case Variant::pmn_no_lstm: return "pmn_no_lstm";
        case Variant::pmn: return "pmn";
    }
    return "?";
}

std::string_view to_string(AttentionMode mode) {
    return mode == AttentionMode::sigmoid ? "sigmoid" : "softmax_hops";
}

Variant parse_variant(std::string_view text) {
    for (Variant v : {Variant::cnn_single, Variant::cnn_multi, Variant::pmn_no_lstm, Variant::pmn}) {
        if (text == to_string(v)) return v;
    }
    throw ConfigError("unknown model variant '" + std::string(text) +
                      "' (expected cnn_single, cnn_multi, pmn_no_lstm or pmn)");
}

AttentionMode parse_attention_mode(std::string_view text) {
    if (text == "sigmoid") return AttentionMode::sigmoid;
    if (text == "softmax_hops" || text == "softmax") return AttentionMode::softmax_hops;
    throw ConfigError("unknown attention mode '" + std::string(text) +
                      "' (expected sigmoid or softmax_hops)");
}

bool has_prototypes(Variant variant) {
    return variant == Variant::pmn || variant == Variant::pmn_no_lstm;
}

std::size_t PMNConfig::max_kernel_width() const {
    std::size_t widest = 0;
    for (const auto& layer : conv) widest = std::max(widest, layer.width);
    return widest;
}

void PMNConfig::validate() const {
    if (labels == 0) throw ConfigError("labels must be positive");
    if (conv.empty()) throw ConfigError("at least one conv layer is required");
    for (const auto& layer : conv) {
        if (layer.channels == 0) throw ConfigError("conv channel counts must be positive");
        if (layer.width % 2 == 0) throw ConfigError("conv widths must be odd");
    }
    if (seq_len < max_kernel_width()) {
        throw ConfigError("seq_len " + std::to_string(seq_len) + " is shorter than the widest kernel");
    }
    if (variant == Variant::pmn && hops == 0) throw ConfigError("hops must be at least 1 for pmn");
    if (!(sharpness > 0)) throw ConfigError("sharpness must be positive");
    if (!(proto_weight >= 0)) throw ConfigError("proto_weight must be non-negative");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must be in [0, 1)");
    if (variant == Variant::cnn_single && target_label >= labels) {
        throw ConfigError("target_label " + std::to_string(target_label) + " out of range");
    }
}

PMNConfig read_model_config(KeyValueReader& reader, const PMNConfig& defaults) {
    PMNConfig config = defaults;
    auto positive = [](std::int64_t v, const char* key) {
        if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
        return static_cast<std::size_t>(v);
    };
    config.labels = positive(reader.get_int("labels", static_cast<std::int64_t>(config.labels)), "labels");
    config.seq_len = positive(reader.get_int("seq_len", static_cast<std::int64_t>(config.seq_len)), "seq_len");
    config.hops = positive(reader.get_int("hops", static_cast<std::int64_t>(config.hops)), "hops");
    config.sharpness = reader.get_double("sharpness", config.sharpness);
    config.proto_weight = reader.get_double("proto_weight", config.proto_weight);
    if (auto mode = reader.take("attention")) config.attention = parse_attention_mode(*mode);
    if (auto variant = reader.take("variant")) config.variant = parse_variant(*variant);

    std::vector<std::int64_t> channels, widths;
    for (const auto& layer : config.conv) {
        channels.push_back(static_cast<std::int64_t>(layer.channels));
        widths.push_back(static_cast<std::int64_t>(layer.width));
    }
    channels = reader.get_int_list("conv_channels", channels);
    widths = reader.get_int_list("conv_widths", widths);
    if (channels.size() != widths.size()) {
        throw ConfigError("conv_channels and conv_widths must list the same number of layers");
    }
    config.conv.clear();
    for (std::size_t i = 0; i < channels.size(); ++i) {
        config.conv.push_back({positive(channels[i], "conv_channels"), positive(widths[i], "conv_widths")});
    }
    if (reader.has("embed_dim")) {
        const auto d = reader.get_int("embed_dim", 0);
        if (static_cast<std::size_t>(d) != config.embed_dim()) {
            throw ConfigError("embed_dim " + std::to_string(d) +
                              " must equal the last conv layer's channel count " +
                              std::to_string(config.embed_dim()));
        }
    }
    config.dropout = reader.get_double("dropout", config.dropout);
    config.attend_on_residual = reader.get_bool("attend_on_residual", config.attend_on_residual);
    config.target_label = positive(
        reader.get_int("target_label", static_cast<std::int64_t>(config.target_label)), "target_label");
    config.validate();
    return config;
}

void write_model_config(std::ostream& out, const PMNConfig& config) {
    std::string channels, widths;
    for (std::size_t i = 0; i < config.conv.size(); ++i) {
        if (i) {
            channels += ",";
            widths += ",";
        }
        channels += std::to_string(config.conv[i].channels);
        widths += std::to_string(config.conv[i].width);
    }
    out << "variant = " << to_string(config.variant) << "\n"
        << "labels = " << config.labels << "\n"
        << "seq_len = " << config.seq_len << "\n"
        << "conv_channels = " << channels << "\n"
        << "conv_widths = " << widths << "\n"
        << "embed_dim = " << config.embed_dim() << "\n"
        << "hops = " << config.hops << "\n"
        << "sharpness = " << format_double(config.sharpness) << "\n"
        << "proto_weight = " << format_double(config.proto_weight) << "\n"
        << "attention = " << to_string(config.attention) << "\n"
        << "dropout = " << format_double(config.dropout) << "\n"
        << "attend_on_residual = " << (config.attend_on_residual ? "true" : "false") << "\n"
        << "target_label = " << config.target_label << "\n";
}

std::string model_config_text(const PMNConfig& config) {
    std::ostringstream out;
    write_model_config(out, config);
    return out.str();
}

}  // namespace pmn::model
