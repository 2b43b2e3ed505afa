#include "pmn/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pmn/common/error.hpp"
#include "pmn/common/keyvalue.hpp"

namespace pmn::model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'M', 'N', '1'};
constexpr std::size_t kTrailerSize = 16;

class Writer {
public:
    template <typename V>
    void put(V value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes.insert(bytes.end(), p, p + sizeof(V));
    }
    void put_bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + size);
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename V>
    V get() {
        V value;
        std::memcpy(&value, take(sizeof(V)), sizeof(V));
        return value;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        const auto* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    const std::uint8_t* take(std::size_t n) {
        if (n > size_ - pos_) {
            throw CheckpointError(CheckpointError::Kind::malformed,
                                  "checkpoint field runs past the payload");
        }
        const auto* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= data[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
    checkpoint.config.validate();
    const auto specs = parameter_specs(checkpoint.config);
    const auto arrays = checkpoint.params.named();
    if (arrays.size() != specs.size()) {
        throw ContractError("serialize_checkpoint: parameters do not match the configuration");
    }
    Writer w;
    w.put_bytes(kMagic, 4);
    w.put(kCheckpointVersion);
    w.put_string(model_config_text(checkpoint.config));
    w.put(checkpoint.epoch);
    w.put(checkpoint.valid_auroc);
    w.put(static_cast<std::uint32_t>(arrays.size()));
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        const auto& [name, tensor] = arrays[i];
        if (name != specs[i].name || tensor->shape() != specs[i].shape) {
            throw ContractError("serialize_checkpoint: array " + name + " has shape " +
                                ad::shape_string(tensor->shape()));
        }
        w.put_string(name);
        w.put(static_cast<std::uint32_t>(tensor->rank()));
        for (std::size_t dim : tensor->shape()) w.put(static_cast<std::uint64_t>(dim));
        w.put_bytes(tensor->data(), tensor->size() * sizeof(float));
    }
    const std::uint64_t length = w.bytes.size();
    const std::uint64_t hash = fnv1a64(w.bytes.data(), w.bytes.size());
    w.put(length);
    w.put(hash);
    return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    using Kind = CheckpointError::Kind;
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(Kind::bad_magic, "not a PMN checkpoint");
    }
    if (bytes.size() < 8 + kTrailerSize) {
        throw CheckpointError(Kind::truncated, "checkpoint is truncated");
    }
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::version_mismatch,
                              "checkpoint version " + std::to_string(version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
    }
    std::uint64_t length, hash;
    std::memcpy(&length, bytes.data() + bytes.size() - kTrailerSize, 8);
    std::memcpy(&hash, bytes.data() + bytes.size() - 8, 8);
    const std::uint64_t payload = bytes.size() - kTrailerSize;
    if (length != payload) {
        throw CheckpointError(Kind::truncated, "checkpoint payload is " + std::to_string(payload) +
                                                   " bytes, trailer records " +
                                                   std::to_string(length));
    }
    if (fnv1a64(bytes.data(), payload) != hash) {
        throw CheckpointError(Kind::checksum, "checkpoint checksum mismatch");
    }

    Reader r(bytes.data(), payload);
    r.take(8);
    Checkpoint out;
    try {
        auto reader = KeyValueReader(parse_key_values_string(r.get_string(), "checkpoint"));
        out.config = read_model_config(reader, PMNConfig{});
        reader.reject_unknown();
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint config: ") + e.what());
    } catch (const ParseError& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint config: ") + e.what());
    }
    out.epoch = r.get<std::uint32_t>();
    out.valid_auroc = r.get<double>();
    out.params = zero_params<float>(out.config);
    auto arrays = out.params.named();
    const auto count = r.get<std::uint32_t>();
    if (count != arrays.size()) {
        throw CheckpointError(Kind::malformed, "checkpoint holds " + std::to_string(count) +
                                                   " arrays, configuration needs " +
                                                   std::to_string(arrays.size()));
    }
    for (auto& [name, tensor] : arrays) {
        const std::string stored = r.get_string();
        if (stored != name) {
            throw CheckpointError(Kind::malformed,
                                  "checkpoint array " + stored + " where " + name + " was expected");
        }
        const auto rank = r.get<std::uint32_t>();
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.get<std::uint64_t>());
        if (shape != tensor->shape()) {
            throw CheckpointError(Kind::malformed, "checkpoint array " + name + " has shape " +
                                                       ad::shape_string(shape) + ", expected " +
                                                       ad::shape_string(tensor->shape()));
        }
        std::memcpy(tensor->data(), r.take(tensor->size() * sizeof(float)),
                    tensor->size() * sizeof(float));
    }
    if (!r.done()) throw CheckpointError(Kind::malformed, "trailing bytes in checkpoint payload");
    out.params.set_requires_grad(false);
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const auto bytes = serialize_checkpoint(checkpoint);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError(CheckpointError::Kind::io, "write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError(CheckpointError::Kind::io, "cannot move checkpoint to " + path.string());
    std::ofstream manifest(path.string() + ".manifest", std::ios::trunc);
    manifest << checkpoint_manifest(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const PMNConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (!(ckpt.config == expected)) {
        const auto stored = parse_key_values_string(model_config_text(ckpt.config), "checkpoint");
        const auto wanted = parse_key_values_string(model_config_text(expected), "expected");
        std::string key = "?";
        for (std::size_t i = 0; i < stored.size() && i < wanted.size(); ++i) {
            if (stored[i].value != wanted[i].value) {
                key = stored[i].key + " (checkpoint " + stored[i].value + ", expected " +
                      wanted[i].value + ")";
                break;
            }
        }
        throw ConfigError("checkpoint " + path.string() + " was trained with a different " +
                          "configuration: " + key);
    }
    return ckpt;
}

std::string checkpoint_manifest(const Checkpoint& checkpoint) {
    std::ostringstream out;
    out << "# epoch " << checkpoint.epoch << " valid_auroc "
        << format_double(checkpoint.valid_auroc) << '\n';
    for (const auto& [name, tensor] : checkpoint.params.named()) {
        out << name << '\t' << ad::shape_string(tensor->shape()) << '\n';
    }
    return out.str();
}

}  // namespace pmn::model
