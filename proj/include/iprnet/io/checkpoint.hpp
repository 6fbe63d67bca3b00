#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "iprnet/core/nn.hpp"

namespace iprnet {

inline constexpr char kCheckpointMagic[8] = {'I', 'P', 'R', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned container: a JSON header (config echo, tensor index, split
/// metadata, iteration counter) followed by raw little-endian doubles.
struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, Tensor> tensors;

    int iteration() const { return header.value("iteration", 0); }
    std::set<int> train_classes() const {
        std::set<int> out;
        for (const auto& c : header.value("train_classes", std::vector<int>{})) out.insert(c);
        return out;
    }
    std::set<int> test_classes() const {
        std::set<int> out;
        for (const auto& c : header.value("test_classes", std::vector<int>{})) out.insert(c);
        return out;
    }
};

inline void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params,
                            const std::map<std::string, Tensor>& optimizer_state,
                            const nlohmann::json& config_echo, int iteration,
                            const std::set<int>& train_classes, const std::set<int>& test_classes,
                            const std::string& dataset_hash) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["iteration"] = iteration;
    header["config"] = config_echo;
    header["train_classes"] = std::vector<int>(train_classes.begin(), train_classes.end());
    header["test_classes"] = std::vector<int>(test_classes.begin(), test_classes.end());
    header["dataset_hash"] = dataset_hash;

    std::vector<std::pair<std::string, const Tensor*>> blobs;
    for (const auto& p : params) blobs.emplace_back(p.name, &p.var.value());
    for (const auto& [name, t] : optimizer_state) blobs.emplace_back("momentum/" + name, &t);

    nlohmann::json index = nlohmann::json::array();
    std::int64_t offset = 0;
    for (const auto& [name, t] : blobs) {
        index.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}, {"count", t->numel()}});
        offset += t->numel();
    }
    header["tensors"] = index;

    const std::string header_str = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_checkpoint: cannot open " + path);
    f.write(kCheckpointMagic, 8);
    const std::uint32_t version = kCheckpointVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t header_len = header_str.size();
    f.write(reinterpret_cast<const char*>(&header_len), 8);
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : blobs)
        f.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->numel() * static_cast<std::int64_t>(sizeof(double))));
    if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError("load_checkpoint: " + path + " is not a checkpoint file");
    std::uint32_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    if (version != kCheckpointVersion)
        throw IoError("load_checkpoint: unsupported format version " + std::to_string(version));
    std::uint64_t header_len = 0;
    f.read(reinterpret_cast<char*>(&header_len), 8);
    std::string header_str(header_len, '\0');
    f.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw IoError("load_checkpoint: truncated header in " + path);

    Checkpoint ckpt;
    ckpt.header = nlohmann::json::parse(header_str);
    for (const auto& entry : ckpt.header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        const std::int64_t count = entry.at("count").get<std::int64_t>();
        Tensor t(shape);
        if (t.numel() != count) throw IoError("load_checkpoint: inconsistent tensor index");
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(count * static_cast<std::int64_t>(sizeof(double))));
        if (!f) throw IoError("load_checkpoint: truncated tensor data in " + path);
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

/// Copy parameter blobs into an existing model by name.
inline void restore_params(const std::vector<ParamRef>& params, const Checkpoint& ckpt) {
    for (const auto& p : params) {
        const auto it = ckpt.tensors.find(p.name);
        if (it == ckpt.tensors.end())
            throw IoError("restore_params: checkpoint is missing tensor " + p.name);
        if (!it->second.same_shape(p.var.value()))
            throw IoError("restore_params: shape mismatch for " + p.name);
        Var handle = p.var; // shared node; writes through to the model
        handle.value() = it->second;
    }
}

inline std::map<std::string, Tensor> restore_momentum(const Checkpoint& ckpt) {
    std::map<std::string, Tensor> out;
    for (const auto& [name, t] : ckpt.tensors)
        if (name.rfind("momentum/", 0) == 0) out.emplace(name.substr(9), t);
    return out;
}

} // namespace iprnet
