#include "gentract/nd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace gentract::nd {

namespace {

constexpr char kMagic[16] = {'N', 'D', 'I', 'F', 'F', 'C', 'K', 'P', 'T', 0, 0, 0, 0, 0, 0, 0};

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

[[noreturn]] void corrupt(const std::string& path, const std::string& what, std::int64_t offset) {
    throw std::runtime_error("checkpoint '" + path + "': " + what + " at byte offset " +
                             std::to_string(offset));
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    nlohmann::json manifest;
    manifest["meta"] = meta;
    nlohmann::json params = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        nlohmann::json p;
        p["name"] = name;
        p["shape"] = tensor.shape();
        p["offset"] = offset;
        params.push_back(std::move(p));
        offset += static_cast<std::uint64_t>(tensor.numel()) * sizeof(double);
    }
    manifest["params"] = std::move(params);
    const std::string blob = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = blob.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    for (const auto& [name, tensor] : tensors) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.numel() * static_cast<std::int64_t>(sizeof(double))));
    }
    if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");

    char magic[16];
    if (!in.read(magic, sizeof(magic))) corrupt(path, "truncated magic", 0);
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) corrupt(path, "bad magic", 0);

    std::uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) corrupt(path, "truncated manifest length", 16);
    std::string blob(len, '\0');
    if (!in.read(blob.data(), static_cast<std::streamsize>(len))) corrupt(path, "truncated manifest", 24);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint '" + path + "': manifest parse error: " + e.what());
    }

    Checkpoint ckpt;
    if (manifest.contains("meta")) ckpt.meta = manifest["meta"];
    const std::int64_t payload_start = 24 + static_cast<std::int64_t>(len);
    for (const auto& p : manifest["params"]) {
        const std::string name = p.at("name").get<std::string>();
        const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
        const std::uint64_t offset = p.at("offset").get<std::uint64_t>();
        const std::int64_t count = shape_numel(shape);
        Tensor t(shape);
        in.seekg(payload_start + static_cast<std::int64_t>(offset));
        if (!in.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(count * static_cast<std::int64_t>(sizeof(double)))))
            corrupt(path, "truncated payload for '" + name + "'",
                    payload_start + static_cast<std::int64_t>(offset));
        t.check_finite("checkpoint load");
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

const Tensor& Checkpoint::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    return it->second;
}

}  // namespace gentract::nd
