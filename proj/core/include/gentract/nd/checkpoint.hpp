#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "gentract/nd/tensor.hpp"

namespace gentract::nd {

/// Single-file parameter container.
///
/// Layout: 16-byte magic "NDIFFCKPT" padded with NULs, a little-endian u64
/// byte length, the UTF-8 JSON manifest (names, shapes, byte offsets into
/// the payload), then all tensor payloads as raw little-endian f64.
/// Round-trips are bit-exact.
class Checkpoint {
public:
    std::map<std::string, Tensor> tensors;
    nlohmann::json meta = nlohmann::json::object();

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

}  // namespace gentract::nd
