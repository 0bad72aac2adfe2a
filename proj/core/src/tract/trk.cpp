#include "gentract/tract/trk.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace gentract::tract {

namespace {

constexpr int kHeaderSize = 1000;
constexpr int kOffDim = 6;
constexpr int kOffVoxelSize = 12;
constexpr int kOffNScalars = 36;
constexpr int kOffNProperties = 238;
constexpr int kOffVoxToRas = 440;
constexpr int kOffVoxelOrder = 948;
constexpr int kOffNCount = 988;
constexpr int kOffVersion = 992;
constexpr int kOffHdrSize = 996;

static_assert(std::endian::native == std::endian::little, "TRK writer assumes a little-endian host");

[[noreturn]] void corrupt(const std::string& path, const std::string& what, std::int64_t offset) {
    throw std::runtime_error("trk '" + path + "': " + what + " at byte offset " + std::to_string(offset));
}

template <typename T>
void put(std::vector<char>& buf, int offset, const T& v) {
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, int offset) {
    T v;
    std::memcpy(&v, buf.data() + offset, sizeof(T));
    return v;
}

}  // namespace

void write_trk(const Tractogram& t, const std::string& path) {
    for (const Streamline& s : t.streamlines) validate_streamline(s);

    std::vector<char> header(kHeaderSize, 0);
    std::memcpy(header.data(), "TRACK", 6);
    for (int i = 0; i < 3; ++i) put(header, kOffDim + 2 * i, static_cast<std::int16_t>(t.extents[i]));
    for (int i = 0; i < 3; ++i) put(header, kOffVoxelSize + 4 * i, static_cast<float>(t.voxel_size));
    put(header, kOffNScalars, static_cast<std::int16_t>(0));
    put(header, kOffNProperties, static_cast<std::int16_t>(0));
    for (int i = 0; i < 16; ++i) put(header, kOffVoxToRas + 4 * i, static_cast<float>(t.affine[i]));
    std::memcpy(header.data() + kOffVoxelOrder, "RAS", 4);
    put(header, kOffNCount, static_cast<std::int32_t>(t.streamlines.size()));
    put(header, kOffVersion, static_cast<std::int32_t>(2));
    put(header, kOffHdrSize, static_cast<std::int32_t>(kHeaderSize));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("trk: cannot open '" + path + "' for writing");
    out.write(header.data(), kHeaderSize);

    const Affine inv = affine_inverse(t.affine);
    for (const Streamline& s : t.streamlines) {
        const std::int32_t npts = static_cast<std::int32_t>(s.size());
        out.write(reinterpret_cast<const char*>(&npts), sizeof(npts));
        for (const Vec3& p : s) {
            const Vec3 idx = affine_apply(inv, p);
            for (int a = 0; a < 3; ++a) {
                const float vmm = static_cast<float>((idx[a] + 0.5) * t.voxel_size);
                out.write(reinterpret_cast<const char*>(&vmm), sizeof(vmm));
            }
        }
    }
    if (!out) throw std::runtime_error("trk: write to '" + path + "' failed");
}

Tractogram read_trk(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("trk: cannot open '" + path + "'");

    std::vector<char> header(kHeaderSize);
    if (!in.read(header.data(), kHeaderSize)) corrupt(path, "truncated header", 0);
    if (std::memcmp(header.data(), "TRACK\0", 6) != 0) corrupt(path, "bad magic", 0);
    const std::int32_t version = get<std::int32_t>(header, kOffVersion);
    if (version != 2) corrupt(path, "unsupported version " + std::to_string(version), kOffVersion);
    const std::int32_t hdr_size = get<std::int32_t>(header, kOffHdrSize);
    if (hdr_size != kHeaderSize) corrupt(path, "unexpected hdr_size " + std::to_string(hdr_size), kOffHdrSize);
    const std::int16_t n_scalars = get<std::int16_t>(header, kOffNScalars);
    const std::int16_t n_properties = get<std::int16_t>(header, kOffNProperties);
    if (n_scalars != 0 || n_properties != 0)
        corrupt(path, "scalar/property tracks are not supported", kOffNScalars);

    Tractogram t;
    for (int i = 0; i < 3; ++i) t.extents[i] = get<std::int16_t>(header, kOffDim + 2 * i);
    t.voxel_size = static_cast<double>(get<float>(header, kOffVoxelSize));
    if (t.voxel_size <= 0.0) corrupt(path, "non-positive voxel size", kOffVoxelSize);
    for (int i = 0; i < 16; ++i) t.affine[i] = static_cast<double>(get<float>(header, kOffVoxToRas + 4 * i));
    if (t.affine[15] != 1.0f) corrupt(path, "voxel-to-world affine missing or invalid", kOffVoxToRas);

    const std::int32_t n_count = get<std::int32_t>(header, kOffNCount);
    if (n_count < 0) corrupt(path, "negative n_count", kOffNCount);

    std::int64_t offset = kHeaderSize;
    while (true) {
        if (n_count > 0 && static_cast<std::int32_t>(t.streamlines.size()) == n_count) {
            char probe;
            if (in.read(&probe, 1)) corrupt(path, "trailing bytes beyond n_count streamlines", offset);
            break;
        }
        std::int32_t npts = 0;
        if (!in.read(reinterpret_cast<char*>(&npts), sizeof(npts))) {
            if (n_count == 0) break;  // n_count == 0 means "read until EOF"
            corrupt(path,
                    "expected " + std::to_string(n_count) + " streamlines, found " +
                        std::to_string(t.streamlines.size()),
                    offset);
        }
        offset += 4;
        if (npts < 2) corrupt(path, "streamline point count " + std::to_string(npts) + " < 2", offset - 4);
        std::vector<float> raw(static_cast<std::size_t>(npts) * 3);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4)))
            corrupt(path, "truncated mid-streamline", offset);
        offset += static_cast<std::int64_t>(raw.size()) * 4;
        Streamline s(static_cast<std::size_t>(npts));
        for (int j = 0; j < npts; ++j) {
            Vec3 idx;
            for (int a = 0; a < 3; ++a)
                idx[a] = static_cast<double>(raw[static_cast<std::size_t>(3 * j + a)]) / t.voxel_size - 0.5;
            s[static_cast<std::size_t>(j)] = affine_apply(t.affine, idx);
        }
        t.streamlines.push_back(std::move(s));
    }
    return t;
}

}  // namespace gentract::tract
