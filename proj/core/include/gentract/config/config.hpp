#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gentract::cfg {

/// Scalar or flat-array TOML value.
struct TomlValue {
    std::variant<std::string, std::int64_t, double, bool, std::vector<TomlValue>> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(v); }
    bool is_float() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_array() const { return std::holds_alternative<std::vector<TomlValue>>(v); }
    double as_number() const;
};

using TomlSection = std::map<std::string, TomlValue>;
using TomlTable = std::map<std::string, TomlSection>;

/// Parses the TOML subset used by run configs: [section] headers,
/// key = value lines with strings, integers, floats, booleans, and flat
/// arrays; '#' comments. Errors carry line numbers.
TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

/// Sections and keys sorted, values re-serialized in a normalized form;
/// the config hash is SHA-256 over this string.
std::string canonical_toml(const TomlTable& table);

std::string sha256_hex(const std::string& data);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Typed run configuration; unknown sections or keys are rejected.
struct RunConfig {
    // [data]
    std::vector<std::string> volumes;
    std::vector<std::string> tractograms;
    std::string ground_truth;
    std::vector<double> augment_rotations_deg;
    std::string augment_axes = "z";

    // [encoder]
    int enc_ch1 = 8, enc_ch2 = 16;
    int c_z = 4, c_c = 8;
    double beta = 1e-3;
    double vae_lr = 2e-3;
    int vae_steps = 400;
    int vae_batch = 2;

    // [model]
    int layers = 4;  // M
    int width = 64;  // n
    int heads = 4;
    int points = 32;  // p

    // [objective]
    std::string objective_kind = "diffusion";
    int timesteps = 1000;  // T
    std::string schedule = "cosine";

    // [train]
    double lr = 1e-3;
    int batch = 32;
    int steps = 2000;
    std::uint64_t seed = 0;
    int checkpoint_every = 500;

    // [sample]
    int sample_steps = 10;
    int sample_count = 500;
    int sample_batch_size = 64;
    std::uint64_t sample_seed = 0;

    // [eval]
    double tau_voxels = 2.0;
    double endpoint_radius_voxels = 1.5;
    int min_bundle_streamlines = 20;  // K

    std::string config_hash;

    static RunConfig from_table(const TomlTable& table);
    static RunConfig load(const std::string& path);
};

}  // namespace gentract::cfg
