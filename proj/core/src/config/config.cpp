#include "gentract/config/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace gentract::cfg {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

TomlValue parse_scalar(const std::string& raw, int line);

TomlValue parse_value(const std::string& raw, int line) {
    const std::string s = trim(raw);
    if (s.empty()) fail(line, "missing value");
    if (s.front() == '[') {
        if (s.back() != ']') fail(line, "unterminated array");
        std::vector<TomlValue> items;
        std::string body = s.substr(1, s.size() - 2);
        // Split on commas outside quotes (arrays are flat).
        std::string cur;
        bool in_str = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            const char c = body[i];
            if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), line));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), line));
        TomlValue v;
        v.v = std::move(items);
        return v;
    }
    return parse_scalar(s, line);
}

TomlValue parse_scalar(const std::string& s, int line) {
    TomlValue v;
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            if (s[i] == '\\' && i + 2 < s.size()) {
                ++i;
                switch (s[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(line, std::string("unsupported escape \\") + s[i]);
                }
            } else {
                out += s[i];
            }
        }
        v.v = std::move(out);
        return v;
    }
    if (s == "true") { v.v = true; return v; }
    if (s == "false") { v.v = false; return v; }
    // Number: integer when it parses fully without '.', 'e', or 'E'.
    const bool has_float_char = s.find_first_of(".eE") != std::string::npos;
    try {
        std::size_t pos = 0;
        if (!has_float_char) {
            const std::int64_t i = std::stoll(s, &pos);
            if (pos == s.size()) { v.v = i; return v; }
        }
        const double d = std::stod(s, &pos);
        if (pos == s.size()) { v.v = d; return v; }
    } catch (const std::exception&) {
    }
    fail(line, "cannot parse value '" + s + "'");
}

void canon_value(std::ostringstream& out, const TomlValue& v) {
    if (v.is_string()) {
        out << '"';
        for (char c : std::get<std::string>(v.v)) {
            if (c == '"' || c == '\\') out << '\\';
            out << c;
        }
        out << '"';
    } else if (v.is_int()) {
        out << std::get<std::int64_t>(v.v);
    } else if (v.is_float()) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(v.v));
        out << buf;
    } else if (v.is_bool()) {
        out << (std::get<bool>(v.v) ? "true" : "false");
    } else {
        out << '[';
        const auto& arr = std::get<std::vector<TomlValue>>(v.v);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (i) out << ", ";
            canon_value(out, arr[i]);
        }
        out << ']';
    }
}

}  // namespace

double TomlValue::as_number() const {
    if (is_int()) return static_cast<double>(std::get<std::int64_t>(v));
    if (is_float()) return std::get<double>(v);
    throw ConfigError("expected a number");
}

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_key(section)) fail(line, "invalid section name '" + section + "'");
            table[section];  // create even when empty
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (!valid_key(key)) fail(line, "invalid key '" + key + "'");
        if (section.empty()) fail(line, "key outside any [section]");
        if (table[section].count(key)) fail(line, "duplicate key '" + key + "'");
        table[section][key] = parse_value(s.substr(eq + 1), line);
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

std::string canonical_toml(const TomlTable& table) {
    std::ostringstream out;
    for (const auto& [section, kv] : table) {
        out << '[' << section << "]\n";
        for (const auto& [key, value] : kv) {
            out << key << " = ";
            canon_value(out, value);
            out << '\n';
        }
    }
    return out.str();
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

class SectionReader {
public:
    SectionReader(const TomlTable& table, const std::string& name) : name_(name) {
        auto it = table.find(name);
        if (it != table.end()) section_ = &it->second;
    }

    template <typename Fn>
    void key(const std::string& k, Fn&& fn) {
        known_.push_back(k);
        if (!section_) return;
        auto it = section_->find(k);
        if (it == section_->end()) return;
        try {
            fn(it->second);
        } catch (const std::bad_variant_access&) {
            throw ConfigError("[" + name_ + "]." + k + ": wrong value type");
        }
    }

    void finish() const {
        if (!section_) return;
        for (const auto& [k, v] : *section_) {
            bool ok = false;
            for (const std::string& known : known_) ok = ok || known == k;
            if (!ok) throw ConfigError("[" + name_ + "]: unknown key '" + k + "'");
        }
    }

private:
    const TomlSection* section_ = nullptr;
    std::string name_;
    std::vector<std::string> known_;
};

std::vector<std::string> string_array(const TomlValue& v, const char* what) {
    if (!v.is_array()) throw ConfigError(std::string(what) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const TomlValue& e : std::get<std::vector<TomlValue>>(v.v)) out.push_back(std::get<std::string>(e.v));
    return out;
}

std::vector<double> number_array(const TomlValue& v, const char* what) {
    if (!v.is_array()) throw ConfigError(std::string(what) + ": expected an array of numbers");
    std::vector<double> out;
    for (const TomlValue& e : std::get<std::vector<TomlValue>>(v.v)) out.push_back(e.as_number());
    return out;
}

}  // namespace

RunConfig RunConfig::from_table(const TomlTable& table) {
    static const char* kKnownSections[] = {"data", "encoder", "model", "objective", "train", "sample", "eval"};
    for (const auto& [section, kv] : table) {
        (void)kv;
        bool ok = false;
        for (const char* s : kKnownSections) ok = ok || section == s;
        if (!ok) throw ConfigError("unknown config section [" + section + "]");
    }

    RunConfig c;

    SectionReader data(table, "data");
    data.key("volumes", [&](const TomlValue& v) { c.volumes = string_array(v, "volumes"); });
    data.key("tractograms", [&](const TomlValue& v) { c.tractograms = string_array(v, "tractograms"); });
    data.key("ground_truth", [&](const TomlValue& v) { c.ground_truth = std::get<std::string>(v.v); });
    data.key("augment_rotations_deg",
             [&](const TomlValue& v) { c.augment_rotations_deg = number_array(v, "augment_rotations_deg"); });
    data.key("augment_axes", [&](const TomlValue& v) { c.augment_axes = std::get<std::string>(v.v); });
    data.finish();

    SectionReader enc(table, "encoder");
    enc.key("enc_ch1", [&](const TomlValue& v) { c.enc_ch1 = static_cast<int>(v.as_number()); });
    enc.key("enc_ch2", [&](const TomlValue& v) { c.enc_ch2 = static_cast<int>(v.as_number()); });
    enc.key("C_z", [&](const TomlValue& v) { c.c_z = static_cast<int>(v.as_number()); });
    enc.key("C_c", [&](const TomlValue& v) { c.c_c = static_cast<int>(v.as_number()); });
    enc.key("beta", [&](const TomlValue& v) { c.beta = v.as_number(); });
    enc.key("vae_lr", [&](const TomlValue& v) { c.vae_lr = v.as_number(); });
    enc.key("vae_steps", [&](const TomlValue& v) { c.vae_steps = static_cast<int>(v.as_number()); });
    enc.key("vae_batch", [&](const TomlValue& v) { c.vae_batch = static_cast<int>(v.as_number()); });
    enc.finish();

    SectionReader model(table, "model");
    model.key("M", [&](const TomlValue& v) { c.layers = static_cast<int>(v.as_number()); });
    model.key("n", [&](const TomlValue& v) { c.width = static_cast<int>(v.as_number()); });
    model.key("heads", [&](const TomlValue& v) { c.heads = static_cast<int>(v.as_number()); });
    model.key("p", [&](const TomlValue& v) { c.points = static_cast<int>(v.as_number()); });
    model.finish();

    SectionReader obj(table, "objective");
    obj.key("kind", [&](const TomlValue& v) { c.objective_kind = std::get<std::string>(v.v); });
    obj.key("T", [&](const TomlValue& v) { c.timesteps = static_cast<int>(v.as_number()); });
    obj.key("schedule", [&](const TomlValue& v) { c.schedule = std::get<std::string>(v.v); });
    obj.finish();

    SectionReader train(table, "train");
    train.key("lr", [&](const TomlValue& v) { c.lr = v.as_number(); });
    train.key("batch", [&](const TomlValue& v) { c.batch = static_cast<int>(v.as_number()); });
    train.key("steps", [&](const TomlValue& v) { c.steps = static_cast<int>(v.as_number()); });
    train.key("seed", [&](const TomlValue& v) { c.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v.v)); });
    train.key("checkpoint_every",
              [&](const TomlValue& v) { c.checkpoint_every = static_cast<int>(v.as_number()); });
    train.finish();

    SectionReader sample(table, "sample");
    sample.key("steps", [&](const TomlValue& v) { c.sample_steps = static_cast<int>(v.as_number()); });
    sample.key("count", [&](const TomlValue& v) { c.sample_count = static_cast<int>(v.as_number()); });
    sample.key("batch_size", [&](const TomlValue& v) { c.sample_batch_size = static_cast<int>(v.as_number()); });
    sample.key("seed",
               [&](const TomlValue& v) { c.sample_seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v.v)); });
    sample.finish();

    SectionReader eval(table, "eval");
    eval.key("tau_voxels", [&](const TomlValue& v) { c.tau_voxels = v.as_number(); });
    eval.key("endpoint_radius_voxels", [&](const TomlValue& v) { c.endpoint_radius_voxels = v.as_number(); });
    eval.key("K", [&](const TomlValue& v) { c.min_bundle_streamlines = static_cast<int>(v.as_number()); });
    eval.finish();

    if (c.objective_kind != "diffusion" && c.objective_kind != "flow_matching")
        throw ConfigError("[objective].kind must be \"diffusion\" or \"flow_matching\"");
    if (c.schedule != "cosine") throw ConfigError("[objective].schedule: only \"cosine\" is available");
    if (c.layers < 1 || c.width < 1 || c.heads < 1 || c.points < 2)
        throw ConfigError("[model]: M, n, heads must be >= 1 and p >= 2");
    if (c.width % c.heads != 0) throw ConfigError("[model]: n must be divisible by heads");
    if (c.timesteps < 1) throw ConfigError("[objective].T must be >= 1");
    if (c.batch < 1 || c.steps < 1 || c.lr <= 0) throw ConfigError("[train]: invalid lr/batch/steps");
    if (c.sample_steps < 1 || c.sample_count < 1 || c.sample_batch_size < 1)
        throw ConfigError("[sample]: steps, count, batch_size must be >= 1");
    if (c.tau_voxels <= 0 || c.endpoint_radius_voxels <= 0 || c.min_bundle_streamlines < 1)
        throw ConfigError("[eval]: invalid thresholds");

    c.config_hash = sha256_hex(canonical_toml(table));
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_table(parse_toml_file(path)); }

}  // namespace gentract::cfg
