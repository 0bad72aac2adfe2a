#include "gentract/sh/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "gentract/nd/rng.hpp"

namespace gentract::sh {

namespace {

// Uniform Catmull-Rom through the control points, endpoints clamped by
// duplicating the first and last points.
Vec3 catmull_rom(const std::vector<Vec3>& pts, double u) {
    const int segs = static_cast<int>(pts.size()) - 1;
    const double s = std::clamp(u, 0.0, 1.0) * segs;
    int i = std::min(static_cast<int>(s), segs - 1);
    const double t = s - i;
    const auto P = [&](int j) { return pts[static_cast<std::size_t>(std::clamp(j, 0, segs))]; };
    const Vec3 p0 = P(i - 1), p1 = P(i), p2 = P(i + 1), p3 = P(i + 2);
    const double t2 = t * t, t3 = t2 * t;
    Vec3 out;
    for (int a = 0; a < 3; ++a) {
        out[a] = 0.5 * ((2.0 * p1[a]) + (-p0[a] + p2[a]) * t +
                        (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * t2 +
                        (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * t3);
    }
    return out;
}

struct Frame {
    Vec3 tangent, normal, binormal;
};

// Dense centerline with a parallel-transported frame; avoids twist when
// offsetting streamlines off the centerline.
std::vector<Frame> transport_frames(const std::vector<Vec3>& dense) {
    const std::size_t n = dense.size();
    std::vector<Frame> frames(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = dense[i == 0 ? 0 : i - 1];
        const Vec3 b = dense[i + 1 == n ? n - 1 : i + 1];
        frames[i].tangent = normalized(b - a);
    }
    // Seed normal: least-aligned coordinate axis.
    const Vec3 t0 = frames[0].tangent;
    int least = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(t0[a]) < std::abs(t0[least])) least = a;
    Vec3 seed = {0, 0, 0};
    seed[least] = 1.0;
    frames[0].normal = normalized(seed - dot(seed, t0) * t0);
    frames[0].binormal = cross(t0, frames[0].normal);
    for (std::size_t i = 1; i < n; ++i) {
        const Vec3 t = frames[i].tangent;
        Vec3 nrm = frames[i - 1].normal - dot(frames[i - 1].normal, t) * t;
        const double len = norm(nrm);
        frames[i].normal = len > 1e-12 ? (1.0 / len) * nrm : frames[i - 1].normal;
        frames[i].binormal = cross(t, frames[i].normal);
    }
    return frames;
}

nlohmann::json streamline_to_json(const tract::Streamline& s) {
    nlohmann::json j = nlohmann::json::array();
    for (const Vec3& p : s) j.push_back(p);
    return j;
}

tract::Streamline streamline_from_json(const nlohmann::json& j) {
    tract::Streamline s;
    for (const auto& p : j) s.push_back(p.get<Vec3>());
    return s;
}

}  // namespace

void PhantomSpec::validate() const {
    if (extents[0] < 2 || extents[1] < 2 || extents[2] < 2)
        throw std::invalid_argument("phantom spec: extents must be >= 2 per axis");
    if (voxel_size_mm <= 0.0) throw std::invalid_argument("phantom spec: voxel size must be positive");
    sh_count(l_max);  // validates evenness
    if (bundles.empty()) throw std::invalid_argument("phantom spec: at least one bundle required");
    std::set<std::string> names;
    for (const BundleSpec& b : bundles) {
        if (b.name.empty()) throw std::invalid_argument("phantom spec: bundle names must be nonempty");
        if (!names.insert(b.name).second)
            throw std::invalid_argument("phantom spec: duplicate bundle name '" + b.name + "'");
        if (b.radius_mm <= 0.0)
            throw std::invalid_argument("phantom spec: bundle '" + b.name + "' needs radius > 0");
        if (b.control_points_mm.size() < 2)
            throw std::invalid_argument("phantom spec: bundle '" + b.name + "' needs >= 2 control points");
        if (b.streamline_count < 1 || b.points_per_streamline < 2)
            throw std::invalid_argument("phantom spec: bundle '" + b.name + "' has degenerate counts");
    }
}

nlohmann::json PhantomSpec::to_json() const {
    nlohmann::json j;
    j["volume"] = {{"extents", {extents[0], extents[1], extents[2]}},
                   {"voxel_size_mm", voxel_size_mm},
                   {"l_max", l_max}};
    j["seed"] = seed;
    j["bundles"] = nlohmann::json::array();
    for (const BundleSpec& b : bundles) {
        nlohmann::json bj;
        bj["name"] = b.name;
        bj["control_points_mm"] = b.control_points_mm;
        bj["radius_mm"] = b.radius_mm;
        bj["streamline_count"] = b.streamline_count;
        bj["points_per_streamline"] = b.points_per_streamline;
        j["bundles"].push_back(std::move(bj));
    }
    return j;
}

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
    PhantomSpec spec;
    const auto& vol = j.at("volume");
    const auto ext = vol.at("extents").get<std::vector<int>>();
    if (ext.size() != 3) throw std::invalid_argument("phantom spec: extents must have three entries");
    std::copy(ext.begin(), ext.end(), spec.extents);
    spec.voxel_size_mm = vol.at("voxel_size_mm").get<double>();
    spec.l_max = vol.at("l_max").get<int>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& bj : j.at("bundles")) {
        BundleSpec b;
        b.name = bj.at("name").get<std::string>();
        for (const auto& p : bj.at("control_points_mm")) b.control_points_mm.push_back(p.get<Vec3>());
        b.radius_mm = bj.at("radius_mm").get<double>();
        b.streamline_count = bj.at("streamline_count").get<int>();
        b.points_per_streamline = bj.at("points_per_streamline").get<int>();
        spec.bundles.push_back(std::move(b));
    }
    spec.validate();
    return spec;
}

PhantomSpec PhantomSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("phantom spec: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("phantom spec '" + path + "': " + e.what());
    }
    return from_json(j);
}

std::size_t GroundTruth::total_streamlines() const {
    std::size_t n = 0;
    for (const auto& b : bundles) n += b.streamlines.size();
    return n;
}

nlohmann::json GroundTruth::to_json() const {
    nlohmann::json j;
    j["voxel_size_mm"] = voxel_size_mm;
    j["bundles"] = nlohmann::json::array();
    for (const GroundTruthBundle& b : bundles) {
        nlohmann::json bj;
        bj["name"] = b.name;
        bj["centroid_mm"] = streamline_to_json(b.centroid);
        bj["endpoint_regions"] = nlohmann::json::array();
        for (const EndpointRegion& r : b.endpoints)
            bj["endpoint_regions"].push_back({{"center_mm", r.center_mm}, {"radius_mm", r.radius_mm}});
        bj["streamlines_mm"] = nlohmann::json::array();
        for (const tract::Streamline& s : b.streamlines) bj["streamlines_mm"].push_back(streamline_to_json(s));
        j["bundles"].push_back(std::move(bj));
    }
    return j;
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    GroundTruth gt;
    gt.voxel_size_mm = j.at("voxel_size_mm").get<double>();
    for (const auto& bj : j.at("bundles")) {
        GroundTruthBundle b;
        b.name = bj.at("name").get<std::string>();
        b.centroid = streamline_from_json(bj.at("centroid_mm"));
        const auto& regions = bj.at("endpoint_regions");
        if (regions.size() != 2) throw std::invalid_argument("ground truth: exactly two endpoint regions per bundle");
        for (int i = 0; i < 2; ++i) {
            b.endpoints[i].center_mm = regions[static_cast<std::size_t>(i)].at("center_mm").get<Vec3>();
            b.endpoints[i].radius_mm = regions[static_cast<std::size_t>(i)].at("radius_mm").get<double>();
        }
        for (const auto& sj : bj.at("streamlines_mm")) b.streamlines.push_back(streamline_from_json(sj));
        gt.bundles.push_back(std::move(b));
    }
    return gt;
}

void GroundTruth::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("ground truth: cannot open '" + path + "' for writing");
    out << to_json().dump(2) << "\n";
}

GroundTruth GroundTruth::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ground truth: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("ground truth '" + path + "': " + e.what());
    }
    return from_json(j);
}

PhantomResult make_phantom(const PhantomSpec& spec) {
    spec.validate();
    const double vs = spec.voxel_size_mm;
    SHVolume volume(spec.extents[0], spec.extents[1], spec.extents[2], spec.l_max, vs);
    const int m = volume.m();
    const Vec3 lo = {0.0, 0.0, 0.0};
    const Vec3 hi = {spec.extents[0] * vs, spec.extents[1] * vs, spec.extents[2] * vs};

    GroundTruth gt;
    gt.voxel_size_mm = vs;

    nd::Rng rng(spec.seed);
    constexpr int kDense = 256;

    std::vector<double> weight(static_cast<std::size_t>(volume.voxel_count()), 0.0);
    std::vector<double> accum(volume.data.size(), 0.0);
    const Affine inv = affine_inverse(volume.affine);

    for (const BundleSpec& b : spec.bundles) {
        std::vector<Vec3> dense(kDense);
        for (int i = 0; i < kDense; ++i)
            dense[static_cast<std::size_t>(i)] = catmull_rom(b.control_points_mm, i / double(kDense - 1));
        const std::vector<Frame> frames = transport_frames(dense);

        GroundTruthBundle gtb;
        gtb.name = b.name;
        gtb.centroid = tract::resample_streamline(dense, b.points_per_streamline);
        gtb.endpoints[0] = {gtb.centroid.front(), 1.5 * vs};
        gtb.endpoints[1] = {gtb.centroid.back(), 1.5 * vs};

        for (int s = 0; s < b.streamline_count; ++s) {
            // Constant disc offset in the transported frame.
            const double r = b.radius_mm * std::sqrt(rng.uniform());
            const double ang = 2.0 * 3.14159265358979323846 * rng.uniform();
            const double oa = r * std::cos(ang), ob = r * std::sin(ang);
            tract::Streamline pts(dense.size());
            for (std::size_t i = 0; i < dense.size(); ++i)
                pts[i] = dense[i] + oa * frames[i].normal + ob * frames[i].binormal;
            tract::Streamline line = tract::resample_streamline(pts, b.points_per_streamline);
            for (const Vec3& p : line)
                for (int a = 0; a < 3; ++a)
                    if (p[a] < lo[a] || p[a] > hi[a])
                        throw std::runtime_error("phantom: bundle '" + b.name + "' leaves the volume bounds");
            gtb.streamlines.push_back(std::move(line));
        }

        // Rasterize fiber orientations: march each segment in half-voxel
        // steps, adding the segment's band-limited delta to the voxel under
        // each substep midpoint, weighted by the substep length.
        for (const tract::Streamline& line : gtb.streamlines) {
            for (std::size_t i = 0; i + 1 < line.size(); ++i) {
                const Vec3 seg = line[i + 1] - line[i];
                const double seg_len = norm(seg);
                if (seg_len == 0.0) continue;
                const SHCoeffs delta = peak_to_sh(Direction{(1.0 / seg_len) * seg}, spec.l_max);
                const int substeps = std::max(1, static_cast<int>(std::ceil(seg_len / (vs / 2.0))));
                const double step_w = seg_len / substeps;
                for (int t = 0; t < substeps; ++t) {
                    const Vec3 mid = line[i] + ((t + 0.5) / substeps) * seg;
                    const Vec3 idx = affine_apply(inv, mid);
                    const int vi = static_cast<int>(std::lround(idx[0]));
                    const int vj = static_cast<int>(std::lround(idx[1]));
                    const int vk = static_cast<int>(std::lround(idx[2]));
                    if (vi < 0 || vi >= volume.h || vj < 0 || vj >= volume.w || vk < 0 || vk >= volume.d)
                        continue;
                    const std::int64_t vox = (static_cast<std::int64_t>(vi) * volume.w + vj) * volume.d + vk;
                    weight[static_cast<std::size_t>(vox)] += step_w;
                    for (int q = 0; q < m; ++q)
                        accum[static_cast<std::size_t>(vox * m + q)] += step_w * delta.values[static_cast<std::size_t>(q)];
                }
            }
        }
        gt.bundles.push_back(std::move(gtb));
    }

    // Mean orientation density per voxel, scaled so a single-fiber voxel
    // peaks at amplitude 1.
    const Direction zhat{{0.0, 0.0, 1.0}};
    const double delta_peak = eval_fodf(peak_to_sh(zhat, spec.l_max), zhat);
    for (std::int64_t vox = 0; vox < volume.voxel_count(); ++vox) {
        if (weight[static_cast<std::size_t>(vox)] > 0.0) {
            const double scale = 1.0 / (weight[static_cast<std::size_t>(vox)] * delta_peak);
            for (int q = 0; q < m; ++q)
                volume.data[static_cast<std::size_t>(vox * m + q)] =
                    accum[static_cast<std::size_t>(vox * m + q)] * scale;
        } else {
            volume.data[static_cast<std::size_t>(vox * m)] = 0.1;
        }
    }

    return PhantomResult{std::move(volume), std::move(gt)};
}

}  // namespace gentract::sh
