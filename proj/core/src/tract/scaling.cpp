#include "gentract/tract/scaling.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gentract::tract {

ScalingStats ScalingStats::compute(const std::vector<const sh::SHVolume*>& volumes,
                                   const std::vector<const Streamline*>& streamlines) {
    if (volumes.empty() || streamlines.empty())
        throw std::invalid_argument("scaling stats need at least one volume and one streamline");

    ScalingStats st;
    for (int a = 0; a < 3; ++a) {
        st.coord_min[a] = std::numeric_limits<double>::infinity();
        st.coord_max[a] = -std::numeric_limits<double>::infinity();
    }
    for (const Streamline* s : streamlines)
        for (const Vec3& p : *s)
            for (int a = 0; a < 3; ++a) {
                st.coord_min[a] = std::min(st.coord_min[a], p[a]);
                st.coord_max[a] = std::max(st.coord_max[a], p[a]);
            }

    const int m = volumes.front()->m();
    st.coeff_mean.assign(static_cast<std::size_t>(m), 0.0);
    st.coeff_std.assign(static_cast<std::size_t>(m), 0.0);
    std::int64_t n = 0;
    for (const sh::SHVolume* v : volumes) {
        if (v->m() != m) throw std::invalid_argument("scaling stats: volumes disagree on coefficient count");
        const std::int64_t vox = v->voxel_count();
        for (std::int64_t i = 0; i < vox; ++i)
            for (int q = 0; q < m; ++q) st.coeff_mean[static_cast<std::size_t>(q)] += v->data[i * m + q];
        n += vox;
    }
    for (int q = 0; q < m; ++q) st.coeff_mean[static_cast<std::size_t>(q)] /= static_cast<double>(n);
    for (const sh::SHVolume* v : volumes) {
        const std::int64_t vox = v->voxel_count();
        for (std::int64_t i = 0; i < vox; ++i)
            for (int q = 0; q < m; ++q) {
                const double dv = v->data[i * m + q] - st.coeff_mean[static_cast<std::size_t>(q)];
                st.coeff_std[static_cast<std::size_t>(q)] += dv * dv;
            }
    }
    for (int q = 0; q < m; ++q)
        st.coeff_std[static_cast<std::size_t>(q)] = std::sqrt(st.coeff_std[static_cast<std::size_t>(q)] / n);
    st.validate();
    return st;
}

void ScalingStats::validate() const {
    for (int a = 0; a < 3; ++a)
        if (!(coord_max[a] > coord_min[a]))
            throw std::invalid_argument("scaling stats: coordinate max must exceed min on every axis");
    if (coeff_mean.size() != coeff_std.size() || coeff_mean.empty())
        throw std::invalid_argument("scaling stats: malformed coefficient statistics");
    for (double s : coeff_std)
        if (!(s > 0.0)) throw std::invalid_argument("scaling stats: zero coefficient std");
}

nlohmann::json ScalingStats::to_json() const {
    nlohmann::json j;
    j["coord_min_mm"] = coord_min;
    j["coord_max_mm"] = coord_max;
    j["coeff_mean"] = coeff_mean;
    j["coeff_std"] = coeff_std;
    j["config_hash"] = config_hash;
    return j;
}

ScalingStats ScalingStats::from_json(const nlohmann::json& j) {
    ScalingStats st;
    st.coord_min = j.at("coord_min_mm").get<Vec3>();
    st.coord_max = j.at("coord_max_mm").get<Vec3>();
    st.coeff_mean = j.at("coeff_mean").get<std::vector<double>>();
    st.coeff_std = j.at("coeff_std").get<std::vector<double>>();
    if (j.contains("config_hash")) st.config_hash = j["config_hash"].get<std::string>();
    st.validate();
    return st;
}

void ScalingStats::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("scaling stats: cannot open '" + path + "' for writing");
    out << to_json().dump(2) << "\n";
}

ScalingStats ScalingStats::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scaling stats: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

Streamline minmax_scale(const Streamline& s, const ScalingStats& stats) {
    stats.validate();
    Streamline out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        for (int a = 0; a < 3; ++a)
            out[i][a] = 2.0 * (s[i][a] - stats.coord_min[a]) / (stats.coord_max[a] - stats.coord_min[a]) - 1.0;
    return out;
}

Streamline minmax_unscale(const Streamline& s, const ScalingStats& stats) {
    stats.validate();
    Streamline out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        for (int a = 0; a < 3; ++a)
            out[i][a] = stats.coord_min[a] + (s[i][a] + 1.0) * 0.5 * (stats.coord_max[a] - stats.coord_min[a]);
    return out;
}

bool out_of_bounds_scaled(const Streamline& scaled, double margin) {
    for (const Vec3& p : scaled)
        for (double c : p)
            if (std::abs(c) > margin) return true;
    return false;
}

sh::SHVolume zscore_volume(const sh::SHVolume& v, const ScalingStats& stats) {
    stats.validate();
    const int m = v.m();
    if (static_cast<int>(stats.coeff_mean.size()) != m)
        throw std::invalid_argument("zscore: stats coefficient count disagrees with volume");
    sh::SHVolume out = v;
    const std::int64_t vox = v.voxel_count();
    for (std::int64_t i = 0; i < vox; ++i)
        for (int q = 0; q < m; ++q)
            out.data[i * m + q] = (v.data[i * m + q] - stats.coeff_mean[static_cast<std::size_t>(q)]) /
                                  stats.coeff_std[static_cast<std::size_t>(q)];
    return out;
}

}  // namespace gentract::tract
