#include "gentract/eval/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

#include "gentract/nd/parallel.hpp"

namespace gentract::eval {

double mdf(const tract::Streamline& a, const tract::Streamline& b) {
    if (a.size() != b.size()) throw std::invalid_argument("mdf: point counts differ");
    if (a.empty()) throw std::invalid_argument("mdf: empty streamlines");
    const std::size_t n = a.size();
    double direct = 0.0, flipped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        direct += norm(a[i] - b[i]);
        flipped += norm(a[i] - b[n - 1 - i]);
    }
    return std::min(direct, flipped) / static_cast<double>(n);
}

FilterResult filter_streamlines(const tract::Tractogram& t, const sh::GroundTruth& gt, double tau_mm) {
    if (t.streamlines.empty()) throw std::invalid_argument("filter: empty tractogram");
    if (gt.bundles.empty()) throw std::invalid_argument("filter: ground truth has no bundles");
    if (!(tau_mm > 0.0)) throw std::invalid_argument("filter: tau must be positive");

    FilterResult result;
    result.rows.resize(t.streamlines.size());
    nd::parallel_for(static_cast<std::int64_t>(t.streamlines.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            StreamlineVerdict& row = result.rows[static_cast<std::size_t>(i)];
            if (!t.out_of_bounds.empty() && t.out_of_bounds[static_cast<std::size_t>(i)]) {
                row = {false, "", std::numeric_limits<double>::infinity()};
                continue;
            }
            const tract::Streamline& s = t.streamlines[static_cast<std::size_t>(i)];
            double best = std::numeric_limits<double>::infinity();
            const sh::GroundTruthBundle* best_bundle = nullptr;
            for (const sh::GroundTruthBundle& b : gt.bundles) {
                const tract::Streamline cand =
                    s.size() == b.centroid.size() ? s : tract::resample_streamline(s, static_cast<int>(b.centroid.size()));
                const double d = mdf(cand, b.centroid);
                if (d < best) {
                    best = d;
                    best_bundle = &b;
                }
            }
            row.bundle = best_bundle->name;
            row.distance_mm = best;
            const Vec3& start = s.front();
            const Vec3& end = s.back();
            const bool ends_ok = (best_bundle->endpoints[0].contains(start) && best_bundle->endpoints[1].contains(end)) ||
                                 (best_bundle->endpoints[1].contains(start) && best_bundle->endpoints[0].contains(end));
            row.tp = best <= tau_mm && ends_ok;
        }
    });
    return result;
}

double precision(const FilterResult& r) {
    if (r.rows.empty()) throw std::invalid_argument("precision: no streamlines");
    std::size_t tp = 0;
    for (const StreamlineVerdict& row : r.rows) tp += row.tp ? 1 : 0;
    return static_cast<double>(tp) / static_cast<double>(r.rows.size());
}

int bundles_discovered(const FilterResult& r, const sh::GroundTruth& gt, int k) {
    if (k < 1) throw std::invalid_argument("bundles_discovered: k must be >= 1");
    std::map<std::string, int> counts;
    for (const StreamlineVerdict& row : r.rows)
        if (row.tp) ++counts[row.bundle];
    int discovered = 0;
    for (const sh::GroundTruthBundle& b : gt.bundles) {
        auto it = counts.find(b.name);
        if (it != counts.end() && it->second >= k) ++discovered;
    }
    return discovered;
}

}  // namespace gentract::eval
