#include "gentract/tract/streamline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gentract::tract {

void validate_streamline(const Streamline& s) {
    if (s.size() < 2) throw std::invalid_argument("streamline must have at least 2 points");
    for (const Vec3& p : s)
        for (double c : p)
            if (!std::isfinite(c)) throw std::invalid_argument("streamline contains non-finite coordinates");
}

double polyline_length(const Streamline& s) {
    double len = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) len += norm(s[i] - s[i - 1]);
    return len;
}

Streamline resample_streamline(const Streamline& s, int p) {
    validate_streamline(s);
    if (p < 2) throw std::invalid_argument("resample: p must be >= 2");
    const std::size_t n = s.size();
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + norm(s[i] - s[i - 1]);
    const double total = cum.back();
    if (total == 0.0) throw std::invalid_argument("resample: zero-length streamline");

    Streamline out(static_cast<std::size_t>(p));
    out.front() = s.front();
    out.back() = s.back();
    std::size_t seg = 0;
    for (int j = 1; j < p - 1; ++j) {
        const double target = total * j / (p - 1);
        while (seg + 2 < n && cum[seg + 1] < target) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        out[static_cast<std::size_t>(j)] = s[seg] + t * (s[seg + 1] - s[seg]);
    }
    return out;
}

Streamline canonicalize(const Streamline& s) {
    validate_streamline(s);
    const Vec3& a = s.front();
    const Vec3& b = s.back();
    const bool flip = std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
    if (!flip) return s;
    Streamline r(s.rbegin(), s.rend());
    return r;
}

}  // namespace gentract::tract
