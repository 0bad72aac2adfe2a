#pragma once

#include <vector>

namespace gentract::gen {

/// Variance-preserving discrete noise schedule: x_t = alpha[t] x_0 +
/// sigma[t] eps with alpha^2 + sigma^2 = 1, alpha strictly decreasing from
/// ~1 to ~0 over t in [0, T).
struct NoiseSchedule {
    int timesteps = 0;
    std::vector<double> alpha;
    std::vector<double> sigma;

    /// Squared-cosine schedule with the usual small offset; the terminal
    /// alpha-bar is floored at 1e-6 so the x_0 estimate stays defined.
    static NoiseSchedule cosine(int timesteps);

    void validate() const;
};

}  // namespace gentract::gen
