#include "gentract/gen/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gentract::gen {

NoiseSchedule NoiseSchedule::cosine(int timesteps) {
    if (timesteps < 1) throw std::invalid_argument("noise schedule: timesteps must be >= 1");
    constexpr double kOffset = 0.008;
    constexpr double kHalfPi = 1.57079632679489661923;
    const auto f = [&](double u) {
        const double c = std::cos((u + kOffset) / (1.0 + kOffset) * kHalfPi);
        return c * c;
    };
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.alpha.resize(static_cast<std::size_t>(timesteps));
    s.sigma.resize(static_cast<std::size_t>(timesteps));
    const double f0 = f(0.0);
    for (int t = 0; t < timesteps; ++t) {
        double abar = f((t + 1.0) / timesteps) / f0;
        abar = std::clamp(abar, 1e-6, 1.0 - 1e-6);
        s.alpha[static_cast<std::size_t>(t)] = std::sqrt(abar);
        s.sigma[static_cast<std::size_t>(t)] = std::sqrt(1.0 - abar);
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (timesteps < 1 || alpha.size() != static_cast<std::size_t>(timesteps) || sigma.size() != alpha.size())
        throw std::logic_error("noise schedule: malformed tables");
    for (int t = 0; t < timesteps; ++t) {
        const double a = alpha[static_cast<std::size_t>(t)], sg = sigma[static_cast<std::size_t>(t)];
        if (std::abs(a * a + sg * sg - 1.0) > 1e-12)
            throw std::logic_error("noise schedule: alpha^2 + sigma^2 deviates from 1");
        if (t > 0 && !(a < alpha[static_cast<std::size_t>(t) - 1]))
            throw std::logic_error("noise schedule: alpha must be strictly decreasing");
    }
}

}  // namespace gentract::gen
