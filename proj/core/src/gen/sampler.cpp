#include "gentract/gen/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace gentract::gen {

std::vector<int> ddim_timesteps(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw std::invalid_argument("ddim: steps must be in [1, T]");
    std::vector<int> taus;
    taus.reserve(static_cast<std::size_t>(steps));
    if (steps == 1) {
        taus.push_back(timesteps - 1);
        return taus;
    }
    int prev = -1;
    for (int j = 0; j < steps; ++j) {
        // Descending from T-1 to 0.
        const double u = static_cast<double>(steps - 1 - j) / (steps - 1);
        int t = static_cast<int>(std::lround(u * (timesteps - 1)));
        if (t == prev) t = prev - 1;  // guard against rounding collisions
        taus.push_back(t);
        prev = t;
    }
    return taus;
}

nd::Tensor gaussian_tensor(const std::vector<int>& shape, nd::Rng& rng) {
    nd::Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

nd::Tensor ddim_sample_from(nd::Tensor x, const EpsModelFn& model, const NoiseSchedule& schedule, int steps) {
    const std::vector<int> taus = ddim_timesteps(schedule.timesteps, steps);
    for (std::size_t j = 0; j < taus.size(); ++j) {
        const int t = taus[j];
        const double a = schedule.alpha[static_cast<std::size_t>(t)];
        const double s = schedule.sigma[static_cast<std::size_t>(t)];
        const nd::Tensor eps_hat = model(x, t);
        if (!eps_hat.same_shape(x)) throw std::invalid_argument("ddim: model output shape mismatch");
        nd::Tensor x0_hat(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) x0_hat[i] = (x[i] - s * eps_hat[i]) / a;
        if (j + 1 < taus.size()) {
            const int tn = taus[j + 1];
            const double an = schedule.alpha[static_cast<std::size_t>(tn)];
            const double sn = schedule.sigma[static_cast<std::size_t>(tn)];
            for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = an * x0_hat[i] + sn * eps_hat[i];
        } else {
            x = std::move(x0_hat);
        }
    }
    x.check_finite("ddim_sample");
    return x;
}

nd::Tensor ddim_sample(const std::vector<int>& shape, const EpsModelFn& model, const NoiseSchedule& schedule,
                       int steps, nd::Rng& rng) {
    return ddim_sample_from(gaussian_tensor(shape, rng), model, schedule, steps);
}

nd::Tensor euler_ode_sample_from(nd::Tensor x, const VelocityFn& field, int steps) {
    if (steps < 1) throw std::invalid_argument("euler: steps must be >= 1");
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        const nd::Tensor v = field(x, t);
        if (!v.same_shape(x)) throw std::invalid_argument("euler: field output shape mismatch");
        for (std::int64_t i = 0; i < x.numel(); ++i) x[i] += dt * v[i];
    }
    x.check_finite("euler_ode_sample");
    return x;
}

nd::Tensor euler_ode_sample(const std::vector<int>& shape, const VelocityFn& field, int steps, nd::Rng& rng) {
    return euler_ode_sample_from(gaussian_tensor(shape, rng), field, steps);
}

}  // namespace gentract::gen
