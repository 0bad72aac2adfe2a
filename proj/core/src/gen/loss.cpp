#include "gentract/gen/loss.hpp"

#include <stdexcept>

namespace gentract::gen {

namespace {

std::int64_t item_size(const nd::Tensor& batched, std::size_t items) {
    if (batched.rank() < 1 || batched.dim(0) != static_cast<int>(items))
        throw std::invalid_argument("batch leading extent disagrees with per-item data");
    return batched.numel() / static_cast<std::int64_t>(items);
}

}  // namespace

nd::Tensor diffusion_corrupt(const nd::Tensor& x0, const std::vector<int>& t, const nd::Tensor& eps,
                             const NoiseSchedule& schedule) {
    if (!x0.same_shape(eps)) throw std::invalid_argument("diffusion_corrupt: x0/eps shape mismatch");
    const std::int64_t per = item_size(x0, t.size());
    nd::Tensor xt(x0.shape());
    for (std::size_t b = 0; b < t.size(); ++b) {
        if (t[b] < 0 || t[b] >= schedule.timesteps)
            throw std::invalid_argument("diffusion_corrupt: timestep out of range");
        const double a = schedule.alpha[static_cast<std::size_t>(t[b])];
        const double s = schedule.sigma[static_cast<std::size_t>(t[b])];
        for (std::int64_t i = 0; i < per; ++i) {
            const std::int64_t k = static_cast<std::int64_t>(b) * per + i;
            xt[k] = a * x0[k] + s * eps[k];
        }
    }
    return xt;
}

nd::Tensor fm_interpolate(const nd::Tensor& x0, const nd::Tensor& x1, const std::vector<double>& t) {
    if (!x0.same_shape(x1)) throw std::invalid_argument("fm_interpolate: x0/x1 shape mismatch");
    const std::int64_t per = item_size(x0, t.size());
    nd::Tensor xt(x0.shape());
    for (std::size_t b = 0; b < t.size(); ++b) {
        for (std::int64_t i = 0; i < per; ++i) {
            const std::int64_t k = static_cast<std::int64_t>(b) * per + i;
            xt[k] = (1.0 - t[b]) * x0[k] + t[b] * x1[k];
        }
    }
    return xt;
}

double mse(const nd::Tensor& a, const nd::Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

double diffusion_loss(const nd::Tensor& x0, const std::vector<int>& t, const nd::Tensor& eps,
                      const NoiseSchedule& schedule, const BatchModelFn& model) {
    const nd::Tensor xt = diffusion_corrupt(x0, t, eps, schedule);
    TimeBatch tb;
    tb.steps = t;
    const nd::Tensor pred = model(xt, tb);
    return mse(pred, eps);
}

double fm_loss(const nd::Tensor& x1, const nd::Tensor& x0, const std::vector<double>& t,
               const BatchModelFn& model) {
    const nd::Tensor xt = fm_interpolate(x0, x1, t);
    TimeBatch tb;
    tb.times = t;
    const nd::Tensor pred = model(xt, tb);
    nd::Tensor target(x1.shape());
    for (std::int64_t i = 0; i < target.numel(); ++i) target[i] = x1[i] - x0[i];
    return mse(pred, target);
}

}  // namespace gentract::gen
