#pragma once

#include <functional>
#include <vector>

#include "gentract/gen/model.hpp"
#include "gentract/gen/schedule.hpp"
#include "gentract/nd/tensor.hpp"

namespace gentract::gen {

/// Model callback over a batch: x is (B, p, 3), one time entry per item.
using BatchModelFn = std::function<nd::Tensor(const nd::Tensor& x, const TimeBatch& t)>;

/// Forward corruption x_t = alpha_t x_0 + sigma_t eps, per batch item.
nd::Tensor diffusion_corrupt(const nd::Tensor& x0, const std::vector<int>& t, const nd::Tensor& eps,
                             const NoiseSchedule& schedule);

/// Linear interpolant x_t = (1 - t) x_0 + t x_1 (x_0 noise, x_1 data).
nd::Tensor fm_interpolate(const nd::Tensor& x0, const nd::Tensor& x1, const std::vector<double>& t);

/// Mean squared error between the model's noise prediction and the drawn
/// noise, averaged over batch, points and axes.
double diffusion_loss(const nd::Tensor& x0, const std::vector<int>& t, const nd::Tensor& eps,
                      const NoiseSchedule& schedule, const BatchModelFn& model);

/// Mean squared error between the predicted velocity and x_1 - x_0.
double fm_loss(const nd::Tensor& x1, const nd::Tensor& x0, const std::vector<double>& t,
               const BatchModelFn& model);

double mse(const nd::Tensor& a, const nd::Tensor& b);

}  // namespace gentract::gen
