#pragma once

#include <functional>
#include <vector>

#include "gentract/gen/schedule.hpp"
#include "gentract/nd/rng.hpp"
#include "gentract/nd/tensor.hpp"

namespace gentract::gen {

/// Noise predictor at one discrete timestep (applied to a whole tensor,
/// which may be a batch).
using EpsModelFn = std::function<nd::Tensor(const nd::Tensor& x, int t)>;

/// Velocity field at one continuous time in [0, 1].
using VelocityFn = std::function<nd::Tensor(const nd::Tensor& x, double t)>;

/// Uniformly spaced decreasing timestep subsequence over [0, T).
std::vector<int> ddim_timesteps(int timesteps, int steps);

/// Deterministic DDIM (eta = 0) from a given start state: each step
/// estimates x0_hat = (x - sigma eps_hat) / alpha and re-noises to the next
/// (lower) timestep; the last step returns x0_hat itself.
nd::Tensor ddim_sample_from(nd::Tensor x, const EpsModelFn& model, const NoiseSchedule& schedule, int steps);

/// DDIM from N(0, I) drawn with the given rng.
nd::Tensor ddim_sample(const std::vector<int>& shape, const EpsModelFn& model, const NoiseSchedule& schedule,
                       int steps, nd::Rng& rng);

/// Explicit Euler integration of dx/dt = v(x, t) from t=0 to t=1.
nd::Tensor euler_ode_sample_from(nd::Tensor x, const VelocityFn& field, int steps);

nd::Tensor euler_ode_sample(const std::vector<int>& shape, const VelocityFn& field, int steps, nd::Rng& rng);

nd::Tensor gaussian_tensor(const std::vector<int>& shape, nd::Rng& rng);

}  // namespace gentract::gen
