#pragma once

#include <cstdint>
#include <vector>

#include "gentract/nd/graph.hpp"
#include "gentract/nd/tensor.hpp"

namespace gentract::nd {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive optimizer over a fixed, ordered parameter list.
class Adam {
public:
    Adam(std::vector<Tensor*> params, AdamConfig config);

    /// One update from a gradient map produced by Graph::backward.
    void step(const GradientMap& grads);

    /// One update from explicit gradients, ordered like the parameter list.
    void step(const std::vector<const Tensor*>& grads);

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }
    double& lr() { return config_.lr; }

    std::size_t param_count() const { return params_.size(); }
    Tensor& moment1(std::size_t i) { return m_[i]; }
    Tensor& moment2(std::size_t i) { return v_[i]; }
    void restore(std::int64_t step_count) { step_count_ = step_count; }

private:
    std::vector<Tensor*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig config_;
    std::int64_t step_count_ = 0;
};

}  // namespace gentract::nd
