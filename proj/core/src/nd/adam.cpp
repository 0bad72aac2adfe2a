#include "gentract/nd/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gentract::nd {

Adam::Adam(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* p : params_) {
        m_.push_back(Tensor::zeros(p->shape()));
        v_.push_back(Tensor::zeros(p->shape()));
    }
}

void Adam::step(const GradientMap& grads) {
    std::vector<Tensor> held;
    held.reserve(params_.size());
    for (const Tensor* p : params_) held.push_back(grads.grad(*p));
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(held.size());
    for (const Tensor& t : held) ptrs.push_back(&t);
    step(ptrs);
}

void Adam::step(const std::vector<const Tensor*>& grads) {
    if (grads.size() != params_.size()) throw std::invalid_argument("adam: gradient count mismatch");
    ++step_count_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = *params_[pi];
        const Tensor& g = *grads[pi];
        if (!p.same_shape(g)) throw std::invalid_argument("adam: gradient shape mismatch");
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        p.check_finite("adam_step");
    }
}

}  // namespace gentract::nd
