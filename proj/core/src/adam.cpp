#include "teddn/adam.hpp"

#include "teddn/error.hpp"

#include <cmath>

namespace teddn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    slots_.reserve(params_.size());
    for (Parameter* p : params_) {
        if (!p) throw ContractError("Adam: null parameter");
        slots_.push_back({Tensor::zeros(p->value.shape()), Tensor::zeros(p->value.shape())});
    }
}

void Adam::step(real lr) {
    if (lr <= 0) throw ConfigError("Adam: learning rate must be positive, got " + std::to_string(lr));
    ++steps_;
    const real b1 = cfg_.beta1;
    const real b2 = cfg_.beta2;
    const real bc1 = 1 - std::pow(b1, static_cast<real>(steps_));
    const real bc2 = 1 - std::pow(b2, static_cast<real>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        Slot& s = slots_[i];
        real* value = p.value.data();
        const real* grad = p.grad.data();
        real* m = s.m.data();
        real* v = s.v.data();
        const long n = p.value.size();
        for (long j = 0; j < n; ++j) {
            value[j] -= lr * cfg_.weight_decay * value[j];
            m[j] = b1 * m[j] + (1 - b1) * grad[j];
            v[j] = b2 * v[j] + (1 - b2) * grad[j] * grad[j];
            const real mhat = m[j] / bc1;
            const real vhat = v[j] / bc2;
            value[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

} // namespace teddn
