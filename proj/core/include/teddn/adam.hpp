#pragma once

#include "teddn/tape.hpp"
#include "teddn/tensor.hpp"

#include <vector>

namespace teddn {

struct AdamConfig {
    real lr = static_cast<real>(0.002);
    real beta1 = static_cast<real>(0.9);
    real beta2 = static_cast<real>(0.999);
    real eps = static_cast<real>(1e-8);
    real weight_decay = static_cast<real>(1e-5);
};

// Adam with decoupled weight decay. The decay term shrinks the value before
// the moment-based delta is applied, so the moments never see it.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

    void step() { step(cfg_.lr); }
    void step(real lr);
    void zero_grad();
    long step_count() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        Tensor m;
        Tensor v;
    };

    std::vector<Parameter*> params_;
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    long steps_ = 0;
};

} // namespace teddn
