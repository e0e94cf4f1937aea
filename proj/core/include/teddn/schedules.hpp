#pragma once

#include "teddn/tensor.hpp"

#include <cstdint>

namespace teddn {

struct TrainConfig {
    real lr = static_cast<real>(0.002);
    real weight_decay = static_cast<real>(1e-5);
    real adam_eps = static_cast<real>(1e-8);
    long batch_size = 32;
    real lr_decay = static_cast<real>(0.5);
    long warmup_epochs = 30;
    long curriculum_step = 3;
    long max_horizon = 12;
    long patience = 100;
    long max_epochs = 200;
    std::uint64_t seed = 1;
    // decided knobs the protocol leaves open
    long lr_plateau_window = 10;
    real lr_floor = static_cast<real>(1e-6);
    real mape_threshold = static_cast<real>(1.0);

    void validate() const; // throws ConfigError (all fields positive)
};

// 1 during warm-up, then +1 every curriculum_step epochs, capped.
long curriculum_horizon(long epoch, const TrainConfig& cfg);

// Halve the rate after `window` consecutive non-improving observations;
// never below `floor`.
class PlateauLr {
public:
    PlateauLr(real initial, real decay, long window, real floor);

    real current() const { return lr_; }
    void observe(double val_mae);

private:
    real lr_;
    real decay_;
    long window_;
    real floor_;
    double best_;
    long bad_ = 0;
};

// Strict-improvement tracker; stop once `patience` epochs pass without a new
// best.
class EarlyStopping {
public:
    explicit EarlyStopping(long patience);

    // Returns true when training should halt after this epoch.
    bool observe(long epoch, double val_mae);
    bool improved() const { return improved_; }
    long best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }

private:
    long patience_;
    double best_;
    long best_epoch_ = -1;
    bool improved_ = false;
};

} // namespace teddn
