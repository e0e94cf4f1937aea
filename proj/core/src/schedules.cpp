#include "teddn/schedules.hpp"

#include "teddn/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace teddn {

void TrainConfig::validate() const {
    auto positive = [](double v, const char* what) {
        if (v <= 0) throw ConfigError(std::string("train config: ") + what + " must be positive, got " +
                                      std::to_string(v));
    };
    positive(lr, "lr");
    positive(weight_decay, "weight_decay");
    positive(adam_eps, "adam_eps");
    positive(static_cast<double>(batch_size), "batch_size");
    positive(lr_decay, "lr_decay");
    positive(static_cast<double>(warmup_epochs), "warmup_epochs");
    positive(static_cast<double>(curriculum_step), "curriculum_step");
    positive(static_cast<double>(max_horizon), "max_horizon");
    positive(static_cast<double>(patience), "patience");
    positive(static_cast<double>(max_epochs), "max_epochs");
    positive(static_cast<double>(lr_plateau_window), "lr_plateau_window");
    positive(lr_floor, "lr_floor");
    positive(mape_threshold, "mape_threshold");
    if (lr_decay >= 1) throw ConfigError("train config: lr_decay must be < 1");
}

long curriculum_horizon(long epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ContractError("curriculum_horizon: negative epoch");
    if (epoch < cfg.warmup_epochs) return 1;
    return std::min(cfg.max_horizon, 1 + (epoch - cfg.warmup_epochs) / cfg.curriculum_step);
}

PlateauLr::PlateauLr(real initial, real decay, long window, real floor)
    : lr_(initial), decay_(decay), window_(window), floor_(floor),
      best_(std::numeric_limits<double>::infinity()) {
    if (initial <= 0 || decay <= 0 || decay >= 1 || window < 1 || floor <= 0)
        throw ConfigError("plateau lr: invalid schedule parameters");
}

void PlateauLr::observe(double val_mae) {
    if (val_mae < best_) {
        best_ = val_mae;
        bad_ = 0;
        return;
    }
    if (++bad_ >= window_) {
        lr_ = std::max(floor_, lr_ * decay_);
        bad_ = 0;
    }
}

EarlyStopping::EarlyStopping(long patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw ConfigError("early stopping: patience must be >= 1");
}

bool EarlyStopping::observe(long epoch, double val_mae) {
    improved_ = val_mae < best_;
    if (improved_) {
        best_ = val_mae;
        best_epoch_ = epoch;
    }
    return best_epoch_ >= 0 && epoch - best_epoch_ >= patience_;
}

} // namespace teddn
