#pragma once

#include "mmwfm/core.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace mmwfm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamMoments {
  Mat<T> m;
  Mat<T> v;
};

/// Adam with bias correction; state is keyed by parameter name so it can be
/// checkpointed and restored independently of object identity.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }

  std::map<std::string, AdamMoments<T>>& moments() { return moments_; }
  const std::map<std::string, AdamMoments<T>>& moments() const { return moments_; }

  /// Starts one update. Call update() for every trainable parameter afterwards.
  void begin_step() { ++steps_; }

  void update(const std::string& name, Param<T>& p, double lr) {
    if (!p.trainable) return;
    auto& st = moments_[name];
    if (st.m.size() == 0) {
      st.m = Mat<T>::Zero(p.value.rows(), p.value.cols());
      st.v = Mat<T>::Zero(p.value.rows(), p.value.cols());
    }
    require_shape(st.m.rows() == p.value.rows() && st.m.cols() == p.value.cols(),
                  "adam: moment shape mismatch for " + name);
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T c1 = T(1) - T(std::pow(cfg_.beta1, double(steps_)));
    const T c2 = T(1) - T(std::pow(cfg_.beta2, double(steps_)));
    const T step = T(lr), eps = T(cfg_.eps);
    st.m = b1 * st.m + (T(1) - b1) * p.grad;
    st.v = b2 * st.v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= step * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + eps);
  }

 private:
  AdamConfig cfg_;
  long long steps_ = 0;
  std::map<std::string, AdamMoments<T>> moments_;
};

/// Linear warm-up from zero to base_lr, then cosine annealing to zero.
struct Schedule {
  int warmup_epochs = 40;
  int total_epochs = 800;
  long long steps_per_epoch = 1;
  double base_lr = 1e-3;

  long long warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  long long total_steps() const { return total_epochs * steps_per_epoch; }

  void validate() const {
    require_config(steps_per_epoch >= 1, "schedule: steps_per_epoch must be >= 1");
    require_config(warmup_epochs >= 0 && total_epochs >= 1 && warmup_epochs < total_epochs,
                   "schedule: need 0 <= warmup < total epochs");
    require_config(base_lr >= 0.0, "schedule: negative learning rate");
  }
};

inline double lr_at(long long step, const Schedule& s) {
  s.validate();
  const long long warm = s.warmup_steps(), total = s.total_steps();
  if (step < 0 || step > total)
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
  if (step < warm) return s.base_lr * (double(step) / double(warm));
  const double progress = double(step - warm) / double(total - warm);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mmwfm
