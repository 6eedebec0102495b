#pragma once

// Multimodal masked pretraining: every optimizer step consumes one image
// mini-batch and one IQ mini-batch, sums the per-sample masked losses of both
// and normalizes by the combined batch size.
//
// Threading: the trainer is single-threaded and performs every reduction in a
// fixed order, so identical (data, config, seed) give bitwise identical
// parameters. Eigen is used without OpenMP.

#include "mmwfm/checkpoint.hpp"
#include "mmwfm/model.hpp"
#include "mmwfm/optim.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmwfm {

struct PretrainConfig {
  int batch_size = 16;
  int epochs = 800;
  int warmup_epochs = 40;
  double base_lr = 1e-3;
  double mask_ratio_image = 0.7;
  double mask_ratio_iq = 0.7;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const {
    require_config(batch_size >= 1, "pretrain: batch_size must be >= 1");
    require_config(epochs >= 1 && warmup_epochs >= 0 && warmup_epochs < epochs, "pretrain: need 0 <= warmup < epochs");
    require_config(mask_ratio_image > 0.0 && mask_ratio_image < 1.0 && mask_ratio_iq > 0.0 && mask_ratio_iq < 1.0,
                   "pretrain: mask ratios must lie in (0, 1)");
  }

  void write(KeyValueConfig& kv) const {
    kv.set("pretrain.batch_size", std::to_string(batch_size));
    kv.set("pretrain.epochs", std::to_string(epochs));
    kv.set("pretrain.warmup_epochs", std::to_string(warmup_epochs));
    kv.set("pretrain.base_lr", std::to_string(base_lr));
    kv.set("pretrain.mask_ratio_image", std::to_string(mask_ratio_image));
    kv.set("pretrain.mask_ratio_iq", std::to_string(mask_ratio_iq));
    kv.set("pretrain.seed", std::to_string(seed));
  }

  static PretrainConfig from_kv(const KeyValueConfig& kv) { return from_kv(kv, PretrainConfig()); }

  static PretrainConfig from_kv(const KeyValueConfig& kv, PretrainConfig c) {
    c.batch_size = int(kv.get_int("pretrain.batch_size", c.batch_size));
    c.epochs = int(kv.get_int("pretrain.epochs", c.epochs));
    c.warmup_epochs = int(kv.get_int("pretrain.warmup_epochs", c.warmup_epochs));
    c.base_lr = kv.get_double("pretrain.base_lr", c.base_lr);
    c.mask_ratio_image = kv.get_double("pretrain.mask_ratio_image", c.mask_ratio_image);
    c.mask_ratio_iq = kv.get_double("pretrain.mask_ratio_iq", c.mask_ratio_iq);
    c.seed = std::uint64_t(kv.get_int("pretrain.seed", (long long)c.seed));
    return c;
  }
};

/// One entry of the loss curve.
struct LossRecord {
  long long epoch = 0;
  long long step = 0;  // 1-based index of the update
  double loss_image = 0.0;
  double loss_iq = 0.0;
  double combined = 0.0;
  double lr = 0.0;
};

inline std::string format_loss_record(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%lld step=%lld loss_G=%.9g loss_Q=%.9g combined=%.9g lr=%.9g", r.epoch, r.step,
                r.loss_image, r.loss_iq, r.combined, r.lr);
  return buf;
}

/// A paired mini-batch: tokenized samples and their mask plans.
template <typename T>
struct PairedBatch {
  std::vector<const PatchSequence<T>*> images;
  std::vector<MaskPlan> image_plans;
  std::vector<const SegmentSequence<T>*> iq;
  std::vector<MaskPlan> iq_plans;
};

/// Forward/backward over both batches with gradients of the normalized
/// combined loss left in the parameter accumulators. No update is applied.
template <typename T>
LossReport accumulate_paired_gradients(MaskedAutoencoder<T>& model, const PairedBatch<T>& batch,
                                       double image_weight = 1.0, double iq_weight = 1.0) {
  if (batch.images.empty() || batch.iq.empty())
    throw ConfigError("pretrain step: both an image batch and an IQ batch are required");
  require_shape(batch.images.size() == batch.image_plans.size() && batch.iq.size() == batch.iq_plans.size(),
                "pretrain step: one mask plan per sample required");
  LossReport rep;
  rep.batch_image = int(batch.images.size());
  rep.batch_iq = int(batch.iq.size());
  const T norm = T(1) / T(rep.batch_image + rep.batch_iq);
  model.zero_grad();
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    const auto r = model.image_pass(*batch.images[i], batch.image_plans[i], norm * T(image_weight));
    rep.loss_image += double(r.loss);
    rep.masked_image += int(batch.image_plans[i].masked.size());
  }
  for (std::size_t i = 0; i < batch.iq.size(); ++i) {
    const auto r = model.iq_pass(*batch.iq[i], batch.iq_plans[i], norm * T(iq_weight));
    rep.loss_iq += double(r.loss);
    rep.masked_iq += int(batch.iq_plans[i].masked.size());
  }
  rep.combined = (rep.loss_image + rep.loss_iq) / double(rep.batch_image + rep.batch_iq);
  return rep;
}

/// Applies one Adam update to every trainable parameter of the model.
template <typename T>
void apply_update(MaskedAutoencoder<T>& model, Adam<T>& opt, double lr) {
  opt.begin_step();
  model.visit([&](const std::string& name, Param<T>& p) { opt.update(name, p, lr); });
}

/// One paired-batch step: gradients of both modalities, then exactly one update.
template <typename T>
LossReport pretrain_step(MaskedAutoencoder<T>& model, Adam<T>& opt, const PairedBatch<T>& batch, double lr) {
  const LossReport rep = accumulate_paired_gradients(model, batch);
  apply_update(model, opt, lr);
  return rep;
}

// ---------------------------------------------------------------------------
// Training state persistence

/// Parameters, Adam moments and the step counter of a pretraining run.
template <typename T>
Checkpoint make_checkpoint(MaskedAutoencoder<T>& model, const Adam<T>& opt, long long step,
                           const KeyValueConfig& extra = {}) {
  Checkpoint ck;
  KeyValueConfig kv = extra;
  const KeyValueConfig geometry = model.config.to_kv();
  for (const auto& [k, v] : geometry.values()) kv.set(k, v);
  kv.set("format", "pretrain");
  ck.config_text = kv.to_text();
  model.visit([&](const std::string& name, Param<T>& p) { ck.tensors["param." + name] = to_record(p.value); });
  for (const auto& [name, st] : opt.moments()) {
    ck.tensors["adam.m." + name] = to_record(st.m);
    ck.tensors["adam.v." + name] = to_record(st.v);
  }
  ck.tensors["state.adam_steps"] = scalar_record(opt.steps());
  ck.tensors["state.step"] = scalar_record(step);
  return ck;
}

/// Model geometry recorded in a checkpoint.
inline ModelConfig checkpoint_model_config(const Checkpoint& ck) {
  return ModelConfig::from_kv(KeyValueConfig::parse(ck.config_text));
}

inline void check_model_config(const Checkpoint& ck, const ModelConfig& expected) {
  const auto kv = KeyValueConfig::parse(ck.config_text);
  const auto want = expected.to_kv();
  std::string diff;
  for (const auto& [k, v] : want.values()) {
    const std::string got = kv.get_string(k, "<missing>");
    if (got != v) diff += " " + k + ": checkpoint " + got + " vs model " + v + ";";
  }
  if (!diff.empty()) throw ShapeError("checkpoint does not match model configuration:" + diff);
}

/// Loads parameters (and optimizer state when opt is given) into an already
/// constructed model. Returns the stored step counter.
template <typename T>
long long load_checkpoint_into(const Checkpoint& ck, MaskedAutoencoder<T>& model, Adam<T>* opt = nullptr) {
  check_model_config(ck, model.config);
  std::map<std::string, Param<T>*> params;
  model.visit([&](const std::string& name, Param<T>& p) { params["param." + name] = &p; });
  for (const auto& [name, p] : params) {
    if (!ck.tensors.count(name)) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
  }
  std::map<std::string, AdamMoments<T>> moments;
  long long step = 0, adam_steps = 0;
  for (const auto& [name, rec] : ck.tensors) {
    if (auto it = params.find(name); it != params.end()) {
      Param<T>& p = *it->second;
      p.value = from_record<T>(rec, name, p.value.rows(), p.value.cols());
    } else if (name.rfind("adam.m.", 0) == 0 || name.rfind("adam.v.", 0) == 0) {
      const std::string pname = name.substr(7);
      auto pit = params.find("param." + pname);
      if (pit == params.end()) throw CheckpointError("optimizer state for unknown tensor '" + pname + "'");
      const auto& pv = pit->second->value;
      auto& st = moments[pname];
      (name[5] == 'm' ? st.m : st.v) = from_record<T>(rec, name, pv.rows(), pv.cols());
    } else if (name == "state.step") {
      step = scalar_from_record(rec, name);
    } else if (name == "state.adam_steps") {
      adam_steps = scalar_from_record(rec, name);
    } else {
      throw CheckpointError("unknown tensor '" + name + "' in checkpoint");
    }
  }
  if (opt) {
    opt->moments() = std::move(moments);
    opt->set_steps(adam_steps);
  }
  return step;
}

// ---------------------------------------------------------------------------
// Training loop

/// Pretokenized corpora for both modalities.
template <typename T>
struct PretrainData {
  std::vector<PatchSequence<T>> images;
  std::vector<SegmentSequence<T>> iq;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<int> shuffled(int n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(idx[std::size_t(i)], idx[std::size_t(std::uniform_int_distribution<int>(0, i)(rng))]);
  return idx;
}

}  // namespace detail

/// Drives pretraining. Batch composition and masks are pure functions of
/// (seed, step), so resuming from a checkpoint reproduces the continuous run.
template <typename T>
class Pretrainer {
 public:
  Pretrainer(MaskedAutoencoder<T>& model, const PretrainData<T>& data, PretrainConfig cfg)
      : model_(model), data_(data), cfg_(cfg), opt_(AdamConfig{cfg.base_lr, cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps}) {
    cfg_.validate();
    if (data_.images.empty() || data_.iq.empty()) throw ConfigError("pretrain: both datasets must be non-empty");
    const std::size_t longest = std::max(data_.images.size(), data_.iq.size());
    steps_per_epoch_ = (long long)((longest + std::size_t(cfg_.batch_size) - 1) / std::size_t(cfg_.batch_size));
    schedule_ = Schedule{cfg_.warmup_epochs, cfg_.epochs, steps_per_epoch_, cfg_.base_lr};
  }

  long long steps_per_epoch() const { return steps_per_epoch_; }
  long long total_steps() const { return schedule_.total_steps(); }
  long long step() const { return step_; }
  const Schedule& schedule() const { return schedule_; }
  Adam<T>& optimizer() { return opt_; }

  /// Sample indices of modality `which` (0 image, 1 iq) for the given update.
  std::vector<int> batch_indices(int which, long long step) const {
    const int n = which == 0 ? int(data_.images.size()) : int(data_.iq.size());
    const long long longest = (long long)std::max(data_.images.size(), data_.iq.size());
    const long long epoch = step / steps_per_epoch_;
    const long long first = (step % steps_per_epoch_) * cfg_.batch_size;
    const long long last = std::min(first + cfg_.batch_size, longest);
    std::vector<int> out;
    std::vector<int> perm;
    long long perm_cycle = -1;
    for (long long q = first; q < last; ++q) {
      const long long cycle = q / n;
      if (cycle != perm_cycle) {
        perm = detail::shuffled(n, detail::mix_seed(detail::mix_seed(cfg_.seed, std::uint64_t(epoch)),
                                                    std::uint64_t(which) * 1000003ULL + std::uint64_t(cycle)));
        perm_cycle = cycle;
      }
      out.push_back(perm[std::size_t(q % n)]);
    }
    return out;
  }

  PairedBatch<T> make_batch(long long step) const {
    PairedBatch<T> b;
    const std::uint64_t base = detail::mix_seed(cfg_.seed ^ 0xA5A5A5A5ULL, std::uint64_t(step));
    const auto gi = batch_indices(0, step);
    const auto qi = batch_indices(1, step);
    for (std::size_t j = 0; j < gi.size(); ++j) {
      const auto& p = data_.images[std::size_t(gi[j])];
      b.images.push_back(&p);
      b.image_plans.push_back(sample_mask(p.count(), cfg_.mask_ratio_image, detail::mix_seed(base, 2 * j)));
    }
    for (std::size_t j = 0; j < qi.size(); ++j) {
      const auto& s = data_.iq[std::size_t(qi[j])];
      b.iq.push_back(&s);
      b.iq_plans.push_back(sample_mask(s.count(), cfg_.mask_ratio_iq, detail::mix_seed(base, 2 * j + 1)));
    }
    return b;
  }

  /// Runs the next update. Update k (1-based) uses lr_at(k).
  LossRecord train_step() {
    if (step_ >= total_steps()) throw ConfigError("pretrain: schedule exhausted");
    const double lr = lr_at(step_ + 1, schedule_);
    const LossReport rep = pretrain_step(model_, opt_, make_batch(step_), lr);
    ++step_;
    return LossRecord{(step_ - 1) / steps_per_epoch_, step_, rep.mean_image(), rep.mean_iq(), rep.combined, lr};
  }

  /// Trains until `until_step` (default: end of schedule).
  std::vector<LossRecord> run(long long until_step = -1, const std::function<void(const LossRecord&)>& on_step = {}) {
    if (until_step < 0) until_step = total_steps();
    std::vector<LossRecord> curve;
    while (step_ < until_step) {
      curve.push_back(train_step());
      if (on_step) on_step(curve.back());
    }
    return curve;
  }

  Checkpoint checkpoint() const {
    KeyValueConfig kv;
    cfg_.write(kv);
    return make_checkpoint(model_, opt_, step_, kv);
  }

  void resume(const Checkpoint& ck) { step_ = load_checkpoint_into(ck, model_, &opt_); }

 private:
  MaskedAutoencoder<T>& model_;
  const PretrainData<T>& data_;
  PretrainConfig cfg_;
  Adam<T> opt_;
  Schedule schedule_;
  long long steps_per_epoch_ = 1;
  long long step_ = 0;
};

/// Full pretraining run from a fresh model initialized with `seed`.
template <typename T>
Checkpoint run_pretraining(const PretrainData<T>& data, const ModelConfig& model_cfg, PretrainConfig cfg,
                           std::vector<LossRecord>* curve = nullptr,
                           const std::function<void(const LossRecord&)>& on_step = {}) {
  MaskedAutoencoder<T> model(model_cfg, cfg.seed);
  Pretrainer<T> trainer(model, data, cfg);
  auto c = trainer.run(-1, on_step);
  if (curve) *curve = std::move(c);
  return trainer.checkpoint();
}

}  // namespace mmwfm
