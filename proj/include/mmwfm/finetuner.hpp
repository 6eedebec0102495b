#pragma once

// Downstream adaptation of the pretrained encoder: a linear task head on the
// mean-pooled encoder output, three freezing regimes and the fine-tuning loop.

#include "mmwfm/pretrainer.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmwfm {

struct TaskSpec {
  std::string id = "task";
  Modality modality = Modality::IQ;
  TaskKind kind = TaskKind::Classification;
  int outputs = 2;  // number of classes, or regression output dimension

  void validate() const {
    if (kind == TaskKind::Classification) require_config(outputs >= 2, "task: classification needs >= 2 classes");
    else require_config(outputs >= 1, "task: regression needs >= 1 output");
  }
};

enum class Regime { LinearProbe, PartialFineTune, LoRA };

inline std::string regime_name(Regime r) {
  switch (r) {
    case Regime::LinearProbe: return "lp";
    case Regime::PartialFineTune: return "ft";
    case Regime::LoRA: return "lora";
  }
  return "?";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "lp") return Regime::LinearProbe;
  if (s == "ft") return Regime::PartialFineTune;
  if (s == "lora") return Regime::LoRA;
  throw ConfigError("unknown regime '" + s + "' (expected lp, ft or lora)");
}

struct FreezePolicy {
  Regime regime = Regime::LinearProbe;
  int k = 0;             // unfrozen trailing blocks for PartialFineTune
  int lora_rank = 32;
  double lora_alpha = 32.0;
};

/// One labeled example, already tokenized.
template <typename T>
struct TaskExample {
  Mat<T> tokens;                // patches or segments
  std::vector<int> antenna_of;  // IQ only
  int label = 0;                // classification
  RowVec<T> target;             // regression
};

/// Encoder plus linear head for one downstream task. Owns its copy of the
/// modality input projection (and antenna embeddings for IQ); the encoder
/// blocks hold the shared pretrained weights.
template <typename T>
class TaskModel {
 public:
  TaskSpec spec;
  ModelConfig config;
  AffineProjection<T> input;
  AntennaEmbedding<T> antenna;
  TransformerStack<T> encoder;
  Linear<T> head;
  Mat<T> pos;  // frozen positional table of the task's modality
  FreezePolicy policy;

  /// Pretrained backbone with a fresh zero-bias head drawn from head_seed.
  static TaskModel from_pretrained(const MaskedAutoencoder<T>& mae, const TaskSpec& spec, std::uint64_t head_seed) {
    spec.validate();
    TaskModel m;
    m.spec = spec;
    m.config = mae.config;
    m.encoder = mae.encoder;
    if (spec.modality == Modality::Image) {
      m.input = mae.embedder.image;
      m.pos = mae.enc_pos.grid;
    } else {
      m.input = mae.embedder.iq;
      m.antenna = mae.embedder.antenna;
      m.pos = mae.enc_pos.sequence;
    }
    m.head = Linear<T>(mae.config.backbone.enc_dim, spec.outputs);
    std::mt19937_64 rng(head_seed);
    m.head.init(rng);
    m.apply_freeze(FreezePolicy{});
    return m;
  }

  bool has_antenna() const { return spec.modality == Modality::IQ; }

  /// Parameters excluding LoRA adapters.
  void visit_base(const ParamVisitor<T>& f) {
    input.visit("input", f);
    if (has_antenna()) f("antenna", antenna.table);
    encoder.visit("encoder", f);
    head.visit("head", f);
  }

  void visit(const ParamVisitor<T>& f) {
    visit_base(f);
    encoder.visit_adapters("encoder", f);
  }

  void zero_grad() {
    visit([](const std::string&, Param<T>& p) { p.zero_grad(); });
  }

  /// Sets the trainable partition. Positional tables are never parameters;
  /// input projections, antenna embeddings and the head always train.
  /// For LoRA, fresh adapters (B = 0, A drawn from adapter_seed) are inserted.
  void apply_freeze(const FreezePolicy& p, std::uint64_t adapter_seed = 0) {
    const int depth = encoder.depth();
    if (p.regime == Regime::PartialFineTune) require_config(p.k >= 0 && p.k <= depth, "freeze: k exceeds encoder depth");
    if (p.regime == Regime::LoRA) require_config(p.lora_rank >= 1, "freeze: LoRA rank must be >= 1");
    policy = p;
    visit_base([](const std::string&, Param<T>& q) { q.trainable = false; });
    input.proj.weight.trainable = input.proj.bias.trainable = true;
    antenna.table.trainable = has_antenna();
    head.weight.trainable = head.bias.trainable = true;
    if (p.regime == Regime::PartialFineTune) {
      for (int i = depth - p.k; i < depth; ++i)
        encoder.blocks[std::size_t(i)].visit("", [](const std::string&, Param<T>& q) { q.trainable = true; });
    }
    if (p.regime == Regime::LoRA) attach_adapters(adapter_seed);
    else detach_adapters();
  }

  /// Inserts fresh adapters (B = 0) on query and value of every encoder block.
  void attach_adapters(std::uint64_t seed) {
    require_config(policy.regime == Regime::LoRA, "attach_adapters: policy regime is not LoRA");
    std::mt19937_64 rng(seed);
    const int d = config.backbone.enc_dim;
    for (auto& b : encoder.blocks) {
      b.attn.lora_query.emplace(d, d, policy.lora_rank, policy.lora_alpha);
      b.attn.lora_value.emplace(d, d, policy.lora_rank, policy.lora_alpha);
      b.attn.lora_query->init(rng);
      b.attn.lora_value->init(rng);
    }
  }

  void detach_adapters() {
    for (auto& b : encoder.blocks) {
      b.attn.lora_query.reset();
      b.attn.lora_value.reset();
    }
  }

  long long trainable_param_count() {
    long long n = 0;
    visit([&](const std::string&, Param<T>& p) {
      if (p.trainable) n += p.size();
    });
    return n;
  }

  Mat<T> embed(const TaskExample<T>& x, AffineCache<T>* cache = nullptr) const {
    require_shape(x.tokens.rows() == pos.rows(), "task model: " + std::to_string(x.tokens.rows()) +
                                                     " tokens but positional table has " + std::to_string(pos.rows()));
    AffineCache<T> local;
    Mat<T> z = input.forward(x.tokens, cache ? *cache : local) + pos;
    if (has_antenna()) z += antenna.gather(x.antenna_of);
    return z;
  }

  /// Pooled encoder representation of all tokens; nothing is masked.
  RowVec<T> represent(const TaskExample<T>& x) const { return mean_pool(encoder.forward(embed(x))); }

  RowVec<T> predict(const TaskExample<T>& x) const { return head.forward(represent(x)); }

  /// Loss of one example; accumulates grad_scale * d(loss) into trainable parameters.
  T loss_and_backward(const TaskExample<T>& x, T grad_scale) {
    AffineCache<T> ac;
    StackCache<T> sc;
    const Mat<T> z = embed(x, &ac);
    const Mat<T> h = encoder.forward(z, sc);
    const RowVec<T> pooled = mean_pool(h);
    const RowVec<T> out = head.forward(pooled);
    T loss;
    RowVec<T> dout;
    if (spec.kind == TaskKind::Classification) {
      loss = cross_entropy(out, x.label);
      dout = cross_entropy_grad(out, x.label);
    } else {
      loss = mse(out, x.target);
      dout = mse_grad(out, x.target);
    }
    dout *= grad_scale;
    const Mat<T> dpooled = head.backward(pooled, dout);
    const Mat<T> dz = encoder.backward(sc, mean_pool_backward<T>(h.rows(), dpooled.row(0)));
    if (has_antenna()) antenna.backward(x.antenna_of, dz);
    input.backward(x.tokens, ac, dz);
    return loss;
  }
};

template <typename T>
int argmax(const RowVec<T>& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return int(i);
}

/// Task metric on a labeled set: mean per-class accuracy for classification,
/// mean localization error for regression.
template <typename T>
double evaluate(const TaskModel<T>& model, std::span<const TaskExample<T>> data) {
  if (model.spec.kind == TaskKind::Classification) {
    std::vector<int> preds, labels;
    for (const auto& x : data) {
      preds.push_back(argmax(model.predict(x)));
      labels.push_back(x.label);
    }
    return mean_per_class_accuracy(preds, labels, model.spec.outputs);
  }
  std::vector<std::vector<double>> pred, truth;
  for (const auto& x : data) {
    const RowVec<T> p = model.predict(x);
    pred.emplace_back(p.data(), p.data() + p.size());
    std::vector<double> t(std::size_t(x.target.size()));
    for (Eigen::Index j = 0; j < x.target.size(); ++j) t[std::size_t(j)] = double(x.target(j));
    truth.push_back(std::move(t));
  }
  return mean_localization_error(pred, truth);
}

inline std::string metric_name(TaskKind k) {
  return k == TaskKind::Classification ? "mean_per_class_accuracy" : "mean_localization_error";
}

struct FinetuneConfig {
  AdamConfig adam{1e-4};
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  double metric = 0.0;
  std::vector<double> epoch_loss;
  long long steps = 0;
};

/// Minimizes the task loss over trainable parameters only, then reports the
/// task metric on the held-out split.
template <typename T>
FinetuneResult finetune(TaskModel<T>& model, std::span<const TaskExample<T>> train, std::span<const TaskExample<T>> test,
                        const FinetuneConfig& cfg) {
  if (train.empty()) throw ConfigError("finetune: empty training set");
  require_config(cfg.batch_size >= 1 && cfg.epochs >= 0, "finetune: invalid batch size or epochs");
  Adam<T> opt(cfg.adam);
  FinetuneResult res;
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto order = detail::shuffled(int(train.size()), detail::mix_seed(cfg.seed, std::uint64_t(e)));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const T scale = T(1) / T(end - start);
      model.zero_grad();
      for (std::size_t i = start; i < end; ++i) total += double(model.loss_and_backward(train[std::size_t(order[i])], scale));
      opt.begin_step();
      model.visit([&](const std::string& name, Param<T>& p) { opt.update(name, p, cfg.adam.lr); });
      ++res.steps;
    }
    res.epoch_loss.push_back(total / double(train.size()));
  }
  res.metric = test.empty() ? 0.0 : evaluate(model, test);
  return res;
}

// ---------------------------------------------------------------------------
// Adapter files: the trainable tensors of a task model plus its policy.

template <typename T>
Checkpoint save_adapters(TaskModel<T>& model) {
  Checkpoint ck;
  KeyValueConfig kv = model.config.to_kv();
  kv.set("format", "adapter");
  kv.set("task.id", model.spec.id);
  kv.set("task.modality", modality_tag(model.spec.modality));
  kv.set("task.kind", model.spec.kind == TaskKind::Classification ? "classification" : "regression");
  kv.set("task.outputs", std::to_string(model.spec.outputs));
  kv.set("policy.regime", regime_name(model.policy.regime));
  kv.set("policy.k", std::to_string(model.policy.k));
  kv.set("policy.lora_rank", std::to_string(model.policy.lora_rank));
  kv.set("policy.lora_alpha", std::to_string(model.policy.lora_alpha));
  ck.config_text = kv.to_text();
  model.visit([&](const std::string& name, Param<T>& p) {
    if (p.trainable) ck.tensors["adapter." + name] = to_record(p.value);
  });
  return ck;
}

inline TaskSpec adapter_task_spec(const Checkpoint& ck) {
  const auto kv = KeyValueConfig::parse(ck.config_text);
  if (kv.get_string("format", "") != "adapter") throw CheckpointError("not an adapter file");
  TaskSpec s;
  s.id = kv.get_string("task.id", "task");
  s.modality = kv.get_string("task.modality", "iq") == "image" ? Modality::Image : Modality::IQ;
  s.kind = kv.get_string("task.kind", "classification") == "regression" ? TaskKind::Regression : TaskKind::Classification;
  s.outputs = int(kv.get_int("task.outputs", 2));
  return s;
}

inline FreezePolicy adapter_policy(const Checkpoint& ck) {
  const auto kv = KeyValueConfig::parse(ck.config_text);
  FreezePolicy p;
  p.regime = parse_regime(kv.get_string("policy.regime", "lp"));
  p.k = int(kv.get_int("policy.k", 0));
  p.lora_rank = int(kv.get_int("policy.lora_rank", 32));
  p.lora_alpha = kv.get_double("policy.lora_alpha", 32.0);
  return p;
}

/// Applies the stored policy to a task model built from the shared backbone
/// and overwrites its trainable tensors with the stored ones.
template <typename T>
void load_adapters(const Checkpoint& ck, TaskModel<T>& model) {
  check_model_config(ck, model.config);
  const TaskSpec spec = adapter_task_spec(ck);
  if (spec.modality != model.spec.modality || spec.kind != model.spec.kind || spec.outputs != model.spec.outputs)
    throw ShapeError("adapter task '" + spec.id + "' does not match the task model");
  model.spec.id = spec.id;
  model.apply_freeze(adapter_policy(ck));
  std::map<std::string, Param<T>*> targets;
  model.visit([&](const std::string& name, Param<T>& p) {
    if (p.trainable) targets["adapter." + name] = &p;
  });
  for (const auto& [name, rec] : ck.tensors) {
    auto it = targets.find(name);
    if (it == targets.end()) throw CheckpointError("unknown tensor '" + name + "' in adapter file");
    it->second->value = from_record<T>(rec, name, it->second->value.rows(), it->second->value.cols());
  }
  if (targets.size() != ck.tensors.size()) throw CheckpointError("adapter file is missing trainable tensors");
}

}  // namespace mmwfm
