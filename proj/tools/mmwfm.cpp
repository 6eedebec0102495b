// mmwfm: data generation, pretraining, fine-tuning, evaluation, reconstruction
// figures and parameter inspection.
//
// Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 validation (shapes, checkpoints, stats).

#include "mmwfm.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mmwfm;
namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kValidation = 4;

using Real = float;

// Desk-scale preset: the geometry and budget of the acceptance runs.
constexpr const char* kTinyPreset = R"(model.image_height=16
model.image_width=16
model.antennas=2
model.iq_length=64
model.enc_blocks=2
model.enc_dim=64
model.enc_hidden=128
model.enc_heads=4
model.dec_blocks=1
model.dec_dim=32
model.dec_hidden=64
model.dec_heads=4
model.patch=4
model.segment=8
data.count=512
data.bins=32
data.frames=32
pretrain.batch_size=16
pretrain.epochs=60
pretrain.warmup_epochs=2
finetune.epochs=20
finetune.lr=0.001
)";

struct Common {
  std::string config;
  std::string preset;
  std::optional<long long> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file (supports 'include <path>')");
  cmd->add_option("--preset", c.preset, "built-in defaults: 'tiny' for desk-scale runs")->check(CLI::IsMember({"tiny"}));
  cmd->add_option("--seed", c.seed, "seed for data, masks, shuffling and initialization");
  cmd->add_option("--out", c.out, "output directory (default $MMWFM_OUT/<command>, else runs/<command>)");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set model.enc_blocks=4");
}

/// preset < config file < --set < explicit flags
KeyValueConfig resolve(const Common& c) {
  KeyValueConfig kv;
  if (c.preset == "tiny") kv = KeyValueConfig::parse(kTinyPreset);
  if (!c.config.empty()) kv.merge_file(c.config);
  for (const auto& s : c.sets) kv.set_assignment(s);
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  return kv;
}

fs::path output_dir(const Common& c, const std::string& verb) {
  fs::path out;
  if (!c.out.empty()) out = c.out;
  else if (const char* root = std::getenv("MMWFM_OUT"); root && *root) out = fs::path(root) / verb;
  else out = fs::path("runs") / verb;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  return out;
}

std::uint64_t seed_for(const KeyValueConfig& kv, const std::string& key) {
  return std::uint64_t(kv.get_int(key, kv.get_int("seed", 0)));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

void snapshot(const fs::path& dir, const KeyValueConfig& kv) { write_text(dir / "resolved.cfg", kv.to_text()); }

void put_stats(KeyValueConfig& kv, const std::string& prefix, const DatasetStats& s) {
  std::ostringstream os;
  os << std::setprecision(17) << s.mean << ' ' << s.std << ' ' << s.min << ' ' << s.max;
  kv.set(prefix, os.str());
}

DatasetStats get_stats(const KeyValueConfig& kv, const std::string& prefix) {
  if (!kv.has(prefix)) throw CheckpointError("checkpoint has no '" + prefix + "' entry; was it written by 'pretrain'?");
  std::istringstream is(kv.get_string(prefix, ""));
  DatasetStats s;
  if (!(is >> s.mean >> s.std >> s.min >> s.max)) throw CheckpointError("malformed '" + prefix + "' entry");
  return s;
}

FinetuneConfig finetune_config(const KeyValueConfig& kv) {
  FinetuneConfig fc;
  fc.epochs = int(kv.get_int("finetune.epochs", fc.epochs));
  fc.batch_size = int(kv.get_int("finetune.batch_size", fc.batch_size));
  fc.adam.lr = kv.get_double("finetune.lr", fc.adam.lr);
  fc.seed = seed_for(kv, "finetune.seed");
  return fc;
}

FreezePolicy freeze_policy(const KeyValueConfig& kv) {
  FreezePolicy p;
  p.regime = parse_regime(kv.get_string("finetune.regime", "lp"));
  p.k = int(kv.get_int("finetune.k", p.regime == Regime::PartialFineTune ? 2 : 0));
  p.lora_rank = int(kv.get_int("finetune.rank", p.lora_rank));
  p.lora_alpha = kv.get_double("finetune.alpha", p.lora_alpha);
  return p;
}

// ---------------------------------------------------------------------------
// Task datasets

struct TaskInfo {
  std::string name;
  Modality modality = Modality::IQ;
  int classes = 2;
};

TaskInfo task_info(const std::string& name, const KeyValueConfig& kv) {
  if (name == "fingerprint") return {name, Modality::IQ, int(kv.get_int("task.devices", 4))};
  if (name == "interference") return {name, Modality::IQ, 2};
  if (name == "signal_type") return {name, Modality::Image, kSpectrogramClasses};
  throw ConfigError("unknown task '" + name + "' (expected fingerprint, interference or signal_type)");
}

TaskInfo read_task_info(const fs::path& dir) {
  const auto kv = KeyValueConfig::load(dir / "task.cfg");
  TaskInfo t = task_info(kv.get_string("task.name", ""), kv);
  t.classes = int(kv.get_int("task.classes", t.classes));
  return t;
}

void write_labeled(const fs::path& dir, const TaskInfo& t, int count, std::uint64_t seed, const ModelConfig& mc,
                   const KeyValueConfig& kv) {
  DatasetWriter w(dir);
  if (t.name == "signal_type") {
    const auto set = make_signal_type_set(count, int(kv.get_int("data.bins", 128)), int(kv.get_int("data.frames", 128)), seed);
    for (std::size_t i = 0; i < set.samples.size(); ++i) w.add(set.samples[i], set.labels[i]);
  } else {
    const auto set = t.name == "fingerprint"
                         ? make_fingerprint_set(count, t.classes, mc.antennas, mc.iq_length, mc.backbone.segment, seed)
                         : make_interference_set(count, mc.antennas, mc.iq_length, mc.backbone.segment, seed);
    for (std::size_t i = 0; i < set.samples.size(); ++i) w.add(set.samples[i], set.labels[i]);
  }
  w.finish();
}

std::vector<TaskExample<Real>> task_examples(const fs::path& dir, const TaskInfo& t, const ModelConfig& mc,
                                             const KeyValueConfig& ck_kv) {
  const auto d = load_dataset(dir);
  std::vector<TaskExample<Real>> out;
  if (t.modality == Modality::IQ) {
    const DatasetStats stats = get_stats(ck_kv, "stats.iq");
    for (std::size_t i = 0; i < d.iq.size(); ++i) {
      require_shape(d.iq[i].antennas() == mc.antennas && d.iq[i].data.cols() == mc.iq_length,
                    dir.string() + ": IQ sample shape does not match the model geometry");
      require_config(d.iq_labels[i] >= 0, dir.string() + ": unlabeled sample in a task split");
      const auto s = segment(preprocess_iq<Real>(d.iq[i], stats), mc.backbone.segment);
      out.push_back({s.segments, s.antenna_of, d.iq_labels[i], {}});
    }
  } else {
    const DatasetStats stats = get_stats(ck_kv, "stats.image");
    for (std::size_t i = 0; i < d.spectrograms.size(); ++i) {
      require_config(d.spectrogram_labels[i] >= 0, dir.string() + ": unlabeled sample in a task split");
      const auto p = patchify(preprocess_spectrogram<Real>(d.spectrograms[i], stats, mc.image_height, mc.image_width),
                              mc.backbone.patch);
      out.push_back({p.patches, {}, d.spectrogram_labels[i], {}});
    }
  }
  if (out.empty()) throw ConfigError(dir.string() + ": no " + modality_tag(t.modality) + " samples");
  return out;
}

MaskedAutoencoder<Real> load_pretrained(const Checkpoint& ck) {
  MaskedAutoencoder<Real> mae(checkpoint_model_config(ck), 0);
  load_checkpoint_into(ck, mae);
  return mae;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const Common& c, std::optional<int> count, const std::string& task) {
  KeyValueConfig kv = resolve(c);
  if (count) kv.set("data.count", std::to_string(*count));
  const ModelConfig mc = ModelConfig::from_kv(kv);
  mc.validate();
  const fs::path out = output_dir(c, "gen-data");
  const std::uint64_t seed = seed_for(kv, "data.seed");
  const int bins = int(kv.get_int("data.bins", 128)), frames = int(kv.get_int("data.frames", 128));

  if (!task.empty()) {
    const TaskInfo t = task_info(task, kv);
    const int n_train = int(kv.get_int("task.train", 256)), n_test = int(kv.get_int("task.test", 256));
    write_labeled(out / "train", t, n_train, seed * 2 + 1, mc, kv);
    write_labeled(out / "test", t, n_test, seed * 2 + 2, mc, kv);
    KeyValueConfig meta;
    meta.set("task.name", t.name);
    meta.set("task.modality", modality_tag(t.modality));
    meta.set("task.classes", std::to_string(t.classes));
    if (t.name == "fingerprint") meta.set("task.devices", std::to_string(t.classes));
    write_text(out / "task.cfg", meta.to_text());
    kv.set("task.name", t.name);
    snapshot(out, kv);
    std::printf("task %s: %d train / %d test samples in %s\n", t.name.c_str(), n_train, n_test, out.string().c_str());
    return 0;
  }

  const int n = int(kv.get_int("data.count", 3200));
  require_config(n >= 1, "data.count must be >= 1");
  std::vector<RawSpectrogram> spectrograms;
  std::vector<IQSample<double>> streams;
  DatasetWriter image_writer(out / "image"), iq_writer(out / "iq");
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = seed * 1000003ULL + std::uint64_t(i);
    spectrograms.push_back(gen_spectrogram_scene(
        random_spectrogram_scene(SpectrogramClass(i % kSpectrogramClasses), bins, frames, s), s));
    IQSceneConfig q = default_iq_scene(mc.antennas, mc.iq_length, mc.backbone.segment);
    q.channel_seed = s ^ 0x5A5A5A5AULL;
    streams.push_back(gen_iq_scene(q, s));
    image_writer.add(spectrograms.back());
    iq_writer.add(streams.back());
  }
  image_writer.finish();
  iq_writer.finish();
  write_stats(out / "image_stats.txt", compute_spectrogram_stats(spectrograms, mc.image_height, mc.image_width));
  write_stats(out / "iq_stats.txt", compute_stats(streams));
  kv.set("data.count", std::to_string(n));
  snapshot(out, kv);
  std::printf("%d spectrograms and %d IQ streams in %s\n", n, n, out.string().c_str());
  return 0;
}

int cmd_pretrain(const Common& c, const std::string& data_dir, std::optional<int> epochs, std::optional<int> warmup,
                 std::optional<int> batch, std::optional<double> lr, std::optional<double> mask_ratio,
                 const std::string& resume) {
  KeyValueConfig kv = resolve(c);
  if (epochs) kv.set("pretrain.epochs", std::to_string(*epochs));
  if (warmup) kv.set("pretrain.warmup_epochs", std::to_string(*warmup));
  if (batch) kv.set("pretrain.batch_size", std::to_string(*batch));
  if (lr) kv.set("pretrain.base_lr", std::to_string(*lr));
  if (mask_ratio) {
    kv.set("pretrain.mask_ratio_image", std::to_string(*mask_ratio));
    kv.set("pretrain.mask_ratio_iq", std::to_string(*mask_ratio));
  }
  const ModelConfig mc = ModelConfig::from_kv(kv);
  PretrainConfig pc = PretrainConfig::from_kv(kv);
  pc.seed = seed_for(kv, "pretrain.seed");
  mc.validate();
  pc.validate();

  const fs::path data(data_dir);
  if (!fs::is_directory(data / "image") || !fs::is_directory(data / "iq"))
    throw IoError(data.string() + ": expected image/ and iq/ datasets (run gen-data first)");
  const auto images = load_dataset(data / "image");
  const auto iq = load_dataset(data / "iq");
  const DatasetStats image_stats = read_stats(data / "image_stats.txt");
  const DatasetStats iq_stats = read_stats(data / "iq_stats.txt");

  PretrainData<Real> pd;
  for (const auto& s : images.spectrograms)
    pd.images.push_back(patchify(preprocess_spectrogram<Real>(s, image_stats, mc.image_height, mc.image_width),
                                 mc.backbone.patch));
  for (const auto& q : iq.iq) {
    require_shape(q.antennas() == mc.antennas && q.data.cols() == mc.iq_length,
                  "IQ stream " + shape_str(q.data.rows(), q.data.cols()) + " does not match model antennas=" +
                      std::to_string(mc.antennas) + " iq_length=" + std::to_string(mc.iq_length));
    pd.iq.push_back(segment(preprocess_iq<Real>(q, iq_stats), mc.backbone.segment));
  }

  const fs::path out = output_dir(c, "pretrain");
  KeyValueConfig resolved = kv;
  pc.write(resolved);
  const KeyValueConfig geometry = mc.to_kv();
  for (const auto& [k, v] : geometry.values()) resolved.set(k, v);
  resolved.set("pretrain.data", fs::absolute(data).string());
  snapshot(out, resolved);

  MaskedAutoencoder<Real> model(mc, pc.seed);
  Pretrainer<Real> trainer(model, pd, pc);
  if (!resume.empty()) {
    trainer.resume(read_checkpoint(resume));
    std::printf("resumed at step %lld of %lld\n", trainer.step(), trainer.total_steps());
  }
  std::ofstream curve(out / "loss.txt", resume.empty() ? std::ios::trunc : std::ios::app);
  if (!curve) throw IoError("cannot write " + (out / "loss.txt").string());
  const long long per_epoch = trainer.steps_per_epoch();
  trainer.run(-1, [&](const LossRecord& r) {
    const std::string line = format_loss_record(r);
    curve << line << '\n';
    if (r.step % per_epoch == 0) std::printf("%s\n", line.c_str());
  });

  Checkpoint ck = trainer.checkpoint();
  KeyValueConfig ck_kv = KeyValueConfig::parse(ck.config_text);
  put_stats(ck_kv, "stats.image", image_stats);
  put_stats(ck_kv, "stats.iq", iq_stats);
  ck.config_text = ck_kv.to_text();
  write_checkpoint(out / "checkpoint.mmwfm", ck);
  std::printf("checkpoint written to %s\n", (out / "checkpoint.mmwfm").string().c_str());
  return 0;
}

int cmd_finetune(const Common& c, const std::string& ckpt, const std::string& data_dir, const std::string& regime,
                 std::optional<int> k, std::optional<int> rank, std::optional<double> alpha, std::optional<int> epochs,
                 std::optional<double> lr) {
  KeyValueConfig kv = resolve(c);
  if (!regime.empty()) kv.set("finetune.regime", regime);
  if (k) kv.set("finetune.k", std::to_string(*k));
  if (rank) kv.set("finetune.rank", std::to_string(*rank));
  if (alpha) kv.set("finetune.alpha", std::to_string(*alpha));
  if (epochs) kv.set("finetune.epochs", std::to_string(*epochs));
  if (lr) kv.set("finetune.lr", std::to_string(*lr));
  const FreezePolicy policy = freeze_policy(kv);
  const FinetuneConfig fc = finetune_config(kv);

  const Checkpoint ck = read_checkpoint(ckpt);
  const auto ck_kv = KeyValueConfig::parse(ck.config_text);
  const auto mae = load_pretrained(ck);
  const fs::path data(data_dir);
  const TaskInfo t = read_task_info(data);
  const auto train = task_examples(data / "train", t, mae.config, ck_kv);
  const auto test = task_examples(data / "test", t, mae.config, ck_kv);

  auto model = TaskModel<Real>::from_pretrained(mae, TaskSpec{t.name, t.modality, TaskKind::Classification, t.classes},
                                                 seed_for(kv, "finetune.seed"));
  model.apply_freeze(policy, seed_for(kv, "finetune.seed") + 1);

  const fs::path out = output_dir(c, "finetune");
  KeyValueConfig resolved = kv;
  resolved.set("finetune.regime", regime_name(policy.regime));
  resolved.set("finetune.k", std::to_string(policy.k));
  resolved.set("finetune.epochs", std::to_string(fc.epochs));
  resolved.set("finetune.batch_size", std::to_string(fc.batch_size));
  resolved.set("finetune.checkpoint", fs::absolute(ckpt).string());
  resolved.set("finetune.data", fs::absolute(data).string());
  snapshot(out, resolved);

  std::printf("task %s, regime %s, %lld trainable parameters\n", t.name.c_str(), regime_name(policy.regime).c_str(),
              model.trainable_param_count());
  const auto res = finetune<Real>(model, train, test, fc);
  std::ofstream metrics(out / "metrics.txt", std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + (out / "metrics.txt").string());
  const long long per_epoch = res.steps / std::max<long long>(1, (long long)res.epoch_loss.size());
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
    metrics << format_metric_record({t.name, "train_loss", res.epoch_loss[e], per_epoch * (long long)(e + 1)}) << '\n';
  const std::string final = format_metric_record({t.name, metric_name(TaskKind::Classification), res.metric, res.steps});
  metrics << final << '\n';
  write_checkpoint(out / "adapter.mmwfm", save_adapters(model));
  std::printf("%s\n", final.c_str());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& ckpt, const std::string& adapter, const std::string& split) {
  const KeyValueConfig kv = resolve(c);
  const Checkpoint ck = read_checkpoint(ckpt);
  const auto mae = load_pretrained(ck);
  const Checkpoint ad = read_checkpoint(adapter);
  const TaskSpec spec = adapter_task_spec(ad);
  auto model = TaskModel<Real>::from_pretrained(mae, spec, 0);
  load_adapters(ad, model);
  const TaskInfo t{spec.id, spec.modality, spec.outputs};
  const auto data = task_examples(split, t, mae.config, KeyValueConfig::parse(ck.config_text));
  const double metric = evaluate<Real>(model, data);

  const fs::path out = output_dir(c, "evaluate");
  KeyValueConfig resolved = kv;
  resolved.set("evaluate.checkpoint", fs::absolute(ckpt).string());
  resolved.set("evaluate.adapter", fs::absolute(adapter).string());
  resolved.set("evaluate.data", fs::absolute(split).string());
  snapshot(out, resolved);
  const std::string line = format_metric_record({spec.id, metric_name(spec.kind), metric, 0});
  write_text(out / "metrics.txt", line + "\n");
  std::printf("%s\n", line.c_str());
  return 0;
}

int cmd_reconstruct(const Common& c, const std::string& ckpt, const std::string& split, int index,
                    const std::vector<double>& ratios, const std::string& modality) {
  const KeyValueConfig kv = resolve(c);
  const Checkpoint ck = read_checkpoint(ckpt);
  const auto ck_kv = KeyValueConfig::parse(ck.config_text);
  auto mae = load_pretrained(ck);
  const auto& mc = mae.config;
  const auto d = load_dataset(split);
  const std::uint64_t seed = seed_for(kv, "reconstruct.seed");

  Modality m;
  if (modality.empty()) m = d.spectrograms.empty() ? Modality::IQ : Modality::Image;
  else m = parse_modality(modality);
  const std::size_t available = m == Modality::Image ? d.spectrograms.size() : d.iq.size();
  if (available == 0) throw ConfigError(split + ": no " + std::string(modality_tag(m)) + " samples to reconstruct");
  require_config(index >= 0 && std::size_t(index) < available,
                 "sample index " + std::to_string(index) + " out of range [0, " + std::to_string(available) + ")");

  const fs::path out = output_dir(c, "reconstruct");
  KeyValueConfig resolved = kv;
  resolved.set("reconstruct.checkpoint", fs::absolute(ckpt).string());
  resolved.set("reconstruct.data", fs::absolute(split).string());
  resolved.set("reconstruct.index", std::to_string(index));
  snapshot(out, resolved);

  for (std::size_t r = 0; r < ratios.size(); ++r) {
    const double ratio = ratios[r];
    require_config(ratio >= 0.0 && ratio < 1.0, "mask ratios must lie in [0, 1)");
    char name[64];
    if (m == Modality::Image) {
      const auto tokens = mae.tokenize(
          preprocess_spectrogram<Real>(d.spectrograms[std::size_t(index)], get_stats(ck_kv, "stats.image"),
                                       mc.image_height, mc.image_width));
      const auto plan = sample_mask(tokens.count(), ratio, detail::mix_seed(seed, r));
      const auto pass = mae.image_pass(tokens, plan);
      std::snprintf(name, sizeof name, "image_%04d_mask%.2f.pgm", index, ratio);
      write_netpbm(out / name, image_triptych<Real>(tokens, pass.recon, plan, mc.image_channels));
      std::printf("%s loss=%.6g\n", name, double(pass.loss));
    } else {
      const auto& raw = d.iq[std::size_t(index)];
      require_shape(raw.antennas() == mc.antennas && raw.data.cols() == mc.iq_length,
                    "IQ sample shape does not match the checkpoint geometry");
      const auto tokens = mae.tokenize(preprocess_iq<Real>(raw, get_stats(ck_kv, "stats.iq")));
      const auto plan = sample_mask(tokens.count(), ratio, detail::mix_seed(seed, r));
      const auto pass = mae.iq_pass(tokens, plan);
      std::snprintf(name, sizeof name, "iq_%04d_mask%.2f.ppm", index, ratio);
      write_netpbm(out / name, iq_triptych<Real>(tokens, pass.recon, plan, mc.antennas, mc.iq_length));
      std::printf("%s loss=%.6g\n", name, double(pass.loss));
    }
  }
  return 0;
}

int cmd_inspect(const Common& c, const std::string& ckpt, bool json) {
  const KeyValueConfig kv = resolve(c);
  ModelConfig mc = ModelConfig::from_kv(kv);
  std::string format = "config";
  long long step = -1;
  MaskedAutoencoder<Real> model = [&] {
    if (ckpt.empty()) return MaskedAutoencoder<Real>(mc, 0);
    const Checkpoint ck = read_checkpoint(ckpt);
    const auto ck_kv = KeyValueConfig::parse(ck.config_text);
    format = ck_kv.get_string("format", "?");
    if (format != "pretrain") throw CheckpointError(ckpt + ": inspect expects a pretraining checkpoint, got '" + format + "'");
    auto m = load_pretrained(ck);
    step = scalar_from_record(ck.tensors.at("state.step"), "state.step");
    return m;
  }();
  mc = model.config;
  const auto& b = mc.backbone;
  const std::vector<std::pair<std::string, long long>> rows = {
      {"embedder", model.count_params(ParamScope::Embedder)},
      {"encoder", model.count_params(ParamScope::Encoder)},
      {"encoder_block", vit_block_param_count(b.enc_dim, b.enc_hidden)},
      {"decoder_input", model.count_params(ParamScope::DecoderInput)},
      {"decoder", model.count_params(ParamScope::Decoder)},
      {"decoder_block", vit_block_param_count(b.dec_dim, b.dec_hidden)},
      {"heads", model.count_params(ParamScope::Heads)},
      {"total", model.count_params(ParamScope::All)},
  };
  if (json) {
    std::printf("{\"source\": \"%s\", \"step\": %lld, \"config\": {", ckpt.empty() ? "config" : "checkpoint", step);
    bool first = true;
    const KeyValueConfig geometry = mc.to_kv();
    for (const auto& [k, v] : geometry.values()) {
      std::printf("%s\"%s\": %s", first ? "" : ", ", k.c_str(), v.c_str());
      first = false;
    }
    std::printf("}, \"parameters\": {");
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::printf("%s\"%s\": %lld", i ? ", " : "", rows[i].first.c_str(), rows[i].second);
    std::printf("}}\n");
  } else {
    std::printf("%s", mc.to_text().c_str());
    if (step >= 0) std::printf("step=%lld\n", step);
    std::printf("\n%-14s %12s %10s\n", "scope", "parameters", "millions");
    for (const auto& [name, n] : rows) std::printf("%-14s %12lld %10.3f\n", name.c_str(), n, n / 1e6);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal masked autoencoder for wireless IQ streams and spectrograms"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "write synthetic pretraining corpora or a labeled task dataset");
  add_common(gen, common);
  std::optional<int> count;
  std::string task;
  gen->add_option("--count", count, "samples per modality (default 3200)");
  gen->add_option("--task", task, "write train/ and test/ splits of a labeled task instead")
      ->check(CLI::IsMember({"fingerprint", "interference", "signal_type"}));

  auto* pre = app.add_subcommand("pretrain", "masked-autoencoder pretraining on both modalities");
  add_common(pre, common);
  std::string data_dir, resume;
  std::optional<int> epochs, warmup, batch;
  std::optional<double> lr, mask_ratio;
  pre->add_option("--data", data_dir, "directory written by gen-data")->required();
  pre->add_option("--epochs", epochs, "training epochs (default 800)");
  pre->add_option("--warmup", warmup, "linear warm-up epochs (default 40)");
  pre->add_option("--batch-size", batch, "per-modality batch size (default 16)");
  pre->add_option("--lr", lr, "peak learning rate (default 1e-3)");
  pre->add_option("--mask-ratio", mask_ratio, "masking ratio for both modalities (default 0.7)");
  pre->add_option("--resume", resume, "continue from a pretraining checkpoint")->check(CLI::ExistingFile);

  auto* ft = app.add_subcommand("finetune", "adapt the pretrained encoder to a labeled task");
  add_common(ft, common);
  std::string ckpt, regime, ft_data;
  std::optional<int> k, rank, ft_epochs;
  std::optional<double> alpha, ft_lr;
  ft->add_option("--checkpoint", ckpt, "pretraining checkpoint")->required()->check(CLI::ExistingFile);
  ft->add_option("--data", ft_data, "task directory written by gen-data --task")->required();
  ft->add_option("--regime", regime, "lp, ft or lora (default lp)");
  ft->add_option("--k", k, "trailing blocks to unfreeze for --regime ft (default 2)");
  ft->add_option("--rank", rank, "LoRA rank (default 32)");
  ft->add_option("--alpha", alpha, "LoRA scaling alpha (default 32)");
  ft->add_option("--epochs", ft_epochs, "fine-tuning epochs (default 10)");
  ft->add_option("--lr", ft_lr, "learning rate (default 1e-4)");

  auto* ev = app.add_subcommand("evaluate", "score a fine-tuned adapter on a labeled split");
  add_common(ev, common);
  std::string ev_ckpt, ev_adapter, ev_data;
  ev->add_option("--checkpoint", ev_ckpt, "pretraining checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--adapter", ev_adapter, "adapter file written by finetune")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "labeled split directory (e.g. <task>/test)")->required();

  auto* rc = app.add_subcommand("reconstruct", "write original | masked | reconstruction figures");
  add_common(rc, common);
  std::string rc_ckpt, rc_data, rc_modality;
  int rc_index = 0;
  std::vector<double> ratios{0.5, 0.7, 0.85};
  rc->add_option("--checkpoint", rc_ckpt, "pretraining checkpoint")->required()->check(CLI::ExistingFile);
  rc->add_option("--data", rc_data, "dataset directory holding the sample")->required();
  rc->add_option("--index", rc_index, "sample index within the dataset");
  rc->add_option("--ratios", ratios, "mask ratios, one figure each")->delimiter(',');
  rc->add_option("--modality", rc_modality, "image or iq (default: whichever the dataset holds)")
      ->check(CLI::IsMember({"image", "iq"}));

  auto* in = app.add_subcommand("inspect", "parameter counts per scope");
  add_common(in, common);
  std::string in_ckpt;
  bool json = false;
  in->add_option("--checkpoint", in_ckpt, "pretraining checkpoint (default: model from the config)")
      ->check(CLI::ExistingFile);
  in->add_flag("--json", json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, count, task);
    if (*pre) return cmd_pretrain(common, data_dir, epochs, warmup, batch, lr, mask_ratio, resume);
    if (*ft) return cmd_finetune(common, ckpt, ft_data, regime, k, rank, alpha, ft_epochs, ft_lr);
    if (*ev) return cmd_evaluate(common, ev_ckpt, ev_adapter, ev_data);
    if (*rc) return cmd_reconstruct(common, rc_ckpt, rc_data, rc_index, ratios, rc_modality);
    if (*in) return cmd_inspect(common, in_ckpt, json);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const Error& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kValidation;
  }
  return kUsage;
}
