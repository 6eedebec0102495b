#pragma once

// Synthetic downstream tasks standing in for real labeled corpora:
//   fingerprint   IQ, classify which transmitter (per-antenna gain/delay signature)
//   interference  IQ, detect a narrowband interferer
//   signal_type   spectrogram, classify the signal family
//   positioning   image-like grid, regress the 2-D source position

#include "mmwfm/finetuner.hpp"
#include "mmwfm/signalgen.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace mmwfm {

struct LabeledIQ {
  std::vector<IQSample<double>> samples;
  std::vector<int> labels;
};

struct LabeledSpectrograms {
  std::vector<RawSpectrogram> samples;
  std::vector<int> labels;
};

struct LabeledGrids {
  std::vector<ImageSample<double>> samples;
  std::vector<std::array<double, 2>> targets;
};

/// IQ scene family shared by pretraining corpora and the IQ tasks.
inline IQSceneConfig default_iq_scene(int antennas, int length, int segment) {
  IQSceneConfig cfg;
  cfg.modulations = {Modulation::BPSK, Modulation::QPSK, Modulation::QAM16};
  cfg.antennas = antennas;
  cfg.length = length;
  cfg.segment_size = segment;
  cfg.snr_db = 15.0;
  return cfg;
}

/// Channel seed of fingerprinting device d.
inline std::uint64_t device_channel_seed(int device) { return 0xF1A9E000ULL + std::uint64_t(device); }

/// Balanced set: sample i belongs to device i % devices.
inline LabeledIQ make_fingerprint_set(int count, int devices, int antennas, int length, int segment, std::uint64_t seed) {
  require_config(count >= 1 && devices >= 2, "fingerprint set: need samples and >= 2 devices");
  LabeledIQ out;
  IQSceneConfig cfg = default_iq_scene(antennas, length, segment);
  for (int i = 0; i < count; ++i) {
    const int d = i % devices;
    cfg.channel_seed = device_channel_seed(d);
    out.samples.push_back(gen_iq_scene(cfg, seed * 1000003ULL + std::uint64_t(i)));
    out.labels.push_back(d);
  }
  return out;
}

/// Balanced clean/interfered set (label 1 = interferer present).
inline LabeledIQ make_interference_set(int count, int antennas, int length, int segment, std::uint64_t seed) {
  require_config(count >= 1, "interference set: empty");
  LabeledIQ out;
  IQSceneConfig cfg = default_iq_scene(antennas, length, segment);
  cfg.interference_sir_db = 0.0;
  for (int i = 0; i < count; ++i) {
    cfg.interference = (i % 2) == 1;
    cfg.channel_seed = seed * 7919ULL + std::uint64_t(i);
    out.samples.push_back(gen_iq_scene(cfg, seed * 1000003ULL + std::uint64_t(i)));
    out.labels.push_back(i % 2);
  }
  return out;
}

inline LabeledSpectrograms make_signal_type_set(int count, int bins, int frames, std::uint64_t seed) {
  require_config(count >= 1, "signal type set: empty");
  LabeledSpectrograms out;
  for (int i = 0; i < count; ++i) {
    const auto cls = SpectrogramClass(i % kSpectrogramClasses);
    const std::uint64_t s = seed * 1000003ULL + std::uint64_t(i);
    out.samples.push_back(gen_spectrogram_scene(random_spectrogram_scene(cls, bins, frames, s), s));
    out.labels.push_back(int(cls));
  }
  return out;
}

/// Grids holding a Gaussian intensity blob around a random source position in
/// [0,1]^2 over a noisy background; the target is that position.
inline LabeledGrids make_positioning_set(int count, int channels, int height, int width, std::uint64_t seed) {
  require_config(count >= 1 && channels >= 1 && height >= 2 && width >= 2, "positioning set: invalid shape");
  LabeledGrids out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  const double sigma = 0.15;
  for (int i = 0; i < count; ++i) {
    const double px = u(rng), py = u(rng);
    ImageSample<double> g(channels, height, width);
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double dx = double(x) / (width - 1) - px, dy = double(y) / (height - 1) - py;
          g.at(c, y, x) = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (c + 1) + noise(rng);
        }
    out.samples.push_back(std::move(g));
    out.targets.push_back({px, py});
  }
  return out;
}

template <typename T>
std::vector<TaskExample<T>> iq_examples(const LabeledIQ& set, const DatasetStats& stats, int segment_size) {
  std::vector<TaskExample<T>> out;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto s = segment(preprocess_iq<T>(set.samples[i], stats), segment_size);
    out.push_back(TaskExample<T>{s.segments, s.antenna_of, set.labels[i], {}});
  }
  return out;
}

template <typename T>
std::vector<TaskExample<T>> spectrogram_examples(const LabeledSpectrograms& set, const DatasetStats& stats, int height,
                                                 int width, int patch) {
  std::vector<TaskExample<T>> out;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto p = patchify(preprocess_spectrogram<T>(set.samples[i], stats, height, width), patch);
    out.push_back(TaskExample<T>{p.patches, {}, set.labels[i], {}});
  }
  return out;
}

template <typename T>
std::vector<TaskExample<T>> grid_examples(const LabeledGrids& set, int patch) {
  std::vector<TaskExample<T>> out;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto p = patchify(set.samples[i].template cast<T>(), patch);
    RowVec<T> target(2);
    target << T(set.targets[i][0]), T(set.targets[i][1]);
    out.push_back(TaskExample<T>{p.patches, {}, 0, target});
  }
  return out;
}

}  // namespace mmwfm
