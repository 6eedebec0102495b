#pragma once

// Synthetic scene generators for both input families and the preprocessing
// pipelines that turn raw captures into model inputs.

#include "mmwfm/core.hpp"
#include "mmwfm/samples.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mmwfm {

// ---------------------------------------------------------------------------
// IQ scenes

enum class Modulation { BPSK, QPSK, QAM16 };

enum class PulseShape { Rectangular, HalfSine };

inline std::string modulation_name(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return "bpsk";
    case Modulation::QPSK: return "qpsk";
    case Modulation::QAM16: return "16qam";
  }
  return "?";
}

inline Modulation parse_modulation(const std::string& s) {
  if (s == "bpsk") return Modulation::BPSK;
  if (s == "qpsk") return Modulation::QPSK;
  if (s == "16qam" || s == "qam16") return Modulation::QAM16;
  throw ConfigError("unknown modulation '" + s + "'");
}

/// Per-antenna propagation: complex gain and integer sample delay.
struct AntennaPath {
  std::complex<double> gain{1.0, 0.0};
  int delay = 0;
};

struct IQSceneConfig {
  std::vector<Modulation> modulations{Modulation::QPSK};
  int antennas = 4;               // M
  int length = 1024;              // T, real scalars per antenna (I/Q interleaved)
  int segment_size = 16;          // S; generated streams must hold at least two segments
  int samples_per_symbol = 4;
  PulseShape pulse = PulseShape::HalfSine;
  double snr_db = 10.0;           // +inf disables noise
  std::uint64_t channel_seed = 0; // selects the per-antenna gain/delay signature
  int max_delay = 8;
  double cfo = 0.0;               // carrier offset, cycles per complex sample
  std::vector<AntennaPath> paths; // explicit channel; overrides channel_seed when non-empty

  bool interference = false;      // add a narrowband interferer
  double interference_sir_db = 0.0;
};

/// Mean squared amplitude of one pulse period.
inline double pulse_mean_power(PulseShape shape, int sps) {
  if (shape == PulseShape::Rectangular) return 1.0;
  double acc = 0.0;
  for (int j = 0; j < sps; ++j) {
    const double p = std::sin(std::numbers::pi * (j + 0.5) / sps);
    acc += p * p;
  }
  return acc / sps;
}

inline double pulse_value(PulseShape shape, int j, int sps) {
  if (shape == PulseShape::Rectangular) return 1.0;
  return std::sin(std::numbers::pi * (j + 0.5) / sps);
}

/// Unit average-energy constellation.
inline std::vector<std::complex<double>> constellation(Modulation m) {
  std::vector<std::complex<double>> pts;
  switch (m) {
    case Modulation::BPSK:
      pts = {{1.0, 0.0}, {-1.0, 0.0}};
      break;
    case Modulation::QPSK: {
      const double a = 1.0 / std::sqrt(2.0);
      pts = {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
      break;
    }
    case Modulation::QAM16: {
      const double a = 1.0 / std::sqrt(10.0);
      for (int i : {-3, -1, 1, 3})
        for (int q : {-3, -1, 1, 3}) pts.emplace_back(i * a, q * a);
      break;
    }
  }
  return pts;
}

/// Per-antenna gain/delay signature derived from a channel seed. Gain
/// magnitudes are normalized so their mean square across antennas is one.
inline std::vector<AntennaPath> channel_from_seed(std::uint64_t channel_seed, int antennas, int max_delay) {
  std::mt19937_64 rng(channel_seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<int> delay(0, std::max(0, max_delay));
  std::vector<AntennaPath> paths(antennas);
  double energy = 0.0;
  for (auto& p : paths) {
    const double a = amp(rng);
    p.gain = std::polar(a, phase(rng));
    p.delay = delay(rng);
    energy += a * a;
  }
  const double scale = 1.0 / std::sqrt(energy / antennas);
  for (auto& p : paths) p.gain *= scale;
  return paths;
}

inline IQSample<double> gen_iq_scene(const IQSceneConfig& cfg, std::uint64_t seed) {
  require_config(cfg.antennas >= 1, "iq scene: antennas must be >= 1");
  require_config(cfg.length > 0 && cfg.length % 2 == 0, "iq scene: length must be even and positive");
  require_config(cfg.segment_size >= 1 && cfg.length >= 2 * cfg.segment_size,
                 "iq scene: length must hold at least two segments");
  require_config(cfg.samples_per_symbol >= 1, "iq scene: samples_per_symbol must be >= 1");
  require_config(!cfg.modulations.empty(), "iq scene: empty modulation set");
  require_config(cfg.max_delay >= 0, "iq scene: negative max_delay");

  std::vector<AntennaPath> paths = cfg.paths;
  if (paths.empty()) {
    paths = channel_from_seed(cfg.channel_seed, cfg.antennas, cfg.max_delay);
  } else {
    require_config(int(paths.size()) == cfg.antennas, "iq scene: explicit channel size != antennas");
  }
  int max_delay = 0;
  for (const auto& p : paths) {
    require_config(p.delay >= 0, "iq scene: negative delay");
    max_delay = std::max(max_delay, p.delay);
  }

  std::mt19937_64 rng(seed);
  const Modulation mod = cfg.modulations[std::uniform_int_distribution<std::size_t>(0, cfg.modulations.size() - 1)(rng)];
  const auto points = constellation(mod);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);

  const int n_complex = cfg.length / 2;
  const int span = n_complex + max_delay;
  const int sps = cfg.samples_per_symbol;
  std::vector<std::complex<double>> tx(span);
  std::complex<double> sym;
  for (int t = 0; t < span; ++t) {
    if (t % sps == 0) sym = points[pick(rng)];
    tx[t] = sym * pulse_value(cfg.pulse, t % sps, sps);
  }

  const double signal_power = pulse_mean_power(cfg.pulse, sps);
  const bool noisy = std::isfinite(cfg.snr_db);
  const double noise_power = noisy ? signal_power / std::pow(10.0, cfg.snr_db / 10.0) : 0.0;
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));

  double intf_freq = 0.0, intf_amp = 0.0;
  if (cfg.interference) {
    intf_freq = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
    intf_amp = std::sqrt(signal_power / std::pow(10.0, cfg.interference_sir_db / 10.0));
  }
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);

  IQSample<double> out{Mat<double>::Zero(cfg.antennas, cfg.length)};
  for (int m = 0; m < cfg.antennas; ++m) {
    const auto& path = paths[m];
    const double intf_phase = cfg.interference ? phase(rng) : 0.0;
    for (int t = 0; t < n_complex; ++t) {
      std::complex<double> y = path.gain * tx[t + max_delay - path.delay];
      if (cfg.cfo != 0.0) y *= std::polar(1.0, 2.0 * std::numbers::pi * cfg.cfo * t);
      if (cfg.interference) y += std::polar(intf_amp, 2.0 * std::numbers::pi * intf_freq * t + intf_phase);
      if (noisy) y += std::complex<double>(gauss(rng), gauss(rng));
      out.data(m, 2 * t) = y.real();
      out.data(m, 2 * t + 1) = y.imag();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectrogram scenes

struct Tone {
  int bin = 0;
  double power = 1.0;
};

/// Linear chirp across all frames, from start_bin at frame 0 to end_bin at the last frame.
struct Chirp {
  int start_bin = 0;
  int end_bin = 0;
  double power = 1.0;
};

/// OFDM-like burst: flat power over a time-frequency rectangle (inclusive bounds).
struct Burst {
  int bin_lo = 0, bin_hi = 0;
  int frame_lo = 0, frame_hi = 0;
  double power = 1.0;
};

using SpectralPrimitive = std::variant<Tone, Chirp, Burst>;

struct SpectrogramSceneConfig {
  int bins = 128;    // F
  int frames = 128;  // L
  double floor = 1e-3;
  bool noise = true; // exponential fluctuation of the floor and primitives
  std::vector<SpectralPrimitive> primitives;
  double center_freq_hz = 2.4e9;
  double sample_rate_hz = 20e6;
};

/// Frequency bin occupied by a chirp at a given frame.
inline int chirp_bin(const Chirp& c, int frame, int frames) {
  const double t = frames > 1 ? double(frame) / (frames - 1) : 0.0;
  return int(std::lround(c.start_bin + (c.end_bin - c.start_bin) * t));
}

inline RawSpectrogram gen_spectrogram_scene(const SpectrogramSceneConfig& cfg, std::uint64_t seed) {
  require_config(cfg.bins >= 16 && cfg.frames >= 16, "spectrogram scene: bins and frames must be >= 16");
  require_config(!cfg.primitives.empty(), "spectrogram scene: empty primitive list");
  require_config(cfg.floor > 0.0, "spectrogram scene: floor must be positive");

  const int F = cfg.bins, L = cfg.frames;
  auto in_bins = [F](int b) { return b >= 0 && b < F; };

  Mat<double> signal = Mat<double>::Zero(F, L);
  for (const auto& prim : cfg.primitives) {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Tone>) {
            require_config(in_bins(p.bin), "tone bin out of range");
            signal.row(p.bin).array() += p.power;
          } else if constexpr (std::is_same_v<P, Chirp>) {
            require_config(in_bins(p.start_bin) && in_bins(p.end_bin), "chirp bins out of range");
            for (int l = 0; l < L; ++l) signal(chirp_bin(p, l, L), l) += p.power;
          } else {
            require_config(in_bins(p.bin_lo) && in_bins(p.bin_hi) && p.bin_lo <= p.bin_hi, "burst bins out of range");
            require_config(p.frame_lo >= 0 && p.frame_hi < L && p.frame_lo <= p.frame_hi, "burst frames out of range");
            signal.block(p.bin_lo, p.frame_lo, p.bin_hi - p.bin_lo + 1, p.frame_hi - p.frame_lo + 1).array() += p.power;
          }
        },
        prim);
  }

  RawSpectrogram out{Mat<double>(F, L), cfg.center_freq_hz, cfg.sample_rate_hz};
  if (!cfg.noise) {
    out.power = signal.array() + cfg.floor;
    return out;
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> fade(1.0);
  for (int f = 0; f < F; ++f)
    for (int l = 0; l < L; ++l) out.power(f, l) = cfg.floor * fade(rng) + signal(f, l) * fade(rng) + 1e-30;
  return out;
}

/// Signal families used to populate synthetic spectrogram corpora.
enum class SpectrogramClass { Tones = 0, Chirp = 1, Burst = 2, Mixed = 3 };

inline constexpr int kSpectrogramClasses = 4;

/// Draws a random scene of the given family. Powers are 10-40 dB above the floor.
inline SpectrogramSceneConfig random_spectrogram_scene(SpectrogramClass cls, int bins, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 17);
  SpectrogramSceneConfig cfg;
  cfg.bins = bins;
  cfg.frames = frames;
  cfg.floor = 1e-3;
  std::uniform_int_distribution<int> bin(0, bins - 1);
  std::uniform_int_distribution<int> frame(0, frames - 1);
  std::uniform_real_distribution<double> gain_db(10.0, 40.0);
  auto power = [&] { return cfg.floor * std::pow(10.0, gain_db(rng) / 10.0); };

  auto add_tones = [&] {
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < n; ++i) cfg.primitives.push_back(Tone{bin(rng), power()});
  };
  auto add_chirp = [&] { cfg.primitives.push_back(Chirp{bin(rng), bin(rng), power()}); };
  auto add_burst = [&] {
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < n; ++i) {
      int b0 = bin(rng), b1 = bin(rng), f0 = frame(rng), f1 = frame(rng);
      if (b0 > b1) std::swap(b0, b1);
      if (f0 > f1) std::swap(f0, f1);
      b1 = std::max(b1, std::min(bins - 1, b0 + bins / 8));
      f1 = std::max(f1, std::min(frames - 1, f0 + frames / 8));
      cfg.primitives.push_back(Burst{b0, b1, f0, f1, power()});
    }
  };
  switch (cls) {
    case SpectrogramClass::Tones: add_tones(); break;
    case SpectrogramClass::Chirp: add_chirp(); break;
    case SpectrogramClass::Burst: add_burst(); break;
    case SpectrogramClass::Mixed:
      add_tones();
      add_chirp();
      add_burst();
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Preprocessing

inline constexpr double kLogEpsilon = 1e-12;

/// Bilinear resize with half-pixel centers; identity when sizes match.
inline Mat<double> resize_bilinear(const Mat<double>& src, int out_h, int out_w) {
  require_config(out_h >= 1 && out_w >= 1, "resize: empty target");
  const int in_h = int(src.rows()), in_w = int(src.cols());
  if (in_h == out_h && in_w == out_w) return src;

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    const double scale = double(in) / out;
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, double(in - 1));
      const int i0 = int(std::floor(s));
      const int i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h), tx = taps(in_w, out_w);
  Mat<double> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& a = ty[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& b = tx[x];
      const double top = src(a.i0, b.i0) * (1 - b.frac) + src(a.i0, b.i1) * b.frac;
      const double bot = src(a.i1, b.i0) * (1 - b.frac) + src(a.i1, b.i1) * b.frac;
      out(y, x) = top * (1 - a.frac) + bot * a.frac;
    }
  }
  return out;
}

/// Steps 1-3 of the spectrogram pipeline: log power, min-max normalization
/// to [0,1] against corpus-wide log extremes, bilinear resize.
inline Mat<double> spectrogram_to_unit_grid(const RawSpectrogram& raw, double log_min, double log_max, int height,
                                            int width) {
  if (!(log_max > log_min)) throw DegenerateStatsError("spectrogram stats: max must exceed min");
  Mat<double> x = (raw.power.array() + kLogEpsilon).log().matrix();
  x = ((x.array() - log_min) / (log_max - log_min)).cwiseMax(0.0).cwiseMin(1.0).matrix();
  return resize_bilinear(x, height, width);
}

/// Full four-step pipeline; output is a 1 x height x width sample.
template <typename T = float>
ImageSample<T> preprocess_spectrogram(const RawSpectrogram& raw, const DatasetStats& stats, int height, int width) {
  require_shape(raw.bins() >= 1 && raw.frames() >= 1, "spectrogram: empty input");
  if (!(stats.std > 0.0)) throw DegenerateStatsError("spectrogram stats: std must be positive");
  const Mat<double> unit = spectrogram_to_unit_grid(raw, stats.min, stats.max, height, width);
  ImageSample<T> out(1, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(0, y, x) = static_cast<T>((unit(y, x) - stats.mean) / stats.std);
  return out;
}

template <typename T = float>
IQSample<T> preprocess_iq(const IQSample<double>& raw, const DatasetStats& stats) {
  if (!(stats.std > 0.0)) throw DegenerateStatsError("iq stats: std must be positive");
  return IQSample<T>{((raw.data.array() - stats.mean) / stats.std).matrix().template cast<T>()};
}

namespace detail {

struct Moments {
  double sum = 0.0, sum_sq_dev = 0.0, min = std::numeric_limits<double>::infinity(),
         max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

}  // namespace detail

/// Scalar statistics over every element of an IQ corpus (population std).
inline DatasetStats compute_stats(std::span<const IQSample<double>> corpus) {
  if (corpus.empty()) throw ConfigError("compute_stats: empty corpus");
  detail::Moments m;
  for (const auto& s : corpus) {
    m.sum += s.data.sum();
    m.count += std::size_t(s.data.size());
    m.min = std::min(m.min, s.data.minCoeff());
    m.max = std::max(m.max, s.data.maxCoeff());
  }
  const double mean = m.sum / double(m.count);
  for (const auto& s : corpus) m.sum_sq_dev += (s.data.array() - mean).square().sum();
  return {mean, std::sqrt(m.sum_sq_dev / double(m.count)), m.min, m.max};
}

/// Spectrogram statistics taken at the stage where each is consumed: min/max
/// over log power, mean/std over the normalized and resized grids.
inline DatasetStats compute_spectrogram_stats(std::span<const RawSpectrogram> corpus, int height, int width) {
  if (corpus.empty()) throw ConfigError("compute_spectrogram_stats: empty corpus");
  DatasetStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -std::numeric_limits<double>::infinity();
  for (const auto& r : corpus) {
    const auto lg = (r.power.array() + kLogEpsilon).log();
    st.min = std::min(st.min, lg.minCoeff());
    st.max = std::max(st.max, lg.maxCoeff());
  }
  if (!(st.max > st.min)) {
    st.mean = 0.0;
    st.std = 0.0;
    return st;
  }
  std::vector<Mat<double>> grids;
  grids.reserve(corpus.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : corpus) {
    grids.push_back(spectrogram_to_unit_grid(r, st.min, st.max, height, width));
    sum += grids.back().sum();
    count += std::size_t(grids.back().size());
  }
  st.mean = sum / double(count);
  double ss = 0.0;
  for (const auto& g : grids) ss += (g.array() - st.mean).square().sum();
  st.std = std::sqrt(ss / double(count));
  return st;
}

}  // namespace mmwfm
