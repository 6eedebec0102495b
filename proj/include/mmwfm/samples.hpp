#pragma once

#include "mmwfm/core.hpp"

#include <cmath>
#include <vector>

namespace mmwfm {

enum class Modality { Image, IQ };

inline const char* modality_tag(Modality m) { return m == Modality::Image ? "image" : "iq"; }

/// Image-like wireless tensor (spectrogram, CSI grid), C x H x W, channel-major.
template <typename T>
struct ImageSample {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  ImageSample() = default;
  ImageSample(int c, int h, int w) : channels(c), height(h), width(w), data(std::size_t(c) * h * w, T(0)) {}

  T& at(int c, int y, int x) { return data[(std::size_t(c) * height + y) * width + x]; }
  const T& at(int c, int y, int x) const { return data[(std::size_t(c) * height + y) * width + x]; }

  template <typename U>
  ImageSample<U> cast() const {
    ImageSample<U> out(channels, height, width);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

/// Raw multi-antenna IQ stream, M x T. Along the time axis even columns hold
/// the in-phase component and odd columns the quadrature component.
template <typename T>
struct IQSample {
  Mat<T> data;

  int antennas() const { return int(data.rows()); }
  int length() const { return int(data.cols()); }

  template <typename U>
  IQSample<U> cast() const { return IQSample<U>{data.template cast<U>()}; }
};

/// Power spectrogram, F frequency bins x L time frames.
struct RawSpectrogram {
  Mat<double> power;
  double center_freq_hz = 0.0;
  double sample_rate_hz = 0.0;

  int bins() const { return int(power.rows()); }
  int frames() const { return int(power.cols()); }
};

/// Dataset-wide scalars for one modality.
struct DatasetStats {
  double mean = 0.0;
  double std = 1.0;
  double min = 0.0;
  double max = 1.0;

  bool degenerate() const { return !(std > 0.0) || !(max > min); }
};

}  // namespace mmwfm
