#pragma once

// Image-like inputs become sequences of flattened P x P patches; IQ streams
// become sequences of length-S segments, antenna-major.

#include "mmwfm/core.hpp"
#include "mmwfm/samples.hpp"

#include <vector>

namespace mmwfm {

/// N x (P*P*C) flattened patches in row-major grid order. Inside a patch the
/// layout is channel-major, then row-major.
template <typename T>
struct PatchSequence {
  Mat<T> patches;
  int grid_h = 0;
  int grid_w = 0;
  int patch = 0;

  int count() const { return int(patches.rows()); }
  int dim() const { return int(patches.cols()); }
};

/// K x S segments. antenna_of[k] is the zero-based source antenna of segment k,
/// nondecreasing: all T/S segments of antenna 0 come first.
template <typename T>
struct SegmentSequence {
  Mat<T> segments;
  std::vector<int> antenna_of;
  int segment = 0;

  int count() const { return int(segments.rows()); }
};

inline int patch_count(int height, int width, int patch) { return (height / patch) * (width / patch); }
inline int segment_count(int antennas, int length, int segment) { return antennas * (length / segment); }

template <typename T>
PatchSequence<T> patchify(const ImageSample<T>& x, int patch) {
  require_shape(patch >= 1, "patchify: patch size must be positive");
  require_shape(x.height % patch == 0 && x.width % patch == 0,
                "patchify: patch " + std::to_string(patch) + " does not divide " + shape_str(x.height, x.width));
  const int gh = x.height / patch, gw = x.width / patch;
  PatchSequence<T> out{Mat<T>(gh * gw, patch * patch * x.channels), gh, gw, patch};
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const int n = gy * gw + gx;
      int j = 0;
      for (int c = 0; c < x.channels; ++c)
        for (int py = 0; py < patch; ++py)
          for (int px = 0; px < patch; ++px) out.patches(n, j++) = x.at(c, gy * patch + py, gx * patch + px);
    }
  return out;
}

template <typename T>
ImageSample<T> unpatchify(const PatchSequence<T>& p, int channels, int height, int width) {
  const int P = p.patch;
  require_shape(P >= 1 && height % P == 0 && width % P == 0, "unpatchify: patch does not divide image");
  require_shape(p.grid_h == height / P && p.grid_w == width / P, "unpatchify: grid does not match image");
  require_shape(p.count() == p.grid_h * p.grid_w && p.dim() == P * P * channels,
                "unpatchify: patches " + shape_str(p.patches.rows(), p.patches.cols()) + " inconsistent with " +
                    std::to_string(channels) + "x" + shape_str(height, width));
  ImageSample<T> out(channels, height, width);
  for (int gy = 0; gy < p.grid_h; ++gy)
    for (int gx = 0; gx < p.grid_w; ++gx) {
      const int n = gy * p.grid_w + gx;
      int j = 0;
      for (int c = 0; c < channels; ++c)
        for (int py = 0; py < P; ++py)
          for (int px = 0; px < P; ++px) out.at(c, gy * P + py, gx * P + px) = p.patches(n, j++);
    }
  return out;
}

template <typename T>
SegmentSequence<T> segment(const IQSample<T>& x, int seg) {
  require_shape(seg >= 1 && x.length() % seg == 0,
                "segment: segment size " + std::to_string(seg) + " does not divide length " + std::to_string(x.length()));
  const int per = x.length() / seg;
  SegmentSequence<T> out{Mat<T>(x.antennas() * per, seg), std::vector<int>(std::size_t(x.antennas()) * per), seg};
  for (int m = 0; m < x.antennas(); ++m)
    for (int i = 0; i < per; ++i) {
      const int k = m * per + i;
      out.segments.row(k) = x.data.row(m).segment(i * seg, seg);
      out.antenna_of[k] = m;
    }
  return out;
}

template <typename T>
IQSample<T> desegment(const SegmentSequence<T>& s, int antennas, int length) {
  const int seg = s.segment;
  require_shape(seg >= 1 && length % seg == 0, "desegment: segment does not divide length");
  require_shape(s.count() == antennas * (length / seg) && s.segments.cols() == seg,
                "desegment: " + std::to_string(s.count()) + " segments inconsistent with " + shape_str(antennas, length));
  const int per = length / seg;
  IQSample<T> out{Mat<T>(antennas, length)};
  for (int k = 0; k < s.count(); ++k) out.data.row(k / per).segment((k % per) * seg, seg) = s.segments.row(k);
  return out;
}

}  // namespace mmwfm
