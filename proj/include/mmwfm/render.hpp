#pragma once

// Reconstruction triptychs: original | masked | reconstruction with the
// visible tokens pasted back. Images become PGM files; IQ streams become PPM
// files with one amplitude strip per antenna.

#include "mmwfm/masking.hpp"
#include "mmwfm/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mmwfm {

/// 8-bit raster, 1 (gray) or 3 (RGB) channels.
struct Raster {
  int width = 0;
  int height = 0;
  int depth = 1;
  std::vector<unsigned char> pixels;

  Raster() = default;
  Raster(int w, int h, int d, unsigned char fill = 255)
      : width(w), height(h), depth(d), pixels(std::size_t(w) * h * d, fill) {}

  unsigned char* at(int x, int y) { return &pixels[(std::size_t(y) * width + x) * depth]; }
  const unsigned char* at(int x, int y) const { return &pixels[(std::size_t(y) * width + x) * depth]; }
};

inline void write_netpbm(const std::filesystem::path& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << (r.depth == 1 ? "P5" : "P6") << '\n' << r.width << ' ' << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pixels.data()), std::streamsize(r.pixels.size()));
  if (!out) throw IoError("short write to " + path.string());
}

/// Places panes left to right with a white gutter.
inline Raster hstack(const std::vector<Raster>& panes, int gutter = 4) {
  int w = 0, h = 0;
  for (const auto& p : panes) {
    w += p.width;
    h = std::max(h, p.height);
  }
  w += gutter * int(panes.size() > 0 ? panes.size() - 1 : 0);
  Raster out(w, h, panes.empty() ? 1 : panes[0].depth);
  int x0 = 0;
  for (const auto& p : panes) {
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) std::copy_n(p.at(x, y), p.depth, out.at(x0 + x, y));
    x0 += p.width + gutter;
  }
  return out;
}

namespace detail {

inline unsigned char to_byte(double v, double lo, double hi) {
  const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
  return static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
}

}  // namespace detail

/// Grayscale triptych of one patchified image. Channels are averaged; masked
/// patches in the middle pane are drawn mid-gray. With nothing masked the
/// right pane is the raw decoder output. Panes are upscaled to at least 128
/// pixels tall.
template <typename T>
Raster image_triptych(const PatchSequence<T>& original, const Mat<T>& recon, const MaskPlan& plan, int channels) {
  require_shape(recon.rows() == original.patches.rows() && recon.cols() == original.patches.cols(),
                "triptych: reconstruction shape differs from original");
  const int P = original.patch, H = original.grid_h * P, W = original.grid_w * P;
  std::vector<bool> masked(std::size_t(original.count()), false);
  for (int i : plan.masked) masked[std::size_t(i)] = true;

  PatchSequence<T> pasted = original;
  if (plan.masked.empty()) pasted.patches = recon;
  for (int i : plan.masked) pasted.patches.row(i) = recon.row(i);
  const auto a = unpatchify(original, channels, H, W);
  const auto b = unpatchify(pasted, channels, H, W);

  auto mean_at = [&](const ImageSample<T>& img, int y, int x) {
    double s = 0;
    for (int c = 0; c < channels; ++c) s += double(img.at(c, y, x));
    return s / channels;
  };
  double lo = INFINITY, hi = -INFINITY;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      lo = std::min(lo, mean_at(a, y, x));
      hi = std::max(hi, mean_at(a, y, x));
    }

  const int scale = std::max(1, 128 / std::max(1, H));
  std::array<Raster, 3> panes{Raster(W * scale, H * scale, 1), Raster(W * scale, H * scale, 1),
                              Raster(W * scale, H * scale, 1)};
  for (int y = 0; y < H * scale; ++y)
    for (int x = 0; x < W * scale; ++x) {
      const int sy = y / scale, sx = x / scale;
      const int token = (sy / P) * original.grid_w + sx / P;
      const unsigned char orig = detail::to_byte(mean_at(a, sy, sx), lo, hi);
      *panes[0].at(x, y) = orig;
      *panes[1].at(x, y) = masked[std::size_t(token)] ? 128 : orig;
      *panes[2].at(x, y) = detail::to_byte(mean_at(b, sy, sx), lo, hi);
    }
  return hstack({panes[0], panes[1], panes[2]});
}

/// RGB triptych of one segmented IQ stream. Each antenna gets a strip showing
/// the per-sample amplitude sqrt(I^2 + Q^2) as vertical bars. Masked spans are
/// shaded gray; reconstructed spans are drawn in red, original samples in blue.
/// With nothing masked the right pane shows the whole decoder output.
template <typename T>
Raster iq_triptych(const SegmentSequence<T>& original, const Mat<T>& recon, const MaskPlan& plan, int antennas,
                   int length, int strip_height = 48) {
  require_shape(recon.rows() == original.segments.rows() && recon.cols() == original.segments.cols(),
                "triptych: reconstruction shape differs from original");
  require_shape(length % 2 == 0 && original.segment % 2 == 0, "iq triptych: needs whole I/Q pairs per segment");
  const int per = length / original.segment, half = original.segment / 2, width = length / 2;
  std::vector<bool> masked(std::size_t(original.count()), false);
  for (int i : plan.masked) masked[std::size_t(i)] = true;

  auto amp = [&](const Mat<T>& rows, int k, int j) {
    const double re = double(rows(k, 2 * j)), im = double(rows(k, 2 * j + 1));
    return std::sqrt(re * re + im * im);
  };
  double peak = 0;
  for (int k = 0; k < original.count(); ++k)
    for (int j = 0; j < half; ++j) peak = std::max(peak, amp(original.segments, k, j));
  if (!(peak > 0)) peak = 1;

  const int H = antennas * strip_height;
  std::array<Raster, 3> panes{Raster(width, H, 3), Raster(width, H, 3), Raster(width, H, 3)};
  auto paint = [](Raster& r, int x, int y, std::array<unsigned char, 3> rgb) { std::copy(rgb.begin(), rgb.end(), r.at(x, y)); };
  const std::array<unsigned char, 3> shade{200, 200, 200}, blue{30, 60, 200}, red{210, 40, 40}, rule{0, 0, 0};

  for (int m = 0; m < antennas; ++m) {
    const int y0 = m * strip_height, base = y0 + strip_height - 2;
    for (int x = 0; x < width; ++x) {
      const int k = m * per + x / half, j = x % half;
      const bool is_masked = masked[std::size_t(k)];
      auto bar = [&](Raster& r, double a, std::array<unsigned char, 3> colour) {
        const int h = int(std::lround(std::clamp(a / peak, 0.0, 1.0) * (strip_height - 4)));
        for (int y = base; y > base - h; --y) paint(r, x, y, colour);
      };
      if (is_masked)
        for (auto* p : {&panes[1], &panes[2]})
          for (int y = y0; y < y0 + strip_height - 1; ++y) paint(*p, x, y, shade);
      bar(panes[0], amp(original.segments, k, j), blue);
      if (!is_masked) bar(panes[1], amp(original.segments, k, j), blue);
      if (is_masked || plan.masked.empty()) bar(panes[2], amp(recon, k, j), red);
      else bar(panes[2], amp(original.segments, k, j), blue);
      for (auto& p : panes) paint(p, x, y0 + strip_height - 1, rule);
    }
  }
  return hstack({panes[0], panes[1], panes[2]});
}

}  // namespace mmwfm
