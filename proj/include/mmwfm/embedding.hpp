#pragma once

// Modality-specific projections with feature-wise affine conditioning,
// fixed sinusoidal position tables and learned antenna embeddings.

#include "mmwfm/layers.hpp"
#include "mmwfm/tokenizer.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mmwfm {

/// Row k holds sin(k / 10000^(2i/D)) at column 2i and the matching cos at 2i+1.
template <typename T>
Mat<T> sinusoidal_1d(int length, int dim) {
  require_config(dim >= 2 && dim % 2 == 0, "sinusoidal_1d: dim must be even");
  require_config(length >= 0, "sinusoidal_1d: negative length");
  Mat<T> table(length, dim);
  for (int k = 0; k < length; ++k)
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = k / std::pow(10000.0, 2.0 * i / dim);
      table(k, 2 * i) = static_cast<T>(std::sin(angle));
      table(k, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  return table;
}

/// Grid table in patchify order: the first D/2 columns encode the row
/// coordinate, the last D/2 the column coordinate.
template <typename T>
Mat<T> sinusoidal_2d(int grid_h, int grid_w, int dim) {
  require_config(dim >= 4 && dim % 4 == 0, "sinusoidal_2d: dim must be divisible by 4");
  const Mat<T> rows = sinusoidal_1d<T>(grid_h, dim / 2);
  const Mat<T> cols = sinusoidal_1d<T>(grid_w, dim / 2);
  Mat<T> table(grid_h * grid_w, dim);
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x) {
      table.row(y * grid_w + x).head(dim / 2) = rows.row(y);
      table.row(y * grid_w + x).tail(dim / 2) = cols.row(x);
    }
  return table;
}

/// Frozen position tables for one input geometry at one width.
template <typename T>
struct PositionalTable {
  Mat<T> grid;      // N x D
  Mat<T> sequence;  // K x D

  PositionalTable() = default;
  PositionalTable(int grid_h, int grid_w, int iq_tokens, int dim)
      : grid(sinusoidal_2d<T>(grid_h, grid_w, dim)), sequence(sinusoidal_1d<T>(iq_tokens, dim)) {}
};

template <typename T>
struct AffineCache {
  Mat<T> projected;  // pre-affine projection output
};

/// Linear projection followed by u = (x E + b) * gamma + beta.
template <typename T>
struct AffineProjection {
  Linear<T> proj;
  Param<T> gamma;
  Param<T> beta;

  AffineProjection() = default;
  AffineProjection(int in, int dim) : proj(in, dim), gamma(1, dim), beta(1, dim) { gamma.value.setOnes(); }

  void init(std::mt19937_64& rng) { proj.init(rng); }

  Mat<T> forward(const Mat<T>& x, AffineCache<T>& c) const {
    c.projected = proj.forward(x);
    Mat<T> u = c.projected.array().rowwise() * gamma.value.row(0).array();
    u.rowwise() += beta.value.row(0);
    return u;
  }

  Mat<T> forward(const Mat<T>& x) const {
    AffineCache<T> c;
    return forward(x, c);
  }

  Mat<T> backward(const Mat<T>& x, const AffineCache<T>& c, const Mat<T>& du) {
    if (gamma.trainable) gamma.grad.row(0) += du.cwiseProduct(c.projected).colwise().sum();
    if (beta.trainable) beta.grad.row(0) += du.colwise().sum();
    const Mat<T> dproj = du.array().rowwise() * gamma.value.row(0).array();
    return proj.backward(x, dproj);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    proj.visit(join_name(prefix, "proj"), f);
    f(join_name(prefix, "gamma"), gamma);
    f(join_name(prefix, "beta"), beta);
  }
};

/// Per-antenna learned vectors, one row per antenna.
template <typename T>
struct AntennaEmbedding {
  Param<T> table;

  AntennaEmbedding() = default;
  AntennaEmbedding(int antennas, int dim) : table(antennas, dim) {}

  int antennas() const { return int(table.value.rows()); }

  void init(std::mt19937_64& rng) { fill_normal(table.value, rng, 0.02); }

  /// Row k of the result is the vector of antenna_of[k].
  Mat<T> gather(const std::vector<int>& antenna_of) const {
    Mat<T> out(Eigen::Index(antenna_of.size()), table.value.cols());
    for (std::size_t k = 0; k < antenna_of.size(); ++k) {
      const int a = antenna_of[k];
      if (a < 0 || a >= antennas())
        throw ShapeError("antenna index " + std::to_string(a) + " out of range for " + std::to_string(antennas()) +
                         " antennas");
      out.row(Eigen::Index(k)) = table.value.row(a);
    }
    return out;
  }

  void backward(const std::vector<int>& antenna_of, const Mat<T>& dz) {
    if (!table.trainable) return;
    for (std::size_t k = 0; k < antenna_of.size(); ++k) table.grad.row(antenna_of[k]) += dz.row(Eigen::Index(k));
  }
};

template <typename T>
struct ImageEmbedCache {
  Mat<T> input;
  AffineCache<T> affine;
};

template <typename T>
struct IQEmbedCache {
  Mat<T> input;
  std::vector<int> antenna_of;
  AffineCache<T> affine;
};

/// Maps both token-precursor families into the shared encoder space.
template <typename T>
struct ModalityEmbedder {
  AffineProjection<T> image;
  AffineProjection<T> iq;
  AntennaEmbedding<T> antenna;

  ModalityEmbedder() = default;
  ModalityEmbedder(int patch_dim, int segment, int antennas, int dim)
      : image(patch_dim, dim), iq(segment, dim), antenna(antennas, dim) {}

  int dim() const { return image.proj.out_dim(); }

  void init(std::mt19937_64& rng) {
    image.init(rng);
    iq.init(rng);
    antenna.init(rng);
  }

  /// Projected, conditioned and position-encoded image tokens.
  Mat<T> embed_image(const PatchSequence<T>& p, const Mat<T>& pos, ImageEmbedCache<T>& c) const {
    require_shape(p.dim() == image.proj.in_dim(), "embed_image: patch dim " + std::to_string(p.dim()) + " != " +
                                                      std::to_string(image.proj.in_dim()));
    require_shape(pos.rows() == p.count() && pos.cols() == dim(), "embed_image: positional table mismatch");
    c.input = p.patches;
    return image.forward(p.patches, c.affine) + pos;
  }

  /// Projected, conditioned IQ tokens plus position and antenna vectors.
  Mat<T> embed_iq(const SegmentSequence<T>& s, const Mat<T>& pos, IQEmbedCache<T>& c) const {
    require_shape(s.segments.cols() == iq.proj.in_dim(), "embed_iq: segment length " +
                                                             std::to_string(s.segments.cols()) + " != " +
                                                             std::to_string(iq.proj.in_dim()));
    require_shape(pos.rows() == s.count() && pos.cols() == dim(), "embed_iq: positional table mismatch");
    c.input = s.segments;
    c.antenna_of = s.antenna_of;
    const Mat<T> ant = antenna.gather(s.antenna_of);
    return iq.forward(s.segments, c.affine) + pos + ant;
  }

  void backward_image(const ImageEmbedCache<T>& c, const Mat<T>& dz) { image.backward(c.input, c.affine, dz); }

  void backward_iq(const IQEmbedCache<T>& c, const Mat<T>& dz) {
    antenna.backward(c.antenna_of, dz);
    iq.backward(c.input, c.affine, dz);
  }

  void visit_image(const std::string& prefix, const ParamVisitor<T>& f) { image.visit(join_name(prefix, "image"), f); }

  void visit_iq(const std::string& prefix, const ParamVisitor<T>& f) {
    iq.visit(join_name(prefix, "iq"), f);
    f(join_name(prefix, "antenna"), antenna.table);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    visit_image(prefix, f);
    visit_iq(prefix, f);
  }
};

}  // namespace mmwfm
