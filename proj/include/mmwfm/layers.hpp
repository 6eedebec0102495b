#pragma once

// Differentiable building blocks of the ViT. Every layer exposes
// forward(input, cache) and backward(cache, d_output); backward accumulates
// into the gradients of trainable parameters and returns d_input. Caches are
// owned by the caller so one layer instance can serve many sequences.

#include "mmwfm/core.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mmwfm {

template <typename T>
void fill_normal(Mat<T>& m, std::mt19937_64& rng, double std) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------------------

/// y = x W + b with W stored in x out.
template <typename T>
struct Linear {
  Param<T> weight;
  Param<T> bias;

  Linear() = default;
  Linear(int in, int out) : weight(in, out), bias(1, out) {}

  int in_dim() const { return int(weight.value.rows()); }
  int out_dim() const { return int(weight.value.cols()); }

  void init(std::mt19937_64& rng, double std = 0.02) {
    fill_normal(weight.value, rng, std);
    bias.value.setZero();
  }

  Mat<T> forward(const Mat<T>& x) const {
    require_shape(x.cols() == weight.value.rows(), "linear: input " + shape_str(x.rows(), x.cols()) +
                                                       " vs weight " +
                                                       shape_str(weight.value.rows(), weight.value.cols()));
    Mat<T> y(x.rows(), weight.value.cols());
    y.noalias() = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
    if (weight.trainable) weight.grad.noalias() += x.transpose() * dy;
    if (bias.trainable) bias.grad.row(0) += dy.colwise().sum();
    Mat<T> dx(dy.rows(), weight.value.rows());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(join_name(prefix, "weight"), weight);
    f(join_name(prefix, "bias"), bias);
  }
};

// ---------------------------------------------------------------------------

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
struct LayerNorm {
  Param<T> scale;
  Param<T> shift;
  T eps = T(1e-6);

  LayerNorm() = default;
  explicit LayerNorm(int dim) : scale(1, dim), shift(1, dim) { scale.value.setOnes(); }

  Mat<T> forward(const Mat<T>& x, LayerNormCache<T>& cache) const {
    require_shape(x.cols() == scale.value.cols(), "layernorm: width mismatch");
    const Eigen::Index n = x.rows(), d = x.cols();
    cache.xhat.resize(n, d);
    cache.inv_std.resize(std::size_t(n));
    Mat<T> y(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mean = x.row(i).mean();
      const T var = (x.row(i).array() - mean).square().mean();
      const T inv = T(1) / std::sqrt(var + eps);
      cache.inv_std[std::size_t(i)] = inv;
      cache.xhat.row(i) = (x.row(i).array() - mean) * inv;
      y.row(i) = cache.xhat.row(i).cwiseProduct(scale.value.row(0)) + shift.value.row(0);
    }
    return y;
  }

  Mat<T> backward(const LayerNormCache<T>& cache, const Mat<T>& dy) {
    const Eigen::Index n = dy.rows(), d = dy.cols();
    if (scale.trainable) scale.grad.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
    if (shift.trainable) shift.grad.row(0) += dy.colwise().sum();
    Mat<T> dx(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const RowVec<T> dxhat = dy.row(i).cwiseProduct(scale.value.row(0));
      const T s1 = dxhat.sum();
      const T s2 = dxhat.dot(cache.xhat.row(i));
      dx.row(i) = (dxhat.array() * T(d) - s1 - cache.xhat.row(i).array() * s2) * (cache.inv_std[std::size_t(i)] / T(d));
    }
    return dx;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(join_name(prefix, "scale"), scale);
    f(join_name(prefix, "shift"), shift);
  }
};

// ---------------------------------------------------------------------------

/// Exact (erf) GELU.
template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return T(0.5) * v * (T(1) + std::erf(v / T(std::numbers::sqrt2))); });
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy) {
  const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * T(std::numbers::pi));
  return x.binaryExpr(dy, [inv_sqrt_2pi](T v, T g) {
    const T cdf = T(0.5) * (T(1) + std::erf(v / T(std::numbers::sqrt2)));
    const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
    return g * (cdf + v * pdf);
  });
}

// ---------------------------------------------------------------------------

/// y = x W + (alpha / rank) * (x A) B, the low-rank update of a frozen
/// projection W. A is D_in x rank, B is rank x D_out.
template <typename T>
Mat<T> lora_forward(const Mat<T>& x, const Mat<T>& w_frozen, const Mat<T>& a, const Mat<T>& b, double alpha, int rank) {
  require_shape(rank >= 1 && a.cols() == rank && b.rows() == rank, "lora: rank mismatch");
  require_shape(x.cols() == w_frozen.rows() && a.rows() == w_frozen.rows() && b.cols() == w_frozen.cols(),
                "lora: adapter shapes do not match the projection");
  Mat<T> y = x * w_frozen;
  y.noalias() += T(alpha / rank) * ((x * a) * b);
  return y;
}

template <typename T>
struct LoraAdapter {
  Param<T> a;  // D_in x rank
  Param<T> b;  // rank x D_out
  T scaling = T(1);

  LoraAdapter() = default;
  LoraAdapter(int in, int out, int rank, double alpha) : a(in, rank), b(rank, out), scaling(T(alpha / rank)) {}

  int rank() const { return int(a.value.cols()); }

  void init(std::mt19937_64& rng) {
    fill_normal(a.value, rng, 0.02);
    b.value.setZero();
  }

  Mat<T> delta(const Mat<T>& x) const { return scaling * ((x * a.value) * b.value); }

  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
    const Mat<T> xa = x * a.value;
    const Mat<T> dxa = scaling * (dy * b.value.transpose());
    if (b.trainable) b.grad.noalias() += scaling * (xa.transpose() * dy);
    if (a.trainable) a.grad.noalias() += x.transpose() * dxa;
    return dxa * a.value.transpose();
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(join_name(prefix, "lora_a"), a);
    f(join_name(prefix, "lora_b"), b);
  }
};

// ---------------------------------------------------------------------------

template <typename T>
struct AttentionCache {
  Mat<T> x, q, k, v, context;
  std::vector<Mat<T>> probs;  // one n x n matrix per head
};

/// Multi-head self-attention with separate query/key/value/output maps and
/// optional low-rank adapters on query and value.
template <typename T>
struct Attention {
  Linear<T> query, key, value, out;
  int heads = 1;
  std::optional<LoraAdapter<T>> lora_query, lora_value;

  Attention() = default;
  Attention(int dim, int n_heads) : query(dim, dim), key(dim, dim), value(dim, dim), out(dim, dim), heads(n_heads) {
    require_config(n_heads >= 1 && dim % n_heads == 0, "attention: dim must be divisible by heads");
  }

  int dim() const { return query.in_dim(); }

  void init(std::mt19937_64& rng) {
    query.init(rng);
    key.init(rng);
    value.init(rng);
    out.init(rng);
  }

  Mat<T> forward(const Mat<T>& x, AttentionCache<T>& c) const {
    const Eigen::Index n = x.rows();
    const int hd = dim() / heads;
    const T scale = T(1) / std::sqrt(T(hd));
    c.x = x;
    c.q = query.forward(x);
    c.k = key.forward(x);
    c.v = value.forward(x);
    if (lora_query) c.q += lora_query->delta(x);
    if (lora_value) c.v += lora_value->delta(x);
    c.context.resize(n, dim());
    c.probs.resize(std::size_t(heads));
    for (int h = 0; h < heads; ++h) {
      Mat<T>& p = c.probs[std::size_t(h)];
      p.noalias() = c.q.middleCols(h * hd, hd) * c.k.middleCols(h * hd, hd).transpose();
      p *= scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        const T mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      c.context.middleCols(h * hd, hd).noalias() = p * c.v.middleCols(h * hd, hd);
    }
    return out.forward(c.context);
  }

  Mat<T> backward(const AttentionCache<T>& c, const Mat<T>& dy) {
    const Eigen::Index n = c.x.rows();
    const int hd = dim() / heads;
    const T scale = T(1) / std::sqrt(T(hd));
    const Mat<T> dctx = out.backward(c.context, dy);
    Mat<T> dq(n, dim()), dk(n, dim()), dv(n, dim());
    for (int h = 0; h < heads; ++h) {
      const Mat<T>& p = c.probs[std::size_t(h)];
      const auto dctx_h = dctx.middleCols(h * hd, hd);
      dv.middleCols(h * hd, hd).noalias() = p.transpose() * dctx_h;
      Mat<T> dp = dctx_h * c.v.middleCols(h * hd, hd).transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        const T dotp = dp.row(i).dot(p.row(i));
        dp.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dotp).matrix());
      }
      dp *= scale;
      dq.middleCols(h * hd, hd).noalias() = dp * c.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd).noalias() = dp.transpose() * c.q.middleCols(h * hd, hd);
    }
    Mat<T> dx = query.backward(c.x, dq);
    dx += key.backward(c.x, dk);
    dx += value.backward(c.x, dv);
    if (lora_query) dx += lora_query->backward(c.x, dq);
    if (lora_value) dx += lora_value->backward(c.x, dv);
    return dx;
  }

  /// Base projections only; adapters are enumerated by visit_adapters.
  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    query.visit(join_name(prefix, "query"), f);
    key.visit(join_name(prefix, "key"), f);
    value.visit(join_name(prefix, "value"), f);
    out.visit(join_name(prefix, "out"), f);
  }

  void visit_adapters(const std::string& prefix, const ParamVisitor<T>& f) {
    if (lora_query) lora_query->visit(join_name(prefix, "query"), f);
    if (lora_value) lora_value->visit(join_name(prefix, "value"), f);
  }
};

// ---------------------------------------------------------------------------

template <typename T>
struct MlpCache {
  Mat<T> x, pre, act;
};

template <typename T>
struct Mlp {
  Linear<T> fc1, fc2;

  Mlp() = default;
  Mlp(int dim, int hidden) : fc1(dim, hidden), fc2(hidden, dim) {}

  void init(std::mt19937_64& rng) {
    fc1.init(rng);
    fc2.init(rng);
  }

  Mat<T> forward(const Mat<T>& x, MlpCache<T>& c) const {
    c.x = x;
    c.pre = fc1.forward(x);
    c.act = gelu(c.pre);
    return fc2.forward(c.act);
  }

  Mat<T> backward(const MlpCache<T>& c, const Mat<T>& dy) {
    const Mat<T> dact = fc2.backward(c.act, dy);
    return fc1.backward(c.x, gelu_backward(c.pre, dact));
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    fc1.visit(join_name(prefix, "fc1"), f);
    fc2.visit(join_name(prefix, "fc2"), f);
  }
};

// ---------------------------------------------------------------------------

template <typename T>
struct BlockCache {
  LayerNormCache<T> norm1, norm2;
  AttentionCache<T> attn;
  MlpCache<T> mlp;
};

/// Pre-norm transformer block: x + attn(norm(x)), then x + mlp(norm(x)).
template <typename T>
struct ViTBlock {
  LayerNorm<T> norm1;
  Attention<T> attn;
  LayerNorm<T> norm2;
  Mlp<T> mlp;

  ViTBlock() = default;
  ViTBlock(int dim, int hidden, int heads) : norm1(dim), attn(dim, heads), norm2(dim), mlp(dim, hidden) {}

  void init(std::mt19937_64& rng) {
    attn.init(rng);
    mlp.init(rng);
  }

  Mat<T> forward(const Mat<T>& x, BlockCache<T>& c) const {
    Mat<T> h = x + attn.forward(norm1.forward(x, c.norm1), c.attn);
    h += mlp.forward(norm2.forward(h, c.norm2), c.mlp);
    return h;
  }

  Mat<T> backward(const BlockCache<T>& c, const Mat<T>& dy) {
    Mat<T> dh = dy + norm2.backward(c.norm2, mlp.backward(c.mlp, dy));
    dh += norm1.backward(c.norm1, attn.backward(c.attn, dh));
    return dh;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    norm1.visit(join_name(prefix, "norm1"), f);
    attn.visit(join_name(prefix, "attn"), f);
    norm2.visit(join_name(prefix, "norm2"), f);
    mlp.visit(join_name(prefix, "mlp"), f);
  }
};

}  // namespace mmwfm
