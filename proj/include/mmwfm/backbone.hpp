#pragma once

#include "mmwfm/layers.hpp"

#include <random>
#include <string>
#include <vector>

namespace mmwfm {

/// Architectural hyperparameters of the asymmetric encoder/decoder.
struct BackboneConfig {
  int enc_blocks = 8;
  int enc_dim = 256;
  int enc_hidden = 1024;
  int enc_heads = 8;
  int dec_blocks = 4;
  int dec_dim = 128;
  int dec_hidden = 512;
  int dec_heads = 16;
  int patch = 16;
  int segment = 16;

  bool operator==(const BackboneConfig&) const = default;
};

template <typename T>
struct StackCache {
  std::vector<BlockCache<T>> blocks;
  std::vector<Mat<T>> inputs;  // input of each block
  LayerNormCache<T> final_norm;
};

/// A series of ViT blocks followed by a final normalization. Carries no
/// positional information of its own, so any sequence length is accepted.
template <typename T>
struct TransformerStack {
  std::vector<ViTBlock<T>> blocks;
  LayerNorm<T> final_norm;

  TransformerStack() = default;
  TransformerStack(int depth, int dim, int hidden, int heads) : final_norm(dim) {
    require_config(depth >= 0 && dim >= 1 && hidden >= 1, "transformer: invalid dimensions");
    blocks.reserve(std::size_t(depth));
    for (int i = 0; i < depth; ++i) blocks.emplace_back(dim, hidden, heads);
  }

  int dim() const { return int(final_norm.scale.value.cols()); }
  int depth() const { return int(blocks.size()); }

  void init(std::mt19937_64& rng) {
    for (auto& b : blocks) b.init(rng);
  }

  Mat<T> forward(const Mat<T>& x, StackCache<T>& c) const {
    require_shape(x.rows() >= 1, "transformer: empty sequence");
    require_shape(x.cols() == dim(), "transformer: token width " + std::to_string(x.cols()) + " != " +
                                         std::to_string(dim()));
    c.blocks.resize(blocks.size());
    c.inputs.resize(blocks.size());
    Mat<T> h = x;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      c.inputs[i] = h;
      h = blocks[i].forward(h, c.blocks[i]);
    }
    return final_norm.forward(h, c.final_norm);
  }

  Mat<T> forward(const Mat<T>& x) const {
    StackCache<T> c;
    return forward(x, c);
  }

  Mat<T> backward(const StackCache<T>& c, const Mat<T>& dy) {
    Mat<T> d = final_norm.backward(c.final_norm, dy);
    for (std::size_t i = blocks.size(); i-- > 0;) d = blocks[i].backward(c.blocks[i], d);
    return d;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(join_name(prefix, "blocks." + std::to_string(i)), f);
    final_norm.visit(join_name(prefix, "final_norm"), f);
  }

  void visit_adapters(const std::string& prefix, const ParamVisitor<T>& f) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].attn.visit_adapters(join_name(prefix, "blocks." + std::to_string(i) + ".attn"), f);
  }
};

/// Mean over the token axis.
template <typename T>
RowVec<T> mean_pool(const Mat<T>& features) {
  require_shape(features.rows() >= 1, "pool: empty sequence");
  return features.colwise().mean();
}

template <typename T>
Mat<T> mean_pool_backward(Eigen::Index tokens, const RowVec<T>& dz) {
  return dz.replicate(tokens, 1) / T(tokens);
}

/// Closed-form parameter count of one pre-norm block.
inline long long vit_block_param_count(int dim, int hidden) {
  const long long d = dim, h = hidden;
  return 4 * (d * d + d)      // query, key, value, out
         + 2 * (2 * d)        // two normalizations
         + (d * h + h) + (h * d + d);
}

}  // namespace mmwfm
