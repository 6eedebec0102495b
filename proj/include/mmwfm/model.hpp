#pragma once

// The multimodal masked autoencoder: modality embeddings, a shared encoder
// over visible tokens, a narrower decoder over restored sequences and
// per-modality reconstruction heads.

#include "mmwfm/backbone.hpp"
#include "mmwfm/config.hpp"
#include "mmwfm/embedding.hpp"
#include "mmwfm/masking.hpp"
#include "mmwfm/objectives.hpp"
#include "mmwfm/tokenizer.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace mmwfm {

/// Input geometry plus backbone hyperparameters.
struct ModelConfig {
  int image_channels = 1;
  int image_height = 224;
  int image_width = 224;
  int antennas = 4;
  int iq_length = 1024;
  BackboneConfig backbone;

  bool operator==(const ModelConfig&) const = default;

  int patch_dim() const { return backbone.patch * backbone.patch * image_channels; }
  int grid_h() const { return image_height / backbone.patch; }
  int grid_w() const { return image_width / backbone.patch; }
  int image_tokens() const { return grid_h() * grid_w(); }
  int iq_tokens() const { return antennas * (iq_length / backbone.segment); }

  void validate() const {
    const auto& b = backbone;
    require_config(image_channels >= 1 && image_height >= 1 && image_width >= 1, "model: invalid image shape");
    require_config(b.patch >= 1 && image_height % b.patch == 0 && image_width % b.patch == 0,
                   "model: patch size must divide the image");
    require_config(antennas >= 1 && iq_length >= 2 && iq_length % 2 == 0, "model: invalid iq shape");
    require_config(b.segment >= 1 && iq_length % b.segment == 0, "model: segment size must divide iq length");
    require_config(b.enc_blocks >= 0 && b.dec_blocks >= 0, "model: negative depth");
    require_config(b.enc_dim % 4 == 0 && b.dec_dim % 4 == 0, "model: widths must be divisible by 4");
    require_config(b.enc_heads >= 1 && b.enc_dim % b.enc_heads == 0, "model: enc_dim not divisible by enc_heads");
    require_config(b.dec_heads >= 1 && b.dec_dim % b.dec_heads == 0, "model: dec_dim not divisible by dec_heads");
    require_config(b.enc_hidden >= 1 && b.dec_hidden >= 1, "model: invalid hidden width");
  }

  /// Canonical serialization, also embedded in checkpoints.
  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    auto put = [&](const char* k, int v) { kv.set(k, std::to_string(v)); };
    put("model.image_channels", image_channels);
    put("model.image_height", image_height);
    put("model.image_width", image_width);
    put("model.antennas", antennas);
    put("model.iq_length", iq_length);
    put("model.enc_blocks", backbone.enc_blocks);
    put("model.enc_dim", backbone.enc_dim);
    put("model.enc_hidden", backbone.enc_hidden);
    put("model.enc_heads", backbone.enc_heads);
    put("model.dec_blocks", backbone.dec_blocks);
    put("model.dec_dim", backbone.dec_dim);
    put("model.dec_hidden", backbone.dec_hidden);
    put("model.dec_heads", backbone.dec_heads);
    put("model.patch", backbone.patch);
    put("model.segment", backbone.segment);
    return kv;
  }

  std::string to_text() const { return to_kv().to_text(); }

  static ModelConfig from_kv(const KeyValueConfig& kv) { return from_kv(kv, ModelConfig()); }

  static ModelConfig from_kv(const KeyValueConfig& kv, const ModelConfig& base) {
    ModelConfig c = base;
    auto get = [&](const char* k, int& dst) { dst = int(kv.get_int(k, dst)); };
    get("model.image_channels", c.image_channels);
    get("model.image_height", c.image_height);
    get("model.image_width", c.image_width);
    get("model.antennas", c.antennas);
    get("model.iq_length", c.iq_length);
    get("model.enc_blocks", c.backbone.enc_blocks);
    get("model.enc_dim", c.backbone.enc_dim);
    get("model.enc_hidden", c.backbone.enc_hidden);
    get("model.enc_heads", c.backbone.enc_heads);
    get("model.dec_blocks", c.backbone.dec_blocks);
    get("model.dec_dim", c.backbone.dec_dim);
    get("model.dec_hidden", c.backbone.dec_hidden);
    get("model.dec_heads", c.backbone.dec_heads);
    get("model.patch", c.backbone.patch);
    get("model.segment", c.backbone.segment);
    return c;
  }
};

enum class ParamScope { Encoder, Decoder, Embedder, Heads, DecoderInput, All };

inline const char* scope_name(ParamScope s) {
  switch (s) {
    case ParamScope::Encoder: return "encoder";
    case ParamScope::Decoder: return "decoder";
    case ParamScope::Embedder: return "embedder";
    case ParamScope::Heads: return "heads";
    case ParamScope::DecoderInput: return "decoder_input";
    case ParamScope::All: return "all";
  }
  return "?";
}

/// Output of one masked reconstruction pass.
template <typename T>
struct ReconPass {
  Mat<T> recon;  // full-length reconstruction, one row per token
  T loss = T(0); // masked MSE; zero when nothing is masked
};

template <typename T>
class MaskedAutoencoder {
 public:
  ModelConfig config;
  ModalityEmbedder<T> embedder;
  TransformerStack<T> encoder;
  Linear<T> decoder_embed;
  Param<T> mask_token;
  TransformerStack<T> decoder;
  ReconHeads<T> heads;
  PositionalTable<T> enc_pos;  // never trained
  PositionalTable<T> dec_pos;

  explicit MaskedAutoencoder(const ModelConfig& cfg, std::uint64_t seed = 0) : config(cfg) {
    cfg.validate();
    const auto& b = cfg.backbone;
    embedder = ModalityEmbedder<T>(cfg.patch_dim(), b.segment, cfg.antennas, b.enc_dim);
    encoder = TransformerStack<T>(b.enc_blocks, b.enc_dim, b.enc_hidden, b.enc_heads);
    decoder_embed = Linear<T>(b.enc_dim, b.dec_dim);
    mask_token = Param<T>(1, b.dec_dim);
    decoder = TransformerStack<T>(b.dec_blocks, b.dec_dim, b.dec_hidden, b.dec_heads);
    heads = ReconHeads<T>(b.dec_dim, cfg.patch_dim(), b.segment);
    enc_pos = PositionalTable<T>(cfg.grid_h(), cfg.grid_w(), cfg.iq_tokens(), b.enc_dim);
    dec_pos = PositionalTable<T>(cfg.grid_h(), cfg.grid_w(), cfg.iq_tokens(), b.dec_dim);

    std::mt19937_64 rng(seed);
    embedder.init(rng);
    encoder.init(rng);
    decoder_embed.init(rng);
    fill_normal(mask_token.value, rng, 0.02);
    decoder.init(rng);
    heads.init(rng);
  }

  void visit(const ParamVisitor<T>& f) {
    embedder.visit("embed", f);
    encoder.visit("encoder", f);
    decoder_embed.visit("decoder_embed", f);
    f("mask_token", mask_token);
    decoder.visit("decoder", f);
    heads.visit("heads", f);
  }

  void visit_scope(ParamScope scope, const ParamVisitor<T>& f) {
    switch (scope) {
      case ParamScope::Encoder: encoder.visit("encoder", f); break;
      case ParamScope::Decoder: decoder.visit("decoder", f); break;
      case ParamScope::Embedder: embedder.visit("embed", f); break;
      case ParamScope::Heads: heads.visit("heads", f); break;
      case ParamScope::DecoderInput:
        decoder_embed.visit("decoder_embed", f);
        f("mask_token", mask_token);
        break;
      case ParamScope::All: visit(f); break;
    }
  }

  long long count_params(ParamScope scope) {
    long long n = 0;
    visit_scope(scope, [&](const std::string&, Param<T>& p) { n += p.size(); });
    return n;
  }

  void zero_grad() {
    visit([](const std::string&, Param<T>& p) { p.zero_grad(); });
  }

  PatchSequence<T> tokenize(const ImageSample<T>& x) const {
    require_shape(x.channels == config.image_channels && x.height == config.image_height &&
                      x.width == config.image_width,
                  "model: image " + std::to_string(x.channels) + "x" + shape_str(x.height, x.width) +
                      " does not match configured geometry");
    return patchify(x, config.backbone.patch);
  }

  SegmentSequence<T> tokenize(const IQSample<T>& x) const {
    require_shape(x.antennas() == config.antennas && x.length() == config.iq_length,
                  "model: iq " + shape_str(x.antennas(), x.length()) + " does not match configured geometry");
    return segment(x, config.backbone.segment);
  }

  /// Masked reconstruction of one image. With grad_scale set, back-propagates
  /// grad_scale * d(loss) into every trainable parameter.
  ReconPass<T> image_pass(const PatchSequence<T>& p, const MaskPlan& plan, std::optional<T> grad_scale = {}) {
    ImageEmbedCache<T> ec;
    const Mat<T> z = embedder.embed_image(p, enc_pos.grid, ec);
    auto back_embed = [&](const Mat<T>& dz) { embedder.backward_image(ec, dz); };
    return masked_pass(z, p.patches, plan, dec_pos.grid, heads.image, back_embed, grad_scale);
  }

  ReconPass<T> iq_pass(const SegmentSequence<T>& s, const MaskPlan& plan, std::optional<T> grad_scale = {}) {
    IQEmbedCache<T> ec;
    const Mat<T> z = embedder.embed_iq(s, enc_pos.sequence, ec);
    auto back_embed = [&](const Mat<T>& dz) { embedder.backward_iq(ec, dz); };
    return masked_pass(z, s.segments, plan, dec_pos.sequence, heads.iq, back_embed, grad_scale);
  }

  /// Encoder features of all tokens (no masking), used for representations.
  Mat<T> encode_image(const PatchSequence<T>& p) const {
    ImageEmbedCache<T> ec;
    return encoder.forward(embedder.embed_image(p, enc_pos.grid, ec));
  }

  Mat<T> encode_iq(const SegmentSequence<T>& s) const {
    IQEmbedCache<T> ec;
    return encoder.forward(embedder.embed_iq(s, enc_pos.sequence, ec));
  }

 private:
  template <typename BackEmbed>
  ReconPass<T> masked_pass(const Mat<T>& z, const Mat<T>& target, const MaskPlan& plan, const Mat<T>& dec_table,
                           Linear<T>& head, BackEmbed&& back_embed, std::optional<T> grad_scale) {
    StackCache<T> enc_cache, dec_cache;
    const Mat<T> visible = apply_mask(z, plan);
    const Mat<T> features = encoder.forward(visible, enc_cache);
    const Mat<T> projected = decoder_embed.forward(features);
    const Mat<T> full = restore(projected, plan, mask_token, dec_table);
    const Mat<T> y = decoder.forward(full, dec_cache);
    ReconPass<T> out;
    out.recon = head.forward(y);
    if (plan.masked.empty()) return out;
    out.loss = masked_mse(target, out.recon, plan.masked);
    if (!grad_scale) return out;

    const Mat<T> d_recon = *grad_scale * masked_mse_grad(target, out.recon, plan.masked);
    const Mat<T> d_y = head.backward(y, d_recon);
    const Mat<T> d_full = decoder.backward(dec_cache, d_y);
    const Mat<T> d_projected = restore_backward(d_full, plan, mask_token);
    const Mat<T> d_features = decoder_embed.backward(features, d_projected);
    const Mat<T> d_visible = encoder.backward(enc_cache, d_features);
    back_embed(apply_mask_backward(d_visible, plan));
    return out;
  }
};

}  // namespace mmwfm
