#pragma once

#include "mmwfm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace mmwfm {

/// Partition of token indices into visible (kept) and masked sets, both
/// ascending.
struct MaskPlan {
  int n_total = 0;
  std::vector<int> kept;
  std::vector<int> masked;
  double ratio = 0.0;
};

/// Number of tokens removed for a given ratio: floor(ratio * n).
inline int masked_count(int n_tokens, double ratio) {
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  return int(std::floor(ratio * n_tokens + 1e-9));
}

inline int visible_count(int n_tokens, double ratio) { return n_tokens - masked_count(n_tokens, ratio); }

/// Uniformly random masked subset of size floor(ratio * n), deterministic in seed.
inline MaskPlan sample_mask(int n_tokens, double ratio, std::uint64_t seed) {
  require_config(n_tokens >= 1, "sample_mask: need at least one token");
  require_config(ratio >= 0.0 && ratio < 1.0, "sample_mask: ratio must lie in [0, 1)");
  const int n_masked = masked_count(n_tokens, ratio);
  std::vector<int> perm(static_cast<std::size_t>(n_tokens));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n_masked; ++i) {
    const int j = std::uniform_int_distribution<int>(i, n_tokens - 1)(rng);
    std::swap(perm[std::size_t(i)], perm[std::size_t(j)]);
  }
  MaskPlan plan;
  plan.n_total = n_tokens;
  plan.ratio = ratio;
  plan.masked.assign(perm.begin(), perm.begin() + n_masked);
  plan.kept.assign(perm.begin() + n_masked, perm.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.kept.begin(), plan.kept.end());
  return plan;
}

/// Plan that keeps every token.
inline MaskPlan full_plan(int n_tokens) { return sample_mask(n_tokens, 0.0, 0); }

/// Builds a plan from an explicit masked index set.
inline MaskPlan plan_from_masked(int n_tokens, std::vector<int> masked) {
  std::sort(masked.begin(), masked.end());
  require_shape(std::adjacent_find(masked.begin(), masked.end()) == masked.end(), "mask plan: duplicate index");
  MaskPlan plan;
  plan.n_total = n_tokens;
  plan.masked = masked;
  std::vector<char> is_masked(std::size_t(n_tokens), 0);
  for (int i : masked) {
    require_shape(i >= 0 && i < n_tokens, "mask plan: index out of range");
    is_masked[std::size_t(i)] = 1;
  }
  for (int i = 0; i < n_tokens; ++i)
    if (!is_masked[std::size_t(i)]) plan.kept.push_back(i);
  require_shape(!plan.kept.empty(), "mask plan: every token masked");
  plan.ratio = double(masked.size()) / n_tokens;
  return plan;
}

/// Visible tokens in their original relative order.
template <typename T>
Mat<T> apply_mask(const Mat<T>& tokens, const MaskPlan& plan) {
  require_shape(tokens.rows() == plan.n_total, "apply_mask: " + std::to_string(tokens.rows()) +
                                                   " tokens but plan covers " + std::to_string(plan.n_total));
  Mat<T> out(Eigen::Index(plan.kept.size()), tokens.cols());
  for (std::size_t i = 0; i < plan.kept.size(); ++i) out.row(Eigen::Index(i)) = tokens.row(plan.kept[i]);
  return out;
}

/// Scatters gradients of the visible sequence back to full length.
template <typename T>
Mat<T> apply_mask_backward(const Mat<T>& d_visible, const MaskPlan& plan) {
  Mat<T> d = Mat<T>::Zero(plan.n_total, d_visible.cols());
  for (std::size_t i = 0; i < plan.kept.size(); ++i) d.row(plan.kept[i]) = d_visible.row(Eigen::Index(i));
  return d;
}

/// Full-length decoder input: visible features at kept positions, the shared
/// mask token elsewhere, plus positional embeddings everywhere.
template <typename T>
Mat<T> restore(const Mat<T>& visible, const MaskPlan& plan, const Param<T>& mask_token, const Mat<T>& pos) {
  require_shape(visible.rows() == Eigen::Index(plan.kept.size()), "restore: visible count does not match plan");
  require_shape(pos.rows() == plan.n_total && pos.cols() == visible.cols(), "restore: positional table mismatch");
  require_shape(mask_token.value.cols() == visible.cols(), "restore: mask token width mismatch");
  Mat<T> full = pos;
  for (std::size_t i = 0; i < plan.kept.size(); ++i) full.row(plan.kept[i]) += visible.row(Eigen::Index(i));
  for (int i : plan.masked) full.row(i) += mask_token.value.row(0);
  return full;
}

/// Returns d_visible and accumulates the mask-token gradient.
template <typename T>
Mat<T> restore_backward(const Mat<T>& d_full, const MaskPlan& plan, Param<T>& mask_token) {
  if (mask_token.trainable)
    for (int i : plan.masked) mask_token.grad.row(0) += d_full.row(i);
  Mat<T> d(Eigen::Index(plan.kept.size()), d_full.cols());
  for (std::size_t i = 0; i < plan.kept.size(); ++i) d.row(Eigen::Index(i)) = d_full.row(plan.kept[i]);
  return d;
}

}  // namespace mmwfm
