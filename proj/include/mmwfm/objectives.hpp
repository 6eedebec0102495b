#pragma once

#include "mmwfm/layers.hpp"
#include "mmwfm/masking.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mmwfm {

/// Per-modality linear maps from decoder width back to patch / segment space.
/// Distinct from the input projections.
template <typename T>
struct ReconHeads {
  Linear<T> image;
  Linear<T> iq;

  ReconHeads() = default;
  ReconHeads(int dec_dim, int patch_dim, int segment) : image(dec_dim, patch_dim), iq(dec_dim, segment) {}

  void init(std::mt19937_64& rng) {
    image.init(rng);
    iq.init(rng);
  }

  Mat<T> reconstruct_image(const Mat<T>& y) const { return image.forward(y); }
  Mat<T> reconstruct_iq(const Mat<T>& y) const { return iq.forward(y); }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    image.visit(join_name(prefix, "image"), f);
    iq.visit(join_name(prefix, "iq"), f);
  }
};

struct LossReport {
  double loss_image = 0.0;  // sum over the image batch of per-sample masked MSE
  double loss_iq = 0.0;
  double combined = 0.0;    // (loss_image + loss_iq) / (|B_G| + |B_Q|)
  int batch_image = 0;
  int batch_iq = 0;
  int masked_image = 0;     // masked tokens summed over the batch
  int masked_iq = 0;

  double mean_image() const { return batch_image ? loss_image / batch_image : 0.0; }
  double mean_iq() const { return batch_iq ? loss_iq / batch_iq : 0.0; }
};

/// (1/|mu|) * sum over masked rows of the squared row error.
template <typename T>
T masked_mse(const Mat<T>& original, const Mat<T>& recon, std::span<const int> masked) {
  require_shape(original.rows() == recon.rows() && original.cols() == recon.cols(), "masked_mse: shape mismatch");
  require_shape(!masked.empty(), "masked_mse: empty masked set");
  T acc = T(0);
  for (int i : masked) {
    require_shape(i >= 0 && i < original.rows(), "masked_mse: index out of range");
    acc += (original.row(i) - recon.row(i)).squaredNorm();
  }
  return acc / T(masked.size());
}

/// Gradient of masked_mse with respect to recon; zero on visible rows.
template <typename T>
Mat<T> masked_mse_grad(const Mat<T>& original, const Mat<T>& recon, std::span<const int> masked) {
  require_shape(!masked.empty(), "masked_mse: empty masked set");
  Mat<T> g = Mat<T>::Zero(recon.rows(), recon.cols());
  const T scale = T(2) / T(masked.size());
  for (int i : masked) g.row(i) = scale * (recon.row(i) - original.row(i));
  return g;
}

// ---------------------------------------------------------------------------
// Downstream losses

enum class TaskKind { Classification, Regression };

/// Softmax cross-entropy of one logit row.
template <typename T>
T cross_entropy(const RowVec<T>& logits, int label) {
  if (label < 0 || label >= logits.cols())
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                      std::to_string(logits.cols()) + ")");
  const T mx = logits.maxCoeff();
  const T lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(label);
}

template <typename T>
RowVec<T> cross_entropy_grad(const RowVec<T>& logits, int label) {
  if (label < 0 || label >= logits.cols()) throw ConfigError("cross_entropy: label out of range");
  const T mx = logits.maxCoeff();
  RowVec<T> p = (logits.array() - mx).exp();
  p /= p.sum();
  p(label) -= T(1);
  return p;
}

template <typename T>
T mse(const RowVec<T>& prediction, const RowVec<T>& target) {
  require_shape(prediction.cols() == target.cols(), "mse: dimension mismatch");
  return (prediction - target).squaredNorm() / T(prediction.cols());
}

template <typename T>
RowVec<T> mse_grad(const RowVec<T>& prediction, const RowVec<T>& target) {
  require_shape(prediction.cols() == target.cols(), "mse: dimension mismatch");
  return T(2) * (prediction - target) / T(prediction.cols());
}

// ---------------------------------------------------------------------------
// Metrics

/// Unweighted mean of per-class accuracies over classes present in labels.
inline double mean_per_class_accuracy(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  require_shape(preds.size() == labels.size(), "accuracy: length mismatch");
  std::vector<int> total(std::size_t(n_classes), 0), correct(std::size_t(n_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_shape(labels[i] >= 0 && labels[i] < n_classes, "accuracy: label out of range");
    ++total[std::size_t(labels[i])];
    if (preds[i] == labels[i]) ++correct[std::size_t(labels[i])];
  }
  double acc = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (total[std::size_t(c)] == 0) continue;
    acc += double(correct[std::size_t(c)]) / total[std::size_t(c)];
    ++present;
  }
  return present ? acc / present : 0.0;
}

/// Mean Euclidean distance between paired coordinate vectors.
inline double mean_localization_error(std::span<const std::vector<double>> predicted,
                                      std::span<const std::vector<double>> truth) {
  require_shape(predicted.size() == truth.size(), "localization error: length mismatch");
  if (predicted.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    require_shape(predicted[i].size() == truth[i].size(), "localization error: coordinate dimension mismatch");
    double d2 = 0.0;
    for (std::size_t j = 0; j < truth[i].size(); ++j) d2 += (predicted[i][j] - truth[i][j]) * (predicted[i][j] - truth[i][j]);
    acc += std::sqrt(d2);
  }
  return acc / double(predicted.size());
}

/// Structured metric record: `task=<t> metric=<name> value=<v> step=<s>`.
struct MetricRecord {
  std::string task;
  std::string metric;
  double value = 0.0;
  long long step = 0;
};

inline std::string format_metric_record(const MetricRecord& r) {
  std::ostringstream os;
  os << std::setprecision(6) << "task=" << r.task << " metric=" << r.metric << " value=" << r.value << " step=" << r.step;
  return os.str();
}

}  // namespace mmwfm
