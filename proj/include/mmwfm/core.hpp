#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmwfm {

// Token sequences are stored one token per row.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, counts or options supplied by the caller.
struct ConfigError : Error {
  using Error::Error;
};

/// Tensor shapes that do not agree with each other or with the model.
struct ShapeError : Error {
  using Error::Error;
};

/// Dataset statistics with zero spread.
struct DegenerateStatsError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

inline void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

// ---------------------------------------------------------------------------
// Parameters

/// A learnable tensor with its gradient accumulator. Vectors are stored as
/// 1xD matrices so every parameter has the same representation.
template <typename T>
struct Param {
  Mat<T> value;
  Mat<T> grad;
  bool trainable = true;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// Visitor signature used by every module to enumerate its parameters under
/// stable hierarchical names.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;

inline std::string join_name(const std::string& prefix, const std::string& leaf) {
  return prefix.empty() ? leaf : prefix + "." + leaf;
}

}  // namespace mmwfm
