#pragma once

#include "iot/numerics.hpp"

#include <numeric>

namespace iot {

/// Semi-supervised training data. Samples are stored one per column.
/// The first P columns of unpaired_x / unpaired_y repeat the paired samples.
struct Dataset {
  Mat paired_x;    // Dx x P
  Mat paired_y;    // Dy x P
  Mat unpaired_x;  // Dx x Q
  Mat unpaired_y;  // Dy x R

  Eigen::Index x_dim() const { return unpaired_x.rows(); }
  Eigen::Index y_dim() const { return unpaired_y.rows(); }
  Eigen::Index num_paired() const { return paired_x.cols(); }
  Eigen::Index num_x() const { return unpaired_x.cols(); }
  Eigen::Index num_y() const { return unpaired_y.cols(); }
};

/// Shapes are consistent and P <= Q, R.
inline void validate(const Dataset& d) {
  require(d.paired_x.cols() == d.paired_y.cols(), "dataset: paired x/y counts differ");
  require(d.paired_x.rows() == d.unpaired_x.rows() || d.paired_x.cols() == 0, "dataset: x dimension mismatch");
  require(d.paired_y.rows() == d.unpaired_y.rows() || d.paired_y.cols() == 0, "dataset: y dimension mismatch");
  require(d.num_paired() <= d.num_x() && d.num_paired() <= d.num_y(), "dataset: P must not exceed Q or R");
}

/// Checks the prefix convention field by field.
inline bool has_prefix_property(const Dataset& d) {
  const Eigen::Index p = d.num_paired();
  if (p > d.num_x() || p > d.num_y()) return false;
  return d.unpaired_x.leftCols(p) == d.paired_x && d.unpaired_y.leftCols(p) == d.paired_y;
}

/// Builds a dataset obeying the prefix convention from pairs plus extra marginal samples.
inline Dataset assemble_dataset(Mat paired_x, Mat paired_y, const Mat& extra_x, const Mat& extra_y) {
  Dataset d;
  d.unpaired_x.resize(paired_x.rows(), paired_x.cols() + extra_x.cols());
  d.unpaired_x << paired_x, extra_x;
  d.unpaired_y.resize(paired_y.rows(), paired_y.cols() + extra_y.cols());
  d.unpaired_y << paired_y, extra_y;
  d.paired_x = std::move(paired_x);
  d.paired_y = std::move(paired_y);
  return d;
}

/// Column indices for one mini-batch: all of 0..n-1 when size >= n, otherwise a
/// uniformly drawn subset without replacement.
inline std::vector<Eigen::Index> draw_batch(Rng& rng, Eigen::Index n, Eigen::Index size) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (size >= n) return idx;
  for (Eigen::Index i = 0; i < size; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(size));
  return idx;
}

inline Mat gather_cols(const Mat& m, const std::vector<Eigen::Index>& idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
  return out;
}

}  // namespace iot
