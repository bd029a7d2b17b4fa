#pragma once

#include <Eigen/Dense>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace iot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::domain_error(what);
}

inline void require_dims(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw std::domain_error(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                            " vs " + std::to_string(b) + ")");
  }
}

/// Flush subnormal results and operands to zero on this thread. Sharp mixtures push
/// responsibilities below 1e-308, and subnormal arithmetic is slow enough to double training time.
inline void flush_denormals() {
#if defined(__SSE2__)
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

/// Diagonal covariance stored by its log-diagonal, so positivity holds by construction.
struct DiagPSD {
  Vec log_diag;

  DiagPSD() = default;
  explicit DiagPSD(Vec log_diagonal) : log_diag(std::move(log_diagonal)) {}

  static DiagPSD from_variance(const Vec& variance) {
    return DiagPSD(variance.array().log().matrix());
  }
  static DiagPSD identity(Eigen::Index dim) { return DiagPSD(Vec::Zero(dim)); }

  Eigen::Index dim() const { return log_diag.size(); }
  Vec variance() const { return log_diag.array().exp().matrix(); }
};

/// log(sum(exp(v))) with a max shift.
inline double logsumexp(std::span<const double> values) {
  require(!values.empty(), "logsumexp: empty input");
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& values) {
  require(values.size() > 0, "logsumexp: empty input");
  const double hi = values.maxCoeff();
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log((values.derived().array() - hi).exp().sum());
}

/// Softmax weights matching logsumexp; written into `out`.
template <typename Derived>
Eigen::ArrayXd softmax(const Eigen::DenseBase<Derived>& values) {
  const double lse = logsumexp(values);
  Eigen::ArrayXd flat(values.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i) flat(k++) = std::exp(values(i, j) - lse);
  return flat;
}

/// log N(y | mean, diag(variance)) with variance = exp(log_var).
template <typename DY, typename DM, typename DV>
double gauss_logpdf_diag(const Eigen::MatrixBase<DY>& y, const Eigen::MatrixBase<DM>& mean,
                         const Eigen::MatrixBase<DV>& log_var) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double diff = y(j) - mean(j);
    acc += diff * diff * std::exp(-log_var(j)) + log_var(j) + kLog2Pi;
  }
  return -0.5 * acc;
}

inline double gauss_logpdf(const Vec& y, const Vec& mean, const DiagPSD& cov) {
  require_dims(y.size(), mean.size(), "gauss_logpdf");
  require_dims(y.size(), cov.dim(), "gauss_logpdf");
  return gauss_logpdf_diag(y, mean, cov.log_diag);
}

inline Vec standard_normal(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z(dim);
  for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rng);
  return z;
}

inline std::vector<Vec> gauss_sample(Rng& rng, const Vec& mean, const DiagPSD& cov, std::size_t n) {
  require_dims(mean.size(), cov.dim(), "gauss_sample");
  require(n >= 1, "gauss_sample: n must be >= 1");
  const Vec sd = (0.5 * cov.log_diag.array()).exp().matrix();
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(mean + sd.cwiseProduct(standard_normal(rng, mean.size())));
  return out;
}

/// Symmetric PSD square root by eigendecomposition; negative eigenvalues clamp to zero.
inline Mat psd_sqrt(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(s);
  if (eig.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

/// Tr(S1) + Tr(S2) - 2 Tr((S1^1/2 S2 S1^1/2)^1/2): the covariance part of the
/// squared Frechet distance between two Gaussians.
inline double psd_sqrt_trace_term(const Mat& s1, const Mat& s2) {
  require(s1.rows() == s1.cols() && s2.rows() == s2.cols(), "psd_sqrt_trace_term: non-square input");
  require_dims(s1.rows(), s2.rows(), "psd_sqrt_trace_term");
  constexpr double kSymTol = 1e-8;
  require((s1 - s1.transpose()).cwiseAbs().maxCoeff() <= kSymTol * std::max(1.0, s1.cwiseAbs().maxCoeff()),
          "psd_sqrt_trace_term: S1 is not symmetric");
  require((s2 - s2.transpose()).cwiseAbs().maxCoeff() <= kSymTol * std::max(1.0, s2.cwiseAbs().maxCoeff()),
          "psd_sqrt_trace_term: S2 is not symmetric");
  const Mat root1 = psd_sqrt(0.5 * (s1 + s1.transpose()));
  Mat inner = root1 * s2 * root1;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("psd_sqrt_trace_term: eigendecomposition failed");
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return s1.trace() + s2.trace() - 2.0 * cross;
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

/// Draw an index from unnormalized log-weights by inversion.
inline std::size_t sample_log_categorical(Rng& rng, std::span<const double> log_weights) {
  const double lse = logsumexp(log_weights);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - lse);
    if (u <= 0.0) return k;
  }
  return log_weights.size() - 1;
}

}  // namespace iot
