#pragma once

#include "iot/numerics.hpp"

namespace iot {

/// Dual potential f(y) = eps * log sum_n w_n N(y | b_n, eps B_n) with diagonal B_n.
/// Doubles as the gradient container for its own parameters.
struct PotentialParams {
  Vec log_weight;  // N, unnormalized
  Mat center;      // Dy x N
  Mat log_scale;   // Dy x N, log diag(B_n)

  Eigen::Index components() const { return log_weight.size(); }
  Eigen::Index dim() const { return center.rows(); }
  std::size_t num_params() const {
    return static_cast<std::size_t>(log_weight.size() + center.size() + log_scale.size());
  }

  PotentialParams zeros_like() const {
    return {Vec::Zero(log_weight.size()), Mat::Zero(center.rows(), center.cols()),
            Mat::Zero(log_scale.rows(), log_scale.cols())};
  }

  PotentialParams& operator+=(const PotentialParams& o) {
    log_weight += o.log_weight;
    center += o.center;
    log_scale += o.log_scale;
    return *this;
  }
  PotentialParams& operator*=(double s) {
    log_weight *= s;
    center *= s;
    log_scale *= s;
    return *this;
  }

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(num_params()));
    out << log_weight, center.reshaped(), log_scale.reshaped();
    return out;
  }
  void assign(const Eigen::Ref<const Vec>& flat) {
    require_dims(flat.size(), static_cast<Eigen::Index>(num_params()), "PotentialParams::assign");
    const Eigen::Index n = log_weight.size(), c = center.size();
    log_weight = flat.head(n);
    center.reshaped() = flat.segment(n, c);
    log_scale.reshaped() = flat.segment(n + c, log_scale.size());
  }
};

inline void validate(const PotentialParams& p) {
  require(p.components() >= 1, "potential: need at least one component");
  require_dims(p.center.cols(), p.components(), "potential: centers");
  require(p.log_scale.rows() == p.center.rows() && p.log_scale.cols() == p.center.cols(),
          "potential: log_scale shape mismatch");
}

/// log w_n = log(1/N), centers drawn from target samples, log diag B_n = log 0.1.
inline PotentialParams potential_init(Eigen::Index components, const Mat& target_samples, Rng& rng) {
  require(components >= 1, "potential_init: components must be >= 1");
  require(target_samples.cols() >= 1, "potential_init: no target samples");
  const Eigen::Index dim = target_samples.rows();
  PotentialParams p;
  p.log_weight = Vec::Constant(components, -std::log(static_cast<double>(components)));
  p.center.resize(dim, components);
  std::uniform_int_distribution<Eigen::Index> pick(0, target_samples.cols() - 1);
  for (Eigen::Index n = 0; n < components; ++n) p.center.col(n) = target_samples.col(pick(rng));
  p.log_scale = Mat::Constant(dim, components, std::log(0.1));
  return p;
}

namespace detail {

// log w_n + log N(y | b_n, eps B_n) for every n.
inline Eigen::ArrayXd potential_component_logits(const PotentialParams& p, const Eigen::Ref<const Vec>& y,
                                                 double eps) {
  const double log_eps = std::log(eps);
  Eigen::ArrayXd logits(p.components());
  for (Eigen::Index n = 0; n < p.components(); ++n) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.dim(); ++j) {
      const double lv = log_eps + p.log_scale(j, n);
      const double diff = y(j) - p.center(j, n);
      acc += diff * diff * std::exp(-lv) + lv + kLog2Pi;
    }
    logits(n) = p.log_weight(n) - 0.5 * acc;
  }
  return logits;
}

inline void check_eps(double eps) { require(eps > 0.0 && std::isfinite(eps), "eps must be positive"); }

}  // namespace detail

inline double eval_f(const PotentialParams& p, const Eigen::Ref<const Vec>& y, double eps) {
  detail::check_eps(eps);
  require_dims(y.size(), p.dim(), "eval_f");
  return eps * logsumexp(detail::potential_component_logits(p, y, eps));
}

struct PotentialGradient {
  PotentialParams params;
  Vec y;
};

/// Accumulates `weight * d f(y) / d params` into `acc` and returns d f / d y.
inline Vec accumulate_grad_f(const PotentialParams& p, const Eigen::Ref<const Vec>& y, double eps, double weight,
                             PotentialParams& acc) {
  detail::check_eps(eps);
  require_dims(y.size(), p.dim(), "grad_f");
  const Eigen::ArrayXd logits = detail::potential_component_logits(p, y, eps);
  const Eigen::ArrayXd r = (logits - logsumexp(logits)).exp();
  Vec gy = Vec::Zero(p.dim());
  for (Eigen::Index n = 0; n < p.components(); ++n) {
    acc.log_weight(n) += weight * eps * r(n);
    for (Eigen::Index j = 0; j < p.dim(); ++j) {
      const double inv_b = std::exp(-p.log_scale(j, n));
      const double diff = y(j) - p.center(j, n);
      acc.center(j, n) += weight * r(n) * diff * inv_b;
      acc.log_scale(j, n) += weight * 0.5 * r(n) * (diff * diff * inv_b - eps);
      gy(j) -= r(n) * diff * inv_b;
    }
  }
  return gy;
}

inline PotentialGradient grad_f(const PotentialParams& p, const Eigen::Ref<const Vec>& y, double eps) {
  PotentialGradient g{p.zeros_like(), {}};
  g.y = accumulate_grad_f(p, y, eps, 1.0, g.params);
  return g;
}

}  // namespace iot
