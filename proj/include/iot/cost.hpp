#pragma once

#include "iot/mlp.hpp"

namespace iot {

/// Learnable cost c(x, y) = -eps * log sum_m v_m(x) exp(<a_m(x), y> / eps).
/// a_net maps x to the M heads a_m(x) stacked head-major (M * Dy outputs);
/// v_net ends in log_softmax and yields log v_m(x).
struct CostParams {
  MlpParams a_net;
  MlpParams v_net;

  Eigen::Index heads() const { return v_net.out_dim(); }
  Eigen::Index x_dim() const { return a_net.in_dim(); }
  Eigen::Index y_dim() const { return a_net.out_dim() / heads(); }
  std::size_t num_params() const { return a_net.num_params() + v_net.num_params(); }

  CostParams zeros_like() const { return {a_net.zeros_like(), v_net.zeros_like()}; }
  CostParams& operator+=(const CostParams& o) {
    a_net += o.a_net;
    v_net += o.v_net;
    return *this;
  }
  CostParams& operator*=(double s) {
    a_net *= s;
    v_net *= s;
    return *this;
  }

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(num_params()));
    out << a_net.flatten(), v_net.flatten();
    return out;
  }
  void assign(const Eigen::Ref<const Vec>& flat) {
    require_dims(flat.size(), static_cast<Eigen::Index>(num_params()), "CostParams::assign");
    const auto na = static_cast<Eigen::Index>(a_net.num_params());
    a_net.assign(flat.head(na));
    v_net.assign(flat.tail(flat.size() - na));
  }
};

struct CostArchitecture {
  std::vector<Eigen::Index> a_hidden{128, 128};
  std::vector<Eigen::Index> v_hidden{128};
};

inline void validate(const CostParams& c) {
  validate_spec(c.a_net.spec);
  validate_spec(c.v_net.spec);
  require(c.v_net.spec.back().activation == Activation::log_softmax, "cost: v_net must end in log_softmax");
  require_dims(c.a_net.in_dim(), c.v_net.in_dim(), "cost: a_net/v_net input");
  require(c.a_net.out_dim() % c.heads() == 0, "cost: a_net output is not a multiple of M");
}

inline CostParams cost_init(Eigen::Index x_dim, Eigen::Index y_dim, Eigen::Index heads,
                            const CostArchitecture& arch, Rng& rng) {
  require(heads >= 1, "cost_init: M must be >= 1");
  CostParams c;
  c.a_net = mlp_init(make_spec(x_dim, arch.a_hidden, heads * y_dim, Activation::relu, Activation::identity), rng);
  c.v_net = mlp_init(make_spec(x_dim, arch.v_hidden, heads, Activation::relu, Activation::log_softmax), rng);
  return c;
}

/// Network outputs for a batch of x (one per column) together with the caches for backprop.
struct CostHeads {
  ForwardCache a;
  ForwardCache v;

  Eigen::Index size() const { return a.output.cols(); }
  /// Dy x M matrix of heads for sample i.
  auto heads(Eigen::Index i, Eigen::Index y_dim) const {
    return a.output.col(i).reshaped(y_dim, a.output.rows() / y_dim);
  }
  auto log_v(Eigen::Index i) const { return v.output.col(i); }
};

inline CostHeads cost_forward(const CostParams& c, const Mat& xs) {
  return {mlp_forward(c.a_net, xs), mlp_forward(c.v_net, xs)};
}

/// Backprop of upstream gradients on the stacked heads (M*Dy x B) and log v (M x B).
inline CostParams cost_backward(const CostParams& c, const CostHeads& h, const Mat& grad_a, const Mat& grad_log_v) {
  return {mlp_backward(c.a_net, h.a, grad_a).grad, mlp_backward(c.v_net, h.v, grad_log_v).grad};
}

namespace detail {

template <typename DA, typename DV, typename DY>
Eigen::ArrayXd cost_logits(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& log_v,
                           const Eigen::MatrixBase<DY>& y, double eps) {
  return (log_v + (a.transpose() * y) / eps).array();
}

}  // namespace detail

/// Cost from precomputed heads.
template <typename DA, typename DV>
double cost_from_heads(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& log_v,
                       const Eigen::Ref<const Vec>& y, double eps) {
  return -eps * logsumexp(detail::cost_logits(a, log_v, y, eps));
}

inline double eval_c(const CostParams& c, const Vec& x, const Vec& y, double eps) {
  require(eps > 0.0, "eval_c: eps must be positive");
  require_dims(x.size(), c.x_dim(), "eval_c: x");
  require_dims(y.size(), c.y_dim(), "eval_c: y");
  const CostHeads h = cost_forward(c, Mat(x));
  return cost_from_heads(h.heads(0, c.y_dim()), h.log_v(0), y, eps);
}

/// Responsibilities rho_m(x, y) over the M cost terms.
template <typename DA, typename DV>
Eigen::ArrayXd cost_responsibilities(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& log_v,
                                     const Eigen::Ref<const Vec>& y, double eps) {
  const Eigen::ArrayXd logits = detail::cost_logits(a, log_v, y, eps);
  return (logits - logsumexp(logits)).exp();
}

struct CostGradient {
  CostParams params;
  Vec y;
};

inline CostGradient grad_c(const CostParams& c, const Vec& x, const Vec& y, double eps) {
  require(eps > 0.0, "grad_c: eps must be positive");
  require_dims(x.size(), c.x_dim(), "grad_c: x");
  require_dims(y.size(), c.y_dim(), "grad_c: y");
  const Eigen::Index dy = c.y_dim(), m = c.heads();
  const CostHeads h = cost_forward(c, Mat(x));
  const auto a = h.heads(0, dy);
  const Eigen::ArrayXd rho = cost_responsibilities(a, h.log_v(0), y, eps);
  Mat grad_a(dy * m, 1);
  for (Eigen::Index k = 0; k < m; ++k) grad_a.col(0).segment(k * dy, dy) = -rho(k) * y;
  const Mat grad_log_v = (-eps * rho).matrix();
  return {cost_backward(c, h, grad_a, grad_log_v), -(a * rho.matrix())};
}

}  // namespace iot
