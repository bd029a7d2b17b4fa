#pragma once

#include "iot/dataset.hpp"
#include "iot/numerics.hpp"

#include <functional>
#include <numbers>

namespace iot {

// Swiss roll parameter range and the scale that maps its outer turn to radius 2.25.
inline constexpr double kRollTMin = 1.5 * std::numbers::pi;
inline constexpr double kRollTMax = 4.5 * std::numbers::pi;
inline constexpr double kRollScale = 2.25 / kRollTMax;
inline constexpr double kRollNoise = 0.1;

struct SwissRoll {
  Mat points;  // 2 x n
  Vec t;       // spiral parameter per point
};

/// p = scale * (t cos t, t sin t) + noise, t ~ Uniform[1.5 pi, 4.5 pi].
inline SwissRoll swiss_roll_with_t(Eigen::Index n, double noise_std, Rng& rng) {
  require(n >= 1, "swiss_roll: n must be >= 1");
  require(noise_std >= 0.0, "swiss_roll: noise_std must be >= 0");
  std::uniform_real_distribution<double> unif(kRollTMin, kRollTMax);
  std::normal_distribution<double> normal(0.0, 1.0);
  SwissRoll out{Mat(2, n), Vec(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = unif(rng);
    out.t(i) = t;
    out.points(0, i) = kRollScale * t * std::cos(t);
    out.points(1, i) = kRollScale * t * std::sin(t);
    if (noise_std > 0.0) {
      out.points(0, i) += noise_std * normal(rng);
      out.points(1, i) += noise_std * normal(rng);
    }
  }
  return out;
}

inline Mat swiss_roll(Eigen::Index n, double noise_std, Rng& rng) { return swiss_roll_with_t(n, noise_std, rng).points; }

inline Mat gaussian_source(Eigen::Index n, Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat out(dim, n);
  for (auto& e : out.reshaped()) e = normal(rng);
  return out;
}

struct Coupling {
  Mat matrix;
  Vec row_marginal;
  Vec col_marginal;
  bool converged = false;
  int iterations = 0;
  double violation = 0.0;  // max abs deviation of row sums from a
};

/// Log-domain Sinkhorn for min <C, P> - reg H(P) subject to P 1 = a, P^T 1 = b.
/// On non-convergence the last iterate is returned with converged = false.
inline Coupling sinkhorn(const Mat& cost, const Vec& a, const Vec& b, double reg, int max_iters = 10000,
                         double tol = 1e-9) {
  require(reg > 0.0, "sinkhorn: reg must be positive");
  require(cost.rows() == a.size() && cost.cols() == b.size(), "sinkhorn: cost shape does not match marginals");
  require(a.minCoeff() > 0.0 && b.minCoeff() > 0.0, "sinkhorn: marginals must be positive");
  require(std::abs(a.sum() - 1.0) < 1e-9 && std::abs(b.sum() - 1.0) < 1e-9, "sinkhorn: marginals must sum to 1");
  const Eigen::ArrayXXd k = -cost.array() / reg;
  const Eigen::ArrayXd log_a = a.array().log(), log_b = b.array().log();
  Eigen::ArrayXd u = Eigen::ArrayXd::Zero(a.size()), v = Eigen::ArrayXd::Zero(b.size());
  Coupling out;
  auto plan = [&] { return ((k.colwise() + u).rowwise() + v.transpose()).exp().matrix(); };
  for (int it = 1; it <= max_iters; ++it) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = log_a(i) - logsumexp((k.row(i).transpose() + v).matrix());
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = log_b(j) - logsumexp((k.col(j) + u).matrix());
    out.iterations = it;
    // Columns are exact after the v update; the row sums carry the remaining error.
    out.violation = (plan().rowwise().sum() - a).cwiseAbs().maxCoeff();
    if (out.violation <= tol) {
      out.converged = true;
      break;
    }
  }
  out.matrix = plan();
  out.row_marginal = a;
  out.col_marginal = b;
  return out;
}

/// Max abs deviation of both marginals.
inline double marginal_violation(const Coupling& c) {
  return std::max((c.matrix.rowwise().sum() - c.row_marginal).cwiseAbs().maxCoeff(),
                  (c.matrix.colwise().sum().transpose() - c.col_marginal).cwiseAbs().maxCoeff());
}

inline Vec rotate2(const Vec& p, double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Vec{{c * p(0) - s * p(1), s * p(0) + c * p(1)}};
}

/// C_ij = min over +phi, -phi of |x_i - Rot(phi)(-y_j)|.
inline Mat rotation_cost(const Mat& xs, const Mat& ys, double phi_deg) {
  require(xs.rows() == 2 && ys.rows() == 2, "rotation_cost: 2D points only");
  const double rad = phi_deg * std::numbers::pi / 180.0;
  Mat plus(2, ys.cols()), minus(2, ys.cols());
  for (Eigen::Index j = 0; j < ys.cols(); ++j) {
    plus.col(j) = rotate2(-ys.col(j), rad);
    minus.col(j) = rotate2(-ys.col(j), -rad);
  }
  Mat c(xs.cols(), ys.cols());
  for (Eigen::Index i = 0; i < xs.cols(); ++i)
    for (Eigen::Index j = 0; j < ys.cols(); ++j)
      c(i, j) = std::min((xs.col(i) - plus.col(j)).norm(), (xs.col(i) - minus.col(j)).norm());
  return c;
}

/// Draws one (row, col) index pair with probability proportional to the plan entry.
inline std::pair<Eigen::Index, Eigen::Index> sample_coupling_index(const Mat& plan, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, plan.sum());
  double u = unif(rng), acc = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      acc += plan(i, j);
      if (u < acc) return {i, j};
    }
  return {plan.rows() - 1, plan.cols() - 1};
}

using Sampler = std::function<Mat(Eigen::Index, Rng&)>;
using CostFn = std::function<Mat(const Mat&, const Mat&)>;

struct OtPairs {
  Mat x;
  Mat y;
  int unconverged = 0;  // mini-batches whose Sinkhorn run hit max_iters
};

inline constexpr double kDataSinkhornReg = 0.05;

/// Per repetition: draw a mini-batch from each side, solve entropic OT on the max-normalized
/// cost with uniform marginals, then emit one pair sampled from the plan.
inline OtPairs minibatch_ot_pairs(const Sampler& source, const Sampler& target, const CostFn& cost, Eigen::Index reps,
                                  Rng& rng, Eigen::Index batch = 64, double reg = kDataSinkhornReg) {
  require(reps >= 1, "minibatch_ot_pairs: reps must be >= 1");
  require(batch >= 1, "minibatch_ot_pairs: batch must be >= 1");
  const Vec uniform = Vec::Constant(batch, 1.0 / static_cast<double>(batch));
  OtPairs out;
  for (Eigen::Index r = 0; r < reps; ++r) {
    const Mat xs = source(batch, rng), ys = target(batch, rng);
    if (r == 0) {
      out.x.resize(xs.rows(), reps);
      out.y.resize(ys.rows(), reps);
    }
    Mat c = cost(xs, ys);
    const double scale = c.maxCoeff();
    if (scale > 0.0) c /= scale;
    const Coupling plan = sinkhorn(c, uniform, uniform, reg);
    if (!plan.converged) ++out.unconverged;
    const auto [i, j] = sample_coupling_index(plan.matrix, rng);
    out.x.col(r) = xs.col(i);
    out.y.col(r) = ys.col(j);
  }
  return out;
}

inline OtPairs swiss_ot_pairs(Eigen::Index reps, Rng& rng) {
  return minibatch_ot_pairs([](Eigen::Index n, Rng& r) { return gaussian_source(n, 2, r); },
                            [](Eigen::Index n, Rng& r) { return swiss_roll(n, kRollNoise, r); },
                            [](const Mat& x, const Mat& y) { return rotation_cost(x, y, 90.0); }, reps, rng);
}

/// Draws from the pairing process conditioned on a given source point: x takes the first slot of
/// each source mini-batch and the partner is sampled from the plan's first row.
inline Mat swiss_conditional_samples(const Vec& x, Eigen::Index n, Rng& rng, Eigen::Index batch = 64) {
  require(x.size() == 2, "swiss_conditional_samples: x must be 2D");
  const Vec uniform = Vec::Constant(batch, 1.0 / static_cast<double>(batch));
  Mat out(2, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    Mat xs = gaussian_source(batch, 2, rng);
    xs.col(0) = x;
    const Mat ys = swiss_roll(batch, kRollNoise, rng);
    Mat c = rotation_cost(xs, ys, 90.0);
    c /= c.maxCoeff();
    const Coupling plan = sinkhorn(c, uniform, uniform, kDataSinkhornReg);
    const Mat row = plan.matrix.row(0);
    out.col(s) = ys.col(sample_coupling_index(row, rng).second);
  }
  return out;
}

/// Gaussian source to Swiss roll with the rotation cost; P pairs, Q - P and R - P extra marginal draws.
inline Dataset make_swiss_dataset(Eigen::Index p, Eigen::Index q, Eigen::Index r, Rng& rng) {
  require(p >= 1, "make_swiss_dataset: P must be >= 1");
  require(p <= q && p <= r, "make_swiss_dataset: P must not exceed Q or R");
  OtPairs pairs = swiss_ot_pairs(p, rng);
  const Mat extra_x = q > p ? gaussian_source(q - p, 2, rng) : Mat(2, 0);
  const Mat extra_y = r > p ? swiss_roll(r - p, kRollNoise, rng) : Mat(2, 0);
  return assemble_dataset(std::move(pairs.x), std::move(pairs.y), extra_x, extra_y);
}

/// Ground-truth conditional inside the Gaussian-mixture family:
/// a_m(x) = A_m x + c_m, constant head weights v, potential mixture (w, b, diag B).
struct RecoverableTask {
  double eps = 1.0;
  std::vector<Mat> a_matrix;  // M of Dy x Dx
  std::vector<Vec> a_offset;  // M of Dy
  Vec log_v;                  // M
  Vec log_w;                  // N
  Mat center;                 // Dy x N
  Mat log_scale;              // Dy x N

  Eigen::Index heads() const { return log_v.size(); }
  Eigen::Index components() const { return log_w.size(); }
  Eigen::Index x_dim() const { return a_matrix.front().cols(); }
  Eigen::Index y_dim() const { return center.rows(); }

  struct Mixture {
    Vec log_weight;  // normalized, M*N entries, index m*N + n
    Mat mean;        // Dy x M*N
    Mat variance;    // Dy x M*N
  };

  /// Exact conditional pi(.|x) as an explicit mixture.
  Mixture conditional(const Vec& x) const {
    const Eigen::Index mc = heads(), nc = components(), dy = y_dim();
    Mixture mix{Vec(mc * nc), Mat(dy, mc * nc), Mat(dy, mc * nc)};
    for (Eigen::Index m = 0; m < mc; ++m) {
      const Vec a = a_matrix[static_cast<std::size_t>(m)] * x + a_offset[static_cast<std::size_t>(m)];
      for (Eigen::Index n = 0; n < nc; ++n) {
        const Vec scale = log_scale.col(n).array().exp();
        const Eigen::Index k = m * nc + n;
        mix.log_weight(k) =
            log_w(n) + log_v(m) + (a.dot(scale.cwiseProduct(a)) + 2.0 * center.col(n).dot(a)) / (2.0 * eps);
        mix.mean.col(k) = center.col(n) + scale.cwiseProduct(a);
        mix.variance.col(k) = eps * scale;
      }
    }
    mix.log_weight.array() -= logsumexp(mix.log_weight);
    return mix;
  }

  double log_density(const Vec& x, const Vec& y) const {
    const Mixture mix = conditional(x);
    Vec terms(mix.log_weight.size());
    for (Eigen::Index k = 0; k < terms.size(); ++k)
      terms(k) = mix.log_weight(k) + gauss_logpdf_diag(y, mix.mean.col(k), mix.variance.col(k).array().log().matrix());
    return logsumexp(terms);
  }

  Mat sample(const Vec& x, Eigen::Index n, Rng& rng) const {
    const Mixture mix = conditional(x);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat out(y_dim(), n);
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto k = static_cast<Eigen::Index>(
          sample_log_categorical(rng, std::span<const double>(mix.log_weight.data(), mix.log_weight.size())));
      for (Eigen::Index j = 0; j < y_dim(); ++j)
        out(j, s) = mix.mean(j, k) + std::sqrt(mix.variance(j, k)) * normal(rng);
    }
    return out;
  }
};

/// The fixed 2D oracle used by the recovery experiments: two heads, two components.
inline RecoverableTask default_recoverable_task() {
  RecoverableTask t;
  t.eps = 1.0;
  t.a_matrix = {Mat{{1.5, 0.0}, {0.0, 1.5}}, Mat{{0.0, -1.5}, {1.5, 0.0}}};
  t.a_offset = {Vec{{0.0, 1.0}}, Vec{{-1.0, 0.0}}};
  t.log_v = Vec{{std::log(0.5), std::log(0.5)}};
  t.log_w = Vec{{std::log(0.6), std::log(0.4)}};
  t.center = Mat{{-1.0, 1.0}, {0.0, 0.5}};
  t.log_scale = Mat{{std::log(0.25), std::log(0.16)}, {std::log(0.16), std::log(0.25)}};
  return t;
}

struct RecoverableData {
  Dataset data;
  RecoverableTask task;
};

/// x ~ N(0, I); paired y drawn exactly from the oracle conditional.
inline RecoverableData make_recoverable_dataset(Eigen::Index p, Eigen::Index q, Eigen::Index r, Rng& rng,
                                                const RecoverableTask& task = default_recoverable_task()) {
  require(p >= 1, "make_recoverable_dataset: P must be >= 1");
  require(p <= q && p <= r, "make_recoverable_dataset: P must not exceed Q or R");
  const Eigen::Index dx = task.x_dim(), dy = task.y_dim();
  Mat px = gaussian_source(p, dx, rng);
  Mat py(dy, p);
  for (Eigen::Index i = 0; i < p; ++i) py.col(i) = task.sample(px.col(i), 1, rng);
  const Mat extra_x = gaussian_source(q - p, dx, rng);
  // Unpaired y follow the y-marginal: fresh x, then y | x.
  const Mat hidden_x = gaussian_source(r - p, dx, rng);
  Mat extra_y(dy, r - p);
  for (Eigen::Index i = 0; i < r - p; ++i) extra_y.col(i) = task.sample(hidden_x.col(i), 1, rng);
  return {assemble_dataset(std::move(px), std::move(py), extra_x, extra_y), task};
}

}  // namespace iot
