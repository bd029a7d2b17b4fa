#pragma once

#include "iot/adam.hpp"
#include "iot/cost.hpp"
#include "iot/dataset.hpp"
#include "iot/potential.hpp"

#include <chrono>
#include <optional>
#include <string>

namespace iot {

/// pi(y | x) as the Gaussian mixture sum_{mn} z_mn N(y | d_mn, eps B_n) / Z.
/// Component (m, n) lives in column m * N + n of `mean`.
struct ConditionalMixture {
  Mat log_z;    // M x N
  Mat mean;     // Dy x (M * N)
  Mat log_var;  // Dy x N, log(eps * diag B_n)
  double log_Z = 0.0;

  Eigen::Index heads() const { return log_z.rows(); }
  Eigen::Index components() const { return log_z.cols(); }
  Eigen::Index dim() const { return mean.rows(); }
  Eigen::Index column(Eigen::Index m, Eigen::Index n) const { return m * components() + n; }

  /// Mixture weights exp(log_z - log_Z), M x N.
  Mat weights() const { return (log_z.array() - log_Z).exp().matrix(); }
  Vec expected_value() const {
    const Mat w = weights();
    Vec mu = Vec::Zero(dim());
    for (Eigen::Index m = 0; m < heads(); ++m)
      for (Eigen::Index n = 0; n < components(); ++n) mu += w(m, n) * mean.col(column(m, n));
    return mu;
  }
};

/// Mixture table from explicit cost heads: `a` is Dy x M, `log_v` has M entries.
template <typename DA, typename DV>
ConditionalMixture build_conditional_from_heads(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& log_v,
                                                const PotentialParams& pot, double eps) {
  require(eps > 0.0, "build_conditional: eps must be positive");
  require_dims(a.rows(), pot.dim(), "build_conditional: heads");
  require_dims(a.cols(), log_v.size(), "build_conditional: log_v");
  const Eigen::Index m_count = a.cols(), n_count = pot.components();
  const Mat scale = pot.log_scale.array().exp().matrix();

  ConditionalMixture mix;
  const Mat quad = a.cwiseAbs2().transpose() * scale;  // a_m^T B_n a_m
  const Mat lin = a.transpose() * pot.center;          // b_n^T a_m
  mix.log_z = (quad + 2.0 * lin) / (2.0 * eps);
  mix.log_z.colwise() += log_v.derived();
  mix.log_z.rowwise() += pot.log_weight.transpose();

  mix.mean.resize(pot.dim(), m_count * n_count);
  for (Eigen::Index m = 0; m < m_count; ++m)
    for (Eigen::Index n = 0; n < n_count; ++n)
      mix.mean.col(m * n_count + n) = pot.center.col(n) + scale.col(n).cwiseProduct(a.col(m));
  mix.log_var = (pot.log_scale.array() + std::log(eps)).matrix();
  mix.log_Z = logsumexp(mix.log_z);
  return mix;
}

inline ConditionalMixture build_conditional(const CostParams& cost, const PotentialParams& pot, const Vec& x,
                                            double eps) {
  require_dims(x.size(), cost.x_dim(), "build_conditional: x");
  require_dims(cost.y_dim(), pot.dim(), "build_conditional: y dimension");
  const CostHeads h = cost_forward(cost, Mat(x));
  return build_conditional_from_heads(h.heads(0, cost.y_dim()), h.log_v(0), pot, eps);
}

namespace detail {

// log z_mn + log N(y | d_mn, eps B_n), shaped M x N.
inline Eigen::ArrayXXd joint_logits(const ConditionalMixture& mix, const Eigen::Ref<const Vec>& y) {
  const Eigen::Index mc = mix.heads(), nc = mix.components();
  const Eigen::ArrayXXd inv_var = (-mix.log_var.array()).exp();
  const Eigen::ArrayXd log_norm = -0.5 * (mix.log_var.array().colwise().sum().transpose() +
                                          static_cast<double>(mix.dim()) * kLog2Pi);
  Eigen::ArrayXXd out(mc, nc);
  for (Eigen::Index m = 0; m < mc; ++m) {
    const auto block = mix.mean.middleCols(m * nc, nc).array();
    const Eigen::ArrayXd maha =
        ((block.colwise() - y.array()).square() * inv_var).colwise().sum().transpose();
    out.row(m) = (mix.log_z.row(m).transpose().array() + log_norm - 0.5 * maha).transpose();
  }
  return out;
}

}  // namespace detail

inline double conditional_logpdf(const ConditionalMixture& mix, const Eigen::Ref<const Vec>& y) {
  require_dims(y.size(), mix.dim(), "conditional_logpdf");
  return logsumexp(detail::joint_logits(mix, y)) - mix.log_Z;
}

/// Exact sampling: pick (m, n) by weight, then draw from N(d_mn, eps B_n). Columns are samples.
inline Mat sample_conditional(const ConditionalMixture& mix, Rng& rng, Eigen::Index n) {
  require(n >= 0, "sample_conditional: negative count");
  const Eigen::ArrayXd w = (mix.log_z.array() - mix.log_Z).exp().reshaped<Eigen::RowMajor>();
  std::vector<double> cumulative(static_cast<std::size_t>(w.size()));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) cumulative[static_cast<std::size_t>(k)] = (acc += w(k));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat sd = (0.5 * mix.log_var.array()).exp().matrix();
  Mat out(mix.dim(), n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double u = unit(rng) * acc;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const auto k = static_cast<Eigen::Index>(it - cumulative.begin());
    const Eigen::Index comp = k % mix.components();
    for (Eigen::Index j = 0; j < mix.dim(); ++j) out(j, s) = mix.mean(j, k) + sd(j, comp) * normal(rng);
  }
  return out;
}

/// Upstream gradients on the entries of a ConditionalMixture table.
struct MixtureGradient {
  Mat log_z;    // M x N
  Mat mean;     // Dy x (M * N)
  Mat log_var;  // Dy x N

  static MixtureGradient zeros(const ConditionalMixture& mix) {
    return {Mat::Zero(mix.log_z.rows(), mix.log_z.cols()), Mat::Zero(mix.mean.rows(), mix.mean.cols()),
            Mat::Zero(mix.log_var.rows(), mix.log_var.cols())};
  }
};

/// Adds weight * d log Z / d table.
inline void accumulate_log_Z_grad(const ConditionalMixture& mix, double weight, MixtureGradient& g) {
  g.log_z.array() += weight * (mix.log_z.array() - mix.log_Z).exp();
}

/// Adds weight * d conditional_logpdf(y) / d table and returns the log-density.
inline double accumulate_logpdf_grad(const ConditionalMixture& mix, const Eigen::Ref<const Vec>& y, double weight,
                                     MixtureGradient& g) {
  const Eigen::ArrayXXd logits = detail::joint_logits(mix, y);
  const double lse = logsumexp(logits);
  const Eigen::ArrayXXd post = (logits - lse).exp();
  g.log_z.array() += weight * (post - (mix.log_z.array() - mix.log_Z).exp());
  const Eigen::Index nc = mix.components();
  const Eigen::ArrayXXd inv_var = (-mix.log_var.array()).exp();
  Eigen::ArrayXXd log_var_acc = Eigen::ArrayXXd::Zero(mix.dim(), nc);
  for (Eigen::Index m = 0; m < mix.heads(); ++m) {
    const Eigen::ArrayXXd scaled_diff = (-(mix.mean.middleCols(m * nc, nc).array().colwise() - y.array())) * inv_var;
    const Eigen::RowVectorXd r = weight * post.row(m).matrix();
    g.mean.middleCols(m * nc, nc).array() += scaled_diff.rowwise() * r.array();
    log_var_acc += (scaled_diff.square() / inv_var - 1.0).rowwise() * r.array();
  }
  g.log_var.array() += 0.5 * log_var_acc;
  return lse - mix.log_Z;
}

/// Pulls table gradients back to the cost heads (returned) and the potential (accumulated into `pot_grad`).
/// `grad_a` is Dy x M, `grad_log_v` has M entries.
template <typename DA>
void mixture_backward(const Eigen::MatrixBase<DA>& a, const PotentialParams& pot, double eps,
                      const MixtureGradient& g, Eigen::Ref<Mat> grad_a, Eigen::Ref<Vec> grad_log_v,
                      PotentialParams& pot_grad) {
  const Eigen::Index mc = a.cols(), nc = pot.components();
  const Mat scale = pot.log_scale.array().exp().matrix();
  // log z_mn = log w_n + log v_m + (a_m^T B_n a_m + 2 b_n^T a_m) / (2 eps)
  grad_a.noalias() += (pot.center * g.log_z.transpose() +
                       a.derived().cwiseProduct(scale * g.log_z.transpose())) / eps;
  grad_log_v += g.log_z.rowwise().sum();
  pot_grad.log_weight += g.log_z.colwise().sum().transpose();
  pot_grad.center.noalias() += a * g.log_z / eps;
  pot_grad.log_scale += scale.cwiseProduct(a.cwiseAbs2() * g.log_z) / (2.0 * eps);
  // d_mn = b_n + B_n a_m
  for (Eigen::Index m = 0; m < mc; ++m) {
    for (Eigen::Index n = 0; n < nc; ++n) {
      const auto gd = g.mean.col(m * nc + n);
      grad_a.col(m) += gd.cwiseProduct(scale.col(n));
      pot_grad.center.col(n) += gd;
      pot_grad.log_scale.col(n) += gd.cwiseProduct(scale.col(n)).cwiseProduct(a.col(m));
    }
  }
  // log var_n = log eps + log diag B_n
  pot_grad.log_scale += g.log_var;
}

/// Mini-batches for one loss evaluation; columns are samples.
struct LossBatch {
  Mat paired_x;
  Mat paired_y;
  Mat x;
  Mat y;
};

struct LossTerms {
  double paired = 0.0;  // eps^-1 mean c(x_p, y_p)
  double fy = 0.0;      // -eps^-1 mean f(y_r)
  double log_z = 0.0;   // mean log Z(x_q)
  double total() const { return paired + fy + log_z; }
};

/// Which loss terms contribute to the gradient. Used by tests and the gradcheck negative control.
struct TermMask {
  bool paired = true;
  bool fy = true;
  bool log_z = true;
};

struct LightGradient {
  CostParams cost;
  PotentialParams potential;

  Vec flatten() const {
    Vec out(cost.flatten().size() + static_cast<Eigen::Index>(potential.num_params()));
    out << cost.flatten(), potential.flatten();
    return out;
  }
};

struct LightModel {
  CostParams cost;
  PotentialParams potential;

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(cost.num_params() + potential.num_params()));
    out << cost.flatten(), potential.flatten();
    return out;
  }
  void assign(const Eigen::Ref<const Vec>& flat) {
    const auto nc = static_cast<Eigen::Index>(cost.num_params());
    cost.assign(flat.head(nc));
    potential.assign(flat.tail(flat.size() - nc));
  }
  ConditionalMixture conditional(const Vec& x, double eps) const { return build_conditional(cost, potential, x, eps); }
};

inline void check_batch(const LossBatch& b) {
  require(b.paired_x.cols() > 0, "loss: empty paired batch");
  require(b.x.cols() > 0, "loss: empty x batch");
  require(b.y.cols() > 0, "loss: empty y batch");
  require_dims(b.paired_x.cols(), b.paired_y.cols(), "loss: paired batch");
}

/// Empirical inverse-EOT likelihood loss.
inline LossTerms light_loss(const CostParams& cost, const PotentialParams& pot, const LossBatch& b, double eps) {
  require(eps > 0.0, "loss: eps must be positive");
  check_batch(b);
  const Eigen::Index dy = cost.y_dim();
  LossTerms t;
  const CostHeads hp = cost_forward(cost, b.paired_x);
  for (Eigen::Index p = 0; p < hp.size(); ++p)
    t.paired += cost_from_heads(hp.heads(p, dy), hp.log_v(p), b.paired_y.col(p), eps);
  t.paired /= eps * static_cast<double>(hp.size());
  for (Eigen::Index r = 0; r < b.y.cols(); ++r) t.fy -= eval_f(pot, b.y.col(r), eps);
  t.fy /= eps * static_cast<double>(b.y.cols());
  const CostHeads hq = cost_forward(cost, b.x);
  for (Eigen::Index q = 0; q < hq.size(); ++q)
    t.log_z += build_conditional_from_heads(hq.heads(q, dy), hq.log_v(q), pot, eps).log_Z;
  t.log_z /= static_cast<double>(hq.size());
  return t;
}

struct LightLossGrad {
  LossTerms terms;
  LightGradient grad;
};

/// Loss value and its exact gradient over every parameter group.
inline LightLossGrad light_loss_grad(const CostParams& cost, const PotentialParams& pot, const LossBatch& b,
                                     double eps, TermMask mask = {}) {
  require(eps > 0.0, "loss: eps must be positive");
  check_batch(b);
  const Eigen::Index dy = cost.y_dim(), mc = cost.heads();
  LightLossGrad out{{}, {cost.zeros_like(), pot.zeros_like()}};

  // paired term: eps^-1 mean c(x_p, y_p)
  {
    const CostHeads h = cost_forward(cost, b.paired_x);
    const double w = 1.0 / (eps * static_cast<double>(h.size()));
    Mat grad_a(dy * mc, h.size());
    Mat grad_v(mc, h.size());
    for (Eigen::Index p = 0; p < h.size(); ++p) {
      const auto a = h.heads(p, dy);
      const Vec y = b.paired_y.col(p);
      out.terms.paired += w * cost_from_heads(a, h.log_v(p), y, eps);
      const Eigen::ArrayXd rho = cost_responsibilities(a, h.log_v(p), y, eps);
      for (Eigen::Index m = 0; m < mc; ++m) grad_a.col(p).segment(m * dy, dy) = -w * rho(m) * y;
      grad_v.col(p) = (-w * eps) * rho.matrix();
    }
    if (mask.paired) out.grad.cost += cost_backward(cost, h, grad_a, grad_v);
  }

  // marginal term: -eps^-1 mean f(y_r)
  {
    const double w = -1.0 / (eps * static_cast<double>(b.y.cols()));
    PotentialParams acc = pot.zeros_like();
    for (Eigen::Index r = 0; r < b.y.cols(); ++r) {
      out.terms.fy += w * eval_f(pot, b.y.col(r), eps);
      accumulate_grad_f(pot, b.y.col(r), eps, w, acc);
    }
    if (mask.fy) out.grad.potential += acc;
  }

  // normalization term: mean log Z(x_q)
  {
    const CostHeads h = cost_forward(cost, b.x);
    const double w = 1.0 / static_cast<double>(h.size());
    Mat grad_a = Mat::Zero(dy * mc, h.size());
    Mat grad_v = Mat::Zero(mc, h.size());
    PotentialParams acc = pot.zeros_like();
    for (Eigen::Index q = 0; q < h.size(); ++q) {
      const auto a = h.heads(q, dy);
      const ConditionalMixture mix = build_conditional_from_heads(a, h.log_v(q), pot, eps);
      out.terms.log_z += w * mix.log_Z;
      MixtureGradient g = MixtureGradient::zeros(mix);
      accumulate_log_Z_grad(mix, w, g);
      Eigen::Map<Mat> ga_map(grad_a.col(q).data(), dy, mc);
      mixture_backward(a, pot, eps, g, ga_map, grad_v.col(q), acc);
    }
    if (mask.log_z) {
      out.grad.cost += cost_backward(cost, h, grad_a, grad_v);
      out.grad.potential += acc;
    }
  }
  return out;
}

/// Naive semi-supervised likelihood (CGMM-SS baseline):
/// -mean_p log pi(y_p|x_p) - mean_r [logsumexp_q log pi(y_r|x_q) - log Q].
struct NaiveTerms {
  double paired = 0.0;
  double marginal = 0.0;
  double total() const { return paired + marginal; }
};

namespace detail {

inline std::vector<ConditionalMixture> mixtures_for(const CostParams& cost, const PotentialParams& pot,
                                                    const CostHeads& h, double eps) {
  std::vector<ConditionalMixture> out;
  out.reserve(static_cast<std::size_t>(h.size()));
  for (Eigen::Index i = 0; i < h.size(); ++i)
    out.push_back(build_conditional_from_heads(h.heads(i, cost.y_dim()), h.log_v(i), pot, eps));
  return out;
}

}  // namespace detail

inline NaiveTerms naive_ss_terms(const CostParams& cost, const PotentialParams& pot, const LossBatch& b, double eps) {
  require(eps > 0.0, "naive_ss_loss: eps must be positive");
  check_batch(b);
  NaiveTerms t;
  const auto paired = detail::mixtures_for(cost, pot, cost_forward(cost, b.paired_x), eps);
  for (std::size_t p = 0; p < paired.size(); ++p)
    t.paired -= conditional_logpdf(paired[p], b.paired_y.col(static_cast<Eigen::Index>(p)));
  t.paired /= static_cast<double>(paired.size());
  const auto xs = detail::mixtures_for(cost, pot, cost_forward(cost, b.x), eps);
  const double log_q = std::log(static_cast<double>(xs.size()));
  Eigen::ArrayXd cl(static_cast<Eigen::Index>(xs.size()));
  for (Eigen::Index r = 0; r < b.y.cols(); ++r) {
    for (std::size_t q = 0; q < xs.size(); ++q) cl(static_cast<Eigen::Index>(q)) = conditional_logpdf(xs[q], b.y.col(r));
    t.marginal -= logsumexp(cl) - log_q;
  }
  t.marginal /= static_cast<double>(b.y.cols());
  return t;
}

inline double naive_ss_loss(const CostParams& cost, const PotentialParams& pot, const LossBatch& b, double eps) {
  return naive_ss_terms(cost, pot, b, eps).total();
}

struct NaiveLossGrad {
  NaiveTerms terms;
  LightGradient grad;
};

inline NaiveLossGrad naive_ss_loss_grad(const CostParams& cost, const PotentialParams& pot, const LossBatch& b,
                                        double eps) {
  require(eps > 0.0, "naive_ss_loss: eps must be positive");
  check_batch(b);
  const Eigen::Index dy = cost.y_dim(), mc = cost.heads();
  NaiveLossGrad out{{}, {cost.zeros_like(), pot.zeros_like()}};

  auto backprop = [&](const CostHeads& h, const std::vector<MixtureGradient>& grads) {
    Mat grad_a = Mat::Zero(dy * mc, h.size());
    Mat grad_v = Mat::Zero(mc, h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      Eigen::Map<Mat> ga_map(grad_a.col(i).data(), dy, mc);
      mixture_backward(h.heads(i, dy), pot, eps, grads[static_cast<std::size_t>(i)], ga_map, grad_v.col(i),
                       out.grad.potential);
    }
    out.grad.cost += cost_backward(cost, h, grad_a, grad_v);
  };

  {
    const CostHeads h = cost_forward(cost, b.paired_x);
    const auto mixes = detail::mixtures_for(cost, pot, h, eps);
    const double w = -1.0 / static_cast<double>(mixes.size());
    std::vector<MixtureGradient> grads;
    for (std::size_t p = 0; p < mixes.size(); ++p) {
      grads.push_back(MixtureGradient::zeros(mixes[p]));
      out.terms.paired += w * accumulate_logpdf_grad(mixes[p], b.paired_y.col(static_cast<Eigen::Index>(p)), w, grads.back());
    }
    backprop(h, grads);
  }
  {
    const CostHeads h = cost_forward(cost, b.x);
    const auto mixes = detail::mixtures_for(cost, pot, h, eps);
    std::vector<MixtureGradient> grads;
    for (const auto& mix : mixes) grads.push_back(MixtureGradient::zeros(mix));
    const double log_q = std::log(static_cast<double>(mixes.size()));
    const double w = -1.0 / static_cast<double>(b.y.cols());
    Eigen::ArrayXd cl(static_cast<Eigen::Index>(mixes.size()));
    for (Eigen::Index r = 0; r < b.y.cols(); ++r) {
      for (std::size_t q = 0; q < mixes.size(); ++q)
        cl(static_cast<Eigen::Index>(q)) = conditional_logpdf(mixes[q], b.y.col(r));
      const double lse = logsumexp(cl);
      out.terms.marginal += w * (lse - log_q);
      for (std::size_t q = 0; q < mixes.size(); ++q) {
        const double s = std::exp(cl(static_cast<Eigen::Index>(q)) - lse);
        if (s < 1e-300) continue;
        accumulate_logpdf_grad(mixes[q], b.y.col(r), w * s, grads[q]);
      }
    }
    backprop(h, grads);
  }
  return out;
}

/// Maps a model trained at eps to the model with identical conditionals at new_eps:
/// a -> (new_eps / eps) a, B -> (eps / new_eps) B.
inline LightModel rescale_eps(const LightModel& model, double eps, double new_eps) {
  require(eps > 0.0 && new_eps > 0.0, "rescale_eps: eps must be positive");
  LightModel out = model;
  const double ratio = new_eps / eps;
  out.cost.a_net.layers.back().weight *= ratio;
  out.cost.a_net.layers.back().bias *= ratio;
  out.potential.log_scale.array() -= std::log(ratio);
  return out;
}

enum class Objective { light, naive_ss };

inline std::string_view to_string(Objective o) { return o == Objective::light ? "light" : "naive_ss"; }

struct TrainConfig {
  double eps = 1.0;
  Eigen::Index heads = 25;       // M
  Eigen::Index components = 50;  // N
  CostArchitecture arch;
  double lr_paired = 3e-4;
  double lr_unpaired = 1e-3;
  long iters = 25000;
  Eigen::Index batch_paired = 128;
  Eigen::Index batch_x = 256;
  Eigen::Index batch_y = 256;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  Objective variant = Objective::light;
};

inline void validate(const TrainConfig& c) {
  require(c.eps > 0.0, "config: eps must be positive");
  require(c.lr_paired > 0.0 && c.lr_unpaired > 0.0, "config: learning rates must be positive");
  require(c.heads >= 1 && c.components >= 1, "config: M and N must be >= 1");
  require(c.iters >= 0, "config: iters must be >= 0");
  require(c.batch_paired >= 1 && c.batch_x >= 1 && c.batch_y >= 1, "config: batch sizes must be >= 1");
}

struct HistoryRow {
  long iteration = 0;
  double total = 0.0;
  double paired = 0.0;
  double fy = 0.0;
  double log_z = 0.0;
  double seconds = 0.0;
};
using History = std::vector<HistoryRow>;

struct Divergence {
  long iteration = 0;
  std::string term;
  double value = 0.0;

  std::string message() const {
    return "loss diverged at iteration " + std::to_string(iteration) + " (term " + term +
           " = " + std::to_string(value) + ")";
  }
};

inline constexpr double kDivergenceThreshold = 1e8;

/// Returns the first offending term, if any.
inline std::optional<Divergence> check_divergence(long it, std::initializer_list<std::pair<const char*, double>> terms) {
  double total = 0.0;
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceThreshold) return Divergence{it, name, v};
    total += v;
  }
  if (!std::isfinite(total) || std::abs(total) > kDivergenceThreshold) return Divergence{it, "total", total};
  return std::nullopt;
}

struct LightTrainResult {
  LightModel model;
  History history;
  std::optional<Divergence> divergence;
};

inline LightModel light_init(const TrainConfig& cfg, const Dataset& data, Rng& rng) {
  validate(cfg);
  LightModel m;
  m.cost = cost_init(data.x_dim(), data.y_dim(), cfg.heads, cfg.arch, rng);
  m.potential = potential_init(cfg.components, data.unpaired_y, rng);
  return m;
}

/// Adam on both parameter groups: lr_paired drives the cost, lr_unpaired the potential.
inline LightTrainResult train_light(const TrainConfig& cfg, const Dataset& data, LightModel init, Rng& rng) {
  validate(cfg);
  validate(data);
  require(data.num_paired() >= 1 && data.num_x() >= 1 && data.num_y() >= 1,
          "train: need at least one paired, one unpaired-x and one unpaired-y sample");
  LightTrainResult res{std::move(init), {}, std::nullopt};
  Vec cost_flat = res.model.cost.flatten();
  Vec pot_flat = res.model.potential.flatten();
  Adam cost_opt({cfg.lr_paired, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}, cost_flat.size());
  Adam pot_opt({cfg.lr_unpaired, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}, pot_flat.size());
  const auto start = std::chrono::steady_clock::now();
  res.history.reserve(static_cast<std::size_t>(cfg.iters));

  for (long it = 0; it < cfg.iters; ++it) {
    const auto ip = draw_batch(rng, data.num_paired(), cfg.batch_paired);
    const auto iq = draw_batch(rng, data.num_x(), cfg.batch_x);
    const auto ir = draw_batch(rng, data.num_y(), cfg.batch_y);
    const LossBatch batch{gather_cols(data.paired_x, ip), gather_cols(data.paired_y, ip),
                          gather_cols(data.unpaired_x, iq), gather_cols(data.unpaired_y, ir)};
    HistoryRow row;
    row.iteration = it;
    LightGradient grad;
    if (cfg.variant == Objective::light) {
      auto lg = light_loss_grad(res.model.cost, res.model.potential, batch, cfg.eps);
      row.paired = lg.terms.paired;
      row.fy = lg.terms.fy;
      row.log_z = lg.terms.log_z;
      grad = std::move(lg.grad);
    } else {
      auto lg = naive_ss_loss_grad(res.model.cost, res.model.potential, batch, cfg.eps);
      row.paired = lg.terms.paired;
      row.fy = lg.terms.marginal;
      grad = std::move(lg.grad);
    }
    row.total = row.paired + row.fy + row.log_z;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (auto d = check_divergence(it, {{"paired", row.paired}, {"fy", row.fy}, {"logZ", row.log_z}})) {
      res.divergence = d;
      return res;
    }
    res.history.push_back(row);
    cost_opt.step(cost_flat, grad.cost.flatten());
    pot_opt.step(pot_flat, grad.potential.flatten());
    res.model.cost.assign(cost_flat);
    res.model.potential.assign(pot_flat);
  }
  return res;
}

inline LightTrainResult train_light(const TrainConfig& cfg, const Dataset& data, Rng& rng) {
  LightModel init = light_init(cfg, data, rng);
  return train_light(cfg, data, std::move(init), rng);
}

}  // namespace iot
