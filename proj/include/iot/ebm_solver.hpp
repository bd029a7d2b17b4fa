#pragma once

#include "iot/adam.hpp"
#include "iot/dataset.hpp"
#include "iot/light_solver.hpp"
#include "iot/mlp.hpp"

#include <stdexcept>

namespace iot {

/// Energy-based conditional model: pi(y|x) proportional to exp((f(y) - c(x, y)) / eps).
/// c_net takes the stacked input [x; y].
struct EbmModel {
  MlpParams f_net;  // Dy -> 1
  MlpParams c_net;  // Dx + Dy -> 1
  double eps = 1.0;

  Eigen::Index y_dim() const { return f_net.in_dim(); }
  Eigen::Index x_dim() const { return c_net.in_dim() - f_net.in_dim(); }

  Vec flatten() const {
    Vec f = f_net.flatten(), c = c_net.flatten();
    Vec out(f.size() + c.size());
    out << f, c;
    return out;
  }
  void assign(const Eigen::Ref<const Vec>& flat) {
    const auto nf = static_cast<Eigen::Index>(f_net.num_params());
    require(flat.size() == nf + static_cast<Eigen::Index>(c_net.num_params()), "ebm: flat size mismatch");
    f_net.assign(flat.head(nf));
    c_net.assign(flat.tail(flat.size() - nf));
  }
};

inline void validate(const EbmModel& m) {
  require(m.f_net.out_dim() == 1 && m.c_net.out_dim() == 1, "ebm: f_net and c_net must have scalar output");
  require(m.c_net.in_dim() > m.f_net.in_dim(), "ebm: c_net input must be [x; y]");
  require(m.eps > 0.0, "ebm: eps must be positive");
}

struct EbmArchitecture {
  std::vector<Eigen::Index> f_hidden{128, 128};
  std::vector<Eigen::Index> c_hidden{256, 256, 256};
  double slope = 0.2;  // LeakyReLU
};

inline EbmModel ebm_init(Eigen::Index x_dim, Eigen::Index y_dim, double eps, const EbmArchitecture& arch, Rng& rng) {
  EbmModel m;
  m.f_net = mlp_init(make_spec(y_dim, arch.f_hidden, 1, Activation::leaky_relu, Activation::identity, arch.slope), rng);
  m.c_net = mlp_init(
      make_spec(x_dim + y_dim, arch.c_hidden, 1, Activation::leaky_relu, Activation::identity, arch.slope), rng);
  m.eps = eps;
  return m;
}

namespace detail {

inline Mat stack_xy(const Mat& xs, const Mat& ys) {
  require(xs.cols() == ys.cols(), "ebm: x and y batch sizes differ");
  Mat xy(xs.rows() + ys.rows(), xs.cols());
  xy << xs, ys;
  return xy;
}

}  // namespace detail

/// (c(x, y) - f(y)) / eps
inline double energy(const EbmModel& m, const Vec& x, const Vec& y) {
  require_dims(x.size(), m.x_dim(), "energy: x");
  require_dims(y.size(), m.y_dim(), "energy: y");
  const double f = mlp_apply(m.f_net, Mat(y))(0, 0);
  const double c = mlp_apply(m.c_net, detail::stack_xy(Mat(x), Mat(y)))(0, 0);
  return (c - f) / m.eps;
}

/// Column-wise gradient of the energy with respect to y.
inline Mat energy_grad_y(const EbmModel& m, const Mat& xs, const Mat& ys) {
  const ForwardCache fc = mlp_forward(m.f_net, ys);
  const ForwardCache cc = mlp_forward(m.c_net, detail::stack_xy(xs, ys));
  const Mat ones = Mat::Ones(1, ys.cols());
  const Mat gf = mlp_backward(m.f_net, fc, ones, false).grad_input;
  const Mat gc = mlp_backward(m.c_net, cc, ones, false).grad_input.bottomRows(ys.rows());
  return (gc - gf) / m.eps;
}

struct LangevinConfig {
  int steps = 100;     // K
  double eta = 0.01;   // step size
  double sigma0 = 1.0; // std of the initial noise
  bool noise = true;   // off: plain gradient descent on the energy
};

inline void validate(const LangevinConfig& c) {
  require(c.steps >= 1, "langevin: K must be >= 1");
  require(c.eta > 0.0, "langevin: eta must be positive");
  require(c.sigma0 > 0.0, "langevin: sigma0 must be positive");
}

/// Thrown when a chain leaves the finite range.
class ChainDivergence : public std::runtime_error {
 public:
  explicit ChainDivergence(int step)
      : std::runtime_error("langevin iterate became non-finite at step " + std::to_string(step)), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Unadjusted Langevin iterations y <- y - (eta / 2) grad_y E(x, y) + sqrt(eta) z, one chain per column.
/// grad_energy(xs, ys) returns the column-wise energy gradient.
template <typename GradFn>
Mat langevin(const GradFn& grad_energy, const Mat& xs, Mat y, const LangevinConfig& cfg, Rng& rng) {
  validate(cfg);
  require(xs.cols() == y.cols(), "ula: one start point per x");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_scale = std::sqrt(cfg.eta);
  for (int k = 1; k <= cfg.steps; ++k) {
    y -= (0.5 * cfg.eta) * grad_energy(xs, y);
    if (cfg.noise)
      for (auto& e : y.reshaped()) e += noise_scale * normal(rng);
    if (!y.allFinite()) throw ChainDivergence(k);
  }
  return y;
}

inline Mat ula_chains(const EbmModel& m, const Mat& xs, Mat y0, const LangevinConfig& cfg, Rng& rng) {
  require_dims(xs.rows(), m.x_dim(), "ula: x");
  require_dims(y0.rows(), m.y_dim(), "ula: y");
  return langevin([&](const Mat& x, const Mat& y) { return energy_grad_y(m, x, y); }, xs, std::move(y0), cfg, rng);
}

inline Vec ula_chain(const EbmModel& m, const Vec& x, const Vec& y0, const LangevinConfig& cfg, Rng& rng) {
  return ula_chains(m, Mat(x), Mat(y0), cfg, rng).col(0);
}

/// Model samples with weights; the weights define the expectation over pi(y|x) in the gradient.
/// Monte-Carlo chains carry uniform weights; quadrature callers pass their own.
struct WeightedSamples {
  Mat x;
  Mat y;
  Vec weight;  // sums to one
};

inline WeightedSamples draw_model_samples(const EbmModel& m, const Mat& xs, const LangevinConfig& cfg, Rng& rng) {
  validate(cfg);
  std::normal_distribution<double> normal(0.0, cfg.sigma0);
  Mat y0(m.y_dim(), xs.cols());
  for (auto& e : y0.reshaped()) e = normal(rng);
  Mat ys = ula_chains(m, xs, std::move(y0), cfg, rng);
  return {xs, std::move(ys), Vec::Constant(xs.cols(), 1.0 / static_cast<double>(xs.cols()))};
}

/// Midpoint-grid stand-in for the model expectation when Dy = 1: every x gets all n cells
/// of [lo, hi], weighted by the normalized grid density, plus log Z(x) by the same rule.
struct QuadratureSamples {
  WeightedSamples samples;
  Vec log_z;
};

inline QuadratureSamples quadrature_samples_1d(const EbmModel& m, const Mat& xs, double lo, double hi, int n) {
  require(m.y_dim() == 1, "quadrature_samples_1d: Dy must be 1");
  require(n >= 1 && hi > lo, "quadrature_samples_1d: bad grid");
  const double h = (hi - lo) / n;
  Mat grid(1, n);
  for (int g = 0; g < n; ++g) grid(0, g) = lo + (g + 0.5) * h;
  const Eigen::Index q = xs.cols();
  QuadratureSamples out{{Mat(xs.rows(), q * n), Mat(1, q * n), Vec(q * n)}, Vec(q)};
  const Mat f = mlp_apply(m.f_net, grid);
  for (Eigen::Index i = 0; i < q; ++i) {
    const Mat rep = xs.col(i).replicate(1, n);
    const Mat c = mlp_apply(m.c_net, detail::stack_xy(rep, grid));
    const Vec logits = ((f - c) / m.eps).transpose();
    const double lse = logsumexp(logits);
    out.log_z(i) = lse + std::log(h);
    out.samples.x.middleCols(i * n, n) = rep;
    out.samples.y.middleCols(i * n, n) = grid;
    out.samples.weight.segment(i * n, n) = (logits.array() - lse).exp() / static_cast<double>(q);
  }
  return out;
}

/// Surrogate loss terms whose parameter gradient is the three-term estimator:
/// paired = mean c / eps, fy = -mean f / eps, model = sum_s w_s (f - c)(x_s, y_s) / eps.
struct EbmTerms {
  double paired = 0.0;
  double fy = 0.0;
  double model = 0.0;
  double total() const { return paired + fy + model; }
};

struct EbmGradient {
  MlpParams f_net;
  MlpParams c_net;
  Vec flatten() const {
    Vec f = f_net.flatten(), c = c_net.flatten();
    Vec out(f.size() + c.size());
    out << f, c;
    return out;
  }
};

struct EbmLossGrad {
  EbmTerms terms;
  EbmGradient grad;
};

/// Samples are treated as constants: no gradient flows through the chain.
inline EbmLossGrad ebm_loss_grad(const EbmModel& m, const Mat& paired_x, const Mat& paired_y, const Mat& y_batch,
                                 const WeightedSamples& samples) {
  validate(m);
  require(paired_x.cols() >= 1 && y_batch.cols() >= 1 && samples.y.cols() >= 1, "ebm loss: empty batch");
  require(samples.weight.size() == samples.y.cols(), "ebm loss: one weight per sample");
  const double inv_eps = 1.0 / m.eps;
  EbmLossGrad out;

  const double inv_p = 1.0 / static_cast<double>(paired_x.cols());
  const ForwardCache cp = mlp_forward(m.c_net, detail::stack_xy(paired_x, paired_y));
  out.terms.paired = inv_eps * cp.output.sum() * inv_p;
  out.grad.c_net = mlp_backward(m.c_net, cp, Mat(Mat::Constant(1, paired_x.cols(), inv_eps * inv_p))).grad;

  const double inv_r = 1.0 / static_cast<double>(y_batch.cols());
  const ForwardCache fr = mlp_forward(m.f_net, y_batch);
  out.terms.fy = -inv_eps * fr.output.sum() * inv_r;
  out.grad.f_net = mlp_backward(m.f_net, fr, Mat(Mat::Constant(1, y_batch.cols(), -inv_eps * inv_r))).grad;

  const Mat w = inv_eps * samples.weight.transpose();
  const ForwardCache fs = mlp_forward(m.f_net, samples.y);
  const ForwardCache cs = mlp_forward(m.c_net, detail::stack_xy(samples.x, samples.y));
  out.terms.model = (w.array() * (fs.output - cs.output).array()).sum();
  out.grad.f_net += mlp_backward(m.f_net, fs, w).grad;
  out.grad.c_net += mlp_backward(m.c_net, cs, Mat(-w)).grad;
  return out;
}

inline EbmLossGrad ebm_loss_grad(const EbmModel& m, const LossBatch& b, const LangevinConfig& cfg, Rng& rng) {
  check_batch(b);
  const WeightedSamples s = draw_model_samples(m, b.x, cfg, rng);
  return ebm_loss_grad(m, b.paired_x, b.paired_y, b.y, s);
}

struct EbmConfig {
  double eps = 1.0;
  EbmArchitecture arch;
  LangevinConfig langevin;
  double lr_paired = 5e-4;
  double lr_unpaired = 2e-4;
  long iters = 10000;
  Eigen::Index batch_paired = 128;
  Eigen::Index batch_x = 128;
  Eigen::Index batch_y = 128;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

inline void validate(const EbmConfig& c) {
  require(c.eps > 0.0, "config: eps must be positive");
  require(c.lr_paired > 0.0 && c.lr_unpaired > 0.0, "config: learning rates must be positive");
  require(c.iters >= 0, "config: iters must be >= 0");
  require(c.batch_paired >= 1 && c.batch_x >= 1 && c.batch_y >= 1, "config: batch sizes must be >= 1");
  validate(c.langevin);
}

struct EbmTrainResult {
  EbmModel model;
  History history;  // the log_z column holds the model-sample term
  std::optional<Divergence> divergence;
};

/// Adam on both nets: lr_paired drives c_net, lr_unpaired drives f_net.
inline EbmTrainResult train_ebm(const EbmConfig& cfg, const Dataset& data, EbmModel init, Rng& rng) {
  validate(cfg);
  validate(data);
  validate(init);
  require(data.num_paired() >= 1 && data.num_x() >= 1 && data.num_y() >= 1,
          "train: need at least one paired, one unpaired-x and one unpaired-y sample");
  EbmTrainResult res{std::move(init), {}, std::nullopt};
  Vec f_flat = res.model.f_net.flatten();
  Vec c_flat = res.model.c_net.flatten();
  Adam c_opt({cfg.lr_paired, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}, c_flat.size());
  Adam f_opt({cfg.lr_unpaired, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}, f_flat.size());
  const auto start = std::chrono::steady_clock::now();
  res.history.reserve(static_cast<std::size_t>(cfg.iters));

  for (long it = 0; it < cfg.iters; ++it) {
    const auto ip = draw_batch(rng, data.num_paired(), cfg.batch_paired);
    const auto iq = draw_batch(rng, data.num_x(), cfg.batch_x);
    const auto ir = draw_batch(rng, data.num_y(), cfg.batch_y);
    const LossBatch batch{gather_cols(data.paired_x, ip), gather_cols(data.paired_y, ip),
                          gather_cols(data.unpaired_x, iq), gather_cols(data.unpaired_y, ir)};
    EbmLossGrad lg;
    try {
      lg = ebm_loss_grad(res.model, batch, cfg.langevin, rng);
    } catch (const ChainDivergence& e) {
      res.divergence = Divergence{it, "model", std::numeric_limits<double>::quiet_NaN()};
      return res;
    }
    HistoryRow row{it, lg.terms.total(), lg.terms.paired, lg.terms.fy, lg.terms.model, 0.0};
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (auto d = check_divergence(it, {{"paired", row.paired}, {"fy", row.fy}, {"model", row.log_z}})) {
      res.divergence = d;
      return res;
    }
    res.history.push_back(row);
    c_opt.step(c_flat, lg.grad.c_net.flatten());
    f_opt.step(f_flat, lg.grad.f_net.flatten());
    res.model.c_net.assign(c_flat);
    res.model.f_net.assign(f_flat);
  }
  return res;
}

inline EbmTrainResult train_ebm(const EbmConfig& cfg, const Dataset& data, Rng& rng) {
  EbmModel init = ebm_init(data.x_dim(), data.y_dim(), cfg.eps, cfg.arch, rng);
  return train_ebm(cfg, data, std::move(init), rng);
}

/// Conditional samples for each column of xs (n per x, grouped by x).
inline Mat ebm_sample(const EbmModel& m, const Mat& xs, Eigen::Index n, const LangevinConfig& cfg, Rng& rng) {
  require(n >= 0, "ebm_sample: n must be >= 0");
  if (n == 0 || xs.cols() == 0) return Mat(m.y_dim(), 0);
  Mat rep(xs.rows(), xs.cols() * n);
  for (Eigen::Index i = 0; i < xs.cols(); ++i) rep.middleCols(i * n, n) = xs.col(i).replicate(1, n);
  return draw_model_samples(m, rep, cfg, rng).y;
}

}  // namespace iot
