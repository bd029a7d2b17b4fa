#pragma once

#include "iot/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <functional>
#include <algorithm>
#include <numeric>
#include <numbers>

namespace iot {

struct MeanEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  Eigen::Index n = 0;
};

using ConditionalLogpdf = std::function<double(const Vec& x, const Vec& y)>;

/// Mean conditional log-density over test pairs (columns of xs, ys).
inline MeanEstimate test_log_likelihood(const ConditionalLogpdf& logpdf, const Mat& xs, const Mat& ys) {
  require(xs.cols() == ys.cols(), "test_log_likelihood: x and y counts differ");
  require(xs.cols() >= 1, "test_log_likelihood: empty test set");
  const Eigen::Index n = xs.cols();
  Vec ll(n);
  for (Eigen::Index i = 0; i < n; ++i) ll(i) = logpdf(xs.col(i), ys.col(i));
  MeanEstimate out{ll.mean(), 0.0, n};
  if (n > 1) out.stderr_ = std::sqrt((ll.array() - out.value).square().sum() / static_cast<double>(n - 1) / n);
  return out;
}

struct Moments {
  Vec mean;
  Mat cov;
};

/// Sample mean and unbiased covariance of the columns.
inline Moments sample_moments(const Mat& samples) {
  require(samples.cols() >= 2, "sample_moments: need at least two samples");
  Moments m;
  m.mean = samples.rowwise().mean();
  const Mat centered = samples.colwise() - m.mean;
  m.cov = centered * centered.transpose() / static_cast<double>(samples.cols() - 1);
  return m;
}

/// Squared Frechet distance between Gaussians.
inline double frechet_gaussian(const Vec& mu1, const Mat& s1, const Vec& mu2, const Mat& s2) {
  require_dims(mu1.size(), mu2.size(), "frechet: mean");
  return (mu1 - mu2).squaredNorm() + psd_sqrt_trace_term(s1, s2);
}

inline constexpr double kCfdRidge = 1e-6;

struct CfdResult {
  double value = 0.0;  // mean over groups of the squared Frechet distance
  Vec per_group;
  bool ridge_added = false;
};

namespace detail {

/// Adds the ridge when the covariance is numerically singular.
inline bool regularize(Mat& cov) {
  const Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().maxCoeff(), 1.0);
  if (es.eigenvalues().minCoeff() > 1e-12 * top) return false;
  cov += kCfdRidge * Mat::Identity(cov.rows(), cov.cols());
  return true;
}

}  // namespace detail

/// Per group: fit Gaussians to model and true samples, then average the squared Frechet distance.
inline CfdResult conditional_frechet_distance(const std::vector<Mat>& model_groups, const std::vector<Mat>& true_groups) {
  require(!true_groups.empty(), "cfd: no groups");
  require(model_groups.size() == true_groups.size(), "cfd: model and true group counts differ");
  CfdResult out;
  out.per_group.resize(static_cast<Eigen::Index>(true_groups.size()));
  for (std::size_t g = 0; g < true_groups.size(); ++g) {
    require(true_groups[g].cols() >= 2, "cfd: each group needs at least two true samples");
    require(model_groups[g].cols() >= 2, "cfd: need at least two model samples per group");
    Moments a = sample_moments(model_groups[g]), b = sample_moments(true_groups[g]);
    const bool ra = detail::regularize(a.cov);
    const bool rb = detail::regularize(b.cov);
    out.ridge_added = out.ridge_added || ra || rb;
    out.per_group(static_cast<Eigen::Index>(g)) = frechet_gaussian(a.mean, a.cov, b.mean, b.cov);
  }
  out.value = out.per_group.mean();
  return out;
}

struct XGroup {
  Vec x;  // representative (first member)
  Mat ys;
};

/// Groups pairs by x. radius == 0 means exact match; otherwise an x joins the first group whose
/// representative lies within radius.
inline std::vector<XGroup> group_by_x(const Mat& xs, const Mat& ys, double radius = 0.0) {
  require(xs.cols() == ys.cols(), "group_by_x: x and y counts differ");
  require(radius >= 0.0, "group_by_x: radius must be >= 0");
  std::vector<XGroup> groups;
  std::vector<std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    std::size_t g = 0;
    for (; g < groups.size(); ++g) {
      const bool hit = radius == 0.0 ? groups[g].x == xs.col(i) : (groups[g].x - xs.col(i)).norm() <= radius;
      if (hit) break;
    }
    if (g == groups.size()) {
      groups.push_back({xs.col(i), Mat()});
      members.emplace_back();
    }
    members[g].push_back(i);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].ys.resize(ys.rows(), static_cast<Eigen::Index>(members[g].size()));
    for (std::size_t k = 0; k < members[g].size(); ++k) groups[g].ys.col(static_cast<Eigen::Index>(k)) = ys.col(members[g][k]);
  }
  return groups;
}

/// Axis-aligned grid of n^d midpoint cells over [lo, hi].
struct GridSpec {
  Vec lo;
  Vec hi;
  int n = 400;

  double cell_volume() const { return ((hi - lo) / n).prod(); }
  Eigen::Index num_cells() const {
    Eigen::Index total = 1;
    for (Eigen::Index d = 0; d < lo.size(); ++d) total *= n;
    return total;
  }
  Vec cell(Eigen::Index flat) const {
    Vec y(lo.size());
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      const Eigen::Index k = flat % n;
      flat /= n;
      y(d) = lo(d) + (static_cast<double>(k) + 0.5) * (hi(d) - lo(d)) / n;
    }
    return y;
  }
};

/// Bounding box of mean +- 6 sd over the given components, inflated by 20%.
inline GridSpec mixture_grid(const Mat& means, const Mat& variances, int n = 400) {
  require(means.cols() >= 1 && means.rows() == variances.rows() && means.cols() == variances.cols(),
          "mixture_grid: shape mismatch");
  const Mat sd = variances.cwiseSqrt();
  Vec lo = (means - 6.0 * sd).rowwise().minCoeff();
  Vec hi = (means + 6.0 * sd).rowwise().maxCoeff();
  const Vec pad = 0.1 * (hi - lo);
  return {lo - pad, hi + pad, n};
}

inline constexpr double kLogDensityFloor = -700.0;

struct GridKlResult {
  double value = 0.0;
  double true_mass = 0.0;      // before renormalization
  bool model_floored = false;  // some cell with p* > 1e-12 hit the log floor
};

using Logpdf = std::function<double(const Vec&)>;

/// sum over cells of p* (log p* - log p_model) * volume, with p* renormalized on the grid.
inline GridKlResult grid_kl(const Logpdf& true_logpdf, const Logpdf& model_logpdf, const GridSpec& grid) {
  require(grid.n >= 1 && grid.lo.size() == grid.hi.size() && grid.lo.size() >= 1, "grid_kl: bad grid");
  require(((grid.hi - grid.lo).array() > 0.0).all(), "grid_kl: empty grid box");
  const Eigen::Index cells = grid.num_cells();
  const double vol = grid.cell_volume();
  Vec lp(cells), lq(cells);
  for (Eigen::Index c = 0; c < cells; ++c) {
    const Vec y = grid.cell(c);
    lp(c) = true_logpdf(y);
    lq(c) = model_logpdf(y);
  }
  GridKlResult out;
  const double log_mass = logsumexp(lp) + std::log(vol);
  out.true_mass = std::exp(log_mass);
  require(out.true_mass >= 1.0 - 1e-6, "grid_kl: grid covers less than 1 - 1e-6 of the true mass");
  double kl = 0.0;
  for (Eigen::Index c = 0; c < cells; ++c) {
    const double log_p = lp(c) - log_mass;  // renormalized density
    const double p = std::exp(log_p) * vol;
    if (p == 0.0) continue;
    double log_q = lq(c);
    if (!(log_q >= kLogDensityFloor)) {
      if (std::exp(lp(c)) > 1e-12) out.model_floored = true;
      log_q = kLogDensityFloor;
    }
    kl += p * (log_p - log_q);
  }
  out.value = kl;
  return out;
}

/// V-statistic: 2 mean|a - b| - mean|a - a'| - mean|b - b'| over all pairs.
inline double energy_distance(const Mat& a, const Mat& b) {
  require(a.cols() >= 2 && b.cols() >= 2, "energy_distance: need at least two samples per side");
  require_dims(a.rows(), b.rows(), "energy_distance: dimension");
  auto mean_dist = [](const Mat& p, const Mat& q) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < q.cols(); ++j) s += (p.colwise() - q.col(j)).colwise().norm().sum();
    return s / static_cast<double>(p.cols() * q.cols());
  };
  return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
  int permutations = 0;
};

/// Permutation null for the energy distance. With signed weights s (1/na on a, -1/nb on b) the
/// statistic equals -s^T D s, so every relabeling costs one column of D S.
inline PermutationTest energy_permutation_test(const Mat& a, const Mat& b, int permutations, Rng& rng) {
  require(a.cols() >= 2 && b.cols() >= 2, "energy test: need at least two samples per side");
  require(permutations >= 1, "energy test: permutations must be >= 1");
  const Eigen::Index na = a.cols(), nb = b.cols(), n = na + nb;
  Mat pooled(a.rows(), n);
  pooled << a, b;
  Vec base(n);
  base.head(na).setConstant(1.0 / static_cast<double>(na));
  base.tail(nb).setConstant(-1.0 / static_cast<double>(nb));
  Mat s(n, permutations + 1);
  s.col(0) = base;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int k = 1; k <= permutations; ++k) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i = 0; i < n; ++i) s(order[static_cast<std::size_t>(i)], k) = base(i);
  }
  Vec quad = Vec::Zero(permutations + 1);
  const Eigen::Index block = 512;
  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    Mat d(rows, n);
    for (Eigen::Index i = 0; i < rows; ++i)
      d.row(i) = (pooled.colwise() - pooled.col(r0 + i)).colwise().norm();
    const Mat ds = d * s;
    quad += (s.middleRows(r0, rows).array() * ds.array()).colwise().sum().matrix().transpose();
  }
  PermutationTest out;
  out.statistic = -quad(0);
  out.permutations = permutations;
  int exceed = 0;
  for (int k = 1; k <= permutations; ++k) exceed += (-quad(k) >= out.statistic) ? 1 : 0;
  out.p_value = (1.0 + exceed) / (1.0 + permutations);
  return out;
}

struct GradcheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  std::vector<std::pair<std::string, double>> group_max;
  std::vector<Eigen::Index> skipped;  // coordinates where the perturbed loss was not finite
};

struct ParamGroup {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

inline constexpr double kGradcheckFloor = 1e-4;

/// Central differences per coordinate against the analytic gradient.
/// Relative error |a - n| / max(|a|, |n|, floor); below the floor this is an absolute test.
inline GradcheckReport gradcheck(const std::function<double(const Vec&)>& loss, const Vec& analytic, const Vec& params,
                                 double h = 1e-5, const std::vector<ParamGroup>& groups = {},
                                 double floor = kGradcheckFloor) {
  require(h > 0.0, "gradcheck: h must be positive");
  require(analytic.size() == params.size(), "gradcheck: gradient size differs from parameter size");
  require(std::isfinite(loss(params)), "gradcheck: loss not finite at params");
  GradcheckReport rep;
  Vec rel = Vec::Zero(params.size());
  Vec probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + h;
    const double up = loss(probe);
    probe(i) = params(i) - h;
    const double down = loss(probe);
    probe(i) = params(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      rep.skipped.push_back(i);
      continue;
    }
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic(i)), std::abs(fd), floor});
    rel(i) = std::abs(analytic(i) - fd) / scale;
  }
  if (rel.size() > 0) rep.max_rel_error = rel.maxCoeff(&rep.worst_index);
  for (const auto& g : groups) {
    require(g.offset >= 0 && g.offset + g.size <= params.size(), "gradcheck: group out of range");
    rep.group_max.emplace_back(g.name, g.size > 0 ? rel.segment(g.offset, g.size).maxCoeff() : 0.0);
  }
  return rep;
}

/// Two-component full-covariance Gaussian mixture fitted by EM.
struct Gmm2 {
  double weight[2] = {0.5, 0.5};
  Vec mean[2];
  Mat cov[2];
  double log_likelihood = 0.0;
};

/// Initialized at the extreme projections on the principal axis.
inline Gmm2 fit_gmm2(const Mat& ys, int iters = 200, double tol = 1e-10) {
  require(ys.cols() >= 4, "fit_gmm2: need at least four samples");
  const Eigen::Index d = ys.rows(), n = ys.cols();
  const Moments m = sample_moments(ys);
  const Eigen::SelfAdjointEigenSolver<Mat> es(m.cov);
  const Vec axis = es.eigenvectors().col(d - 1);
  const Eigen::RowVectorXd proj = axis.transpose() * (ys.colwise() - m.mean);
  Eigen::Index lo, hi;
  proj.minCoeff(&lo);
  proj.maxCoeff(&hi);
  Gmm2 g;
  g.mean[0] = ys.col(lo);
  g.mean[1] = ys.col(hi);
  g.cov[0] = g.cov[1] = m.cov + 1e-9 * Mat::Identity(d, d);
  Mat resp(2, n);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    double ll = 0.0;
    for (int k = 0; k < 2; ++k) {
      const Eigen::LLT<Mat> chol(g.cov[k]);
      const Mat l = chol.matrixL();
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const Mat z = chol.matrixL().solve(ys.colwise() - g.mean[k]);
      resp.row(k) = (std::log(g.weight[k]) - 0.5 * (z.colwise().squaredNorm().array() + log_det + d * kLog2Pi)).matrix();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = logsumexp(resp.col(i));
      ll += lse;
      resp.col(i) = (resp.col(i).array() - lse).exp().matrix();
    }
    g.log_likelihood = ll / static_cast<double>(n);
    for (int k = 0; k < 2; ++k) {
      const double nk = std::max(resp.row(k).sum(), 1e-12);
      g.weight[k] = nk / static_cast<double>(n);
      g.mean[k] = ys * resp.row(k).transpose() / nk;
      const Mat c = ys.colwise() - g.mean[k];
      g.cov[k] = (c * resp.row(k).asDiagonal() * c.transpose()) / nk + 1e-9 * Mat::Identity(d, d);
    }
    if (std::abs(g.log_likelihood - prev) < tol) break;
    prev = g.log_likelihood;
  }
  return g;
}

/// Smallest angle between two directions, in degrees.
inline double angle_between_deg(const Vec& u, const Vec& v) {
  const double c = u.dot(v) / (u.norm() * v.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace iot
