#pragma once

#include "iot/numerics.hpp"

#include <functional>

namespace iot::testing {

/// Central finite differences of a scalar function of a flat parameter vector.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
/// Central differences at h = 1e-5 carry ~1e-11 of roundoff, so entries below the floor are
/// effectively judged on absolute error.
inline double max_rel_error(const Vec& analytic, const Vec& numeric, double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / scale);
  }
  return worst;
}

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Mat m(rows, cols);
  for (auto& e : m.reshaped()) e = normal(rng);
  return m;
}

inline Vec random_vector(Rng& rng, Eigen::Index n, double sd = 1.0) { return random_matrix(rng, n, 1, sd); }

}  // namespace iot::testing
