#pragma once

#include "iot/numerics.hpp"

namespace iot {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, Eigen::Index size) : cfg_(cfg), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {}

  void step(Vec& params, const Vec& grad) {
    require_dims(params.size(), m_.size(), "Adam::step");
    require_dims(grad.size(), m_.size(), "Adam::step");
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Vec m_;
  Vec v_;
  long t_ = 0;
};

}  // namespace iot
