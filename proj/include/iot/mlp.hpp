#pragma once

#include "iot/numerics.hpp"

#include <string_view>
#include <utility>
#include <vector>

namespace iot {

enum class Activation { identity, relu, leaky_relu, log_softmax };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::log_softmax: return "log_softmax";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "log_softmax") return Activation::log_softmax;
  throw std::domain_error("unknown activation '" + std::string(s) + "'");
}

struct LayerSpec {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Activation activation = Activation::identity;
  double slope = 0.0;  // leaky_relu only

  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  Mat weight;  // out x in
  Vec bias;
};

/// Feedforward network parameters. Also used as the gradient container.
struct MlpParams {
  std::vector<LayerSpec> spec;
  std::vector<Layer> layers;

  Eigen::Index in_dim() const { return spec.front().in_dim; }
  Eigen::Index out_dim() const { return spec.back().out_dim; }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  MlpParams zeros_like() const {
    MlpParams z{spec, {}};
    for (const auto& l : layers)
      z.layers.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
    return z;
  }

  MlpParams& operator+=(const MlpParams& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }

  MlpParams& operator*=(double s) {
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(num_params()));
    Eigen::Index k = 0;
    for (const auto& l : layers) {
      out.segment(k, l.weight.size()) = l.weight.reshaped();
      k += l.weight.size();
      out.segment(k, l.bias.size()) = l.bias;
      k += l.bias.size();
    }
    return out;
  }

  void assign(const Eigen::Ref<const Vec>& flat) {
    require_dims(flat.size(), static_cast<Eigen::Index>(num_params()), "MlpParams::assign");
    Eigen::Index k = 0;
    for (auto& l : layers) {
      l.weight.reshaped() = flat.segment(k, l.weight.size());
      k += l.weight.size();
      l.bias = flat.segment(k, l.bias.size());
      k += l.bias.size();
    }
  }
};

inline void validate_spec(const std::vector<LayerSpec>& spec) {
  require(!spec.empty(), "mlp: empty layer spec");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    require(spec[i].in_dim > 0 && spec[i].out_dim > 0, "mlp: layer dims must be positive");
    if (i > 0) require_dims(spec[i - 1].out_dim, spec[i].in_dim, "mlp: layer chain");
    if (spec[i].activation == Activation::log_softmax)
      require(i + 1 == spec.size(), "mlp: log_softmax is only allowed on the final layer");
  }
}

/// Hidden layers of the given widths followed by an output layer.
inline std::vector<LayerSpec> make_spec(Eigen::Index in_dim, const std::vector<Eigen::Index>& hidden,
                                        Eigen::Index out_dim, Activation hidden_act,
                                        Activation out_act, double slope = 0.0) {
  std::vector<LayerSpec> spec;
  Eigen::Index prev = in_dim;
  for (Eigen::Index h : hidden) {
    spec.push_back({prev, h, hidden_act, slope});
    prev = h;
  }
  spec.push_back({prev, out_dim, out_act, slope});
  return spec;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline MlpParams mlp_init(const std::vector<LayerSpec>& spec, Rng& rng) {
  validate_spec(spec);
  MlpParams p{spec, {}};
  for (const auto& s : spec) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l{Mat(s.out_dim, s.in_dim), Vec(s.out_dim)};
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = u(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = u(rng);
    p.layers.push_back(std::move(l));
  }
  return p;
}

/// Per-layer inputs and pre-activations of one batched forward pass (columns are samples).
struct ForwardCache {
  std::vector<Mat> inputs;
  std::vector<Mat> pre;
  Mat output;
};

namespace detail {

inline void log_softmax_cols(Mat& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    const double lse = m + std::log((z.col(c).array() - m).exp().sum());
    z.col(c).array() -= lse;
  }
}

inline Mat activate(const Mat& z, const LayerSpec& s) {
  switch (s.activation) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::leaky_relu:
      return z.unaryExpr([slope = s.slope](double v) { return v > 0.0 ? v : slope * v; });
    case Activation::log_softmax: {
      Mat out = z;
      log_softmax_cols(out);
      return out;
    }
  }
  return z;
}

// Maps dL/d(activation output) to dL/d(pre-activation). ReLU derivative at 0 is 0.
inline Mat activation_backward(const Mat& pre, const Mat& output, const Mat& grad, const LayerSpec& s) {
  switch (s.activation) {
    case Activation::identity: return grad;
    case Activation::relu: return (pre.array() > 0.0).select(grad, 0.0);
    case Activation::leaky_relu: return (pre.array() > 0.0).select(grad, s.slope * grad);
    case Activation::log_softmax: {
      const Eigen::RowVectorXd total = grad.colwise().sum();
      return grad - (output.array().exp().rowwise() * total.array()).matrix();
    }
  }
  return grad;
}

}  // namespace detail

/// Batched forward pass; `x` holds one sample per column.
inline ForwardCache mlp_forward(const MlpParams& params, const Mat& x) {
  require(!params.layers.empty(), "mlp_forward: empty network");
  require_dims(x.rows(), params.in_dim(), "mlp_forward: input");
  ForwardCache cache;
  cache.inputs.reserve(params.layers.size());
  cache.pre.reserve(params.layers.size());
  Mat h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Mat z = l.weight * h;
    z.colwise() += l.bias;
    cache.inputs.push_back(std::move(h));
    h = detail::activate(z, params.spec[i]);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(h);
  return cache;
}

/// Forward pass without keeping intermediates.
inline Mat mlp_apply(const MlpParams& params, const Mat& x) {
  require_dims(x.rows(), params.in_dim(), "mlp_apply: input");
  Mat h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    Mat z = params.layers[i].weight * h;
    z.colwise() += params.layers[i].bias;
    h = detail::activate(z, params.spec[i]);
  }
  return h;
}

inline std::pair<Vec, ForwardCache> mlp_forward(const MlpParams& params, const Vec& x) {
  ForwardCache cache = mlp_forward(params, Mat(x));
  Vec out = cache.output.col(0);
  return {std::move(out), std::move(cache)};
}

struct MlpBackward {
  MlpParams grad;  // summed over the batch
  Mat grad_input;
};

/// Reverse-mode pass. With `need_param_grad == false` only the input gradient is formed.
inline MlpBackward mlp_backward(const MlpParams& params, const ForwardCache& cache, const Mat& grad_output,
                                bool need_param_grad = true) {
  const std::size_t depth = params.layers.size();
  require(cache.inputs.size() == depth && cache.pre.size() == depth, "mlp_backward: stale cache");
  require(grad_output.rows() == cache.output.rows() && grad_output.cols() == cache.output.cols(),
          "mlp_backward: grad_output shape does not match cache");
  for (std::size_t i = 0; i < depth; ++i) {
    require(cache.inputs[i].rows() == params.layers[i].weight.cols() &&
                cache.pre[i].rows() == params.layers[i].weight.rows(),
            "mlp_backward: stale cache");
  }

  MlpBackward out;
  if (need_param_grad) out.grad = params.zeros_like();
  Mat g = grad_output;
  for (std::size_t k = depth; k-- > 0;) {
    const Mat& act_out = (k + 1 == depth) ? cache.output : cache.inputs[k + 1];
    Mat dz = detail::activation_backward(cache.pre[k], act_out, g, params.spec[k]);
    if (need_param_grad) {
      out.grad.layers[k].weight.noalias() = dz * cache.inputs[k].transpose();
      out.grad.layers[k].bias = dz.rowwise().sum();
    }
    g = params.layers[k].weight.transpose() * dz;
  }
  out.grad_input = std::move(g);
  return out;
}

inline MlpBackward mlp_backward(const MlpParams& params, const ForwardCache& cache, const Vec& grad_output) {
  return mlp_backward(params, cache, Mat(grad_output));
}

}  // namespace iot
