#include "mslice/nn.hpp"

#include <cmath>

namespace mslice::nn {

std::vector<LayerSpec> make_mlp_spec(int input_dims, int hidden_width, int hidden_count,
                                     Activation hidden_act, Activation output_act,
                                     double hidden_dropout) {
  if (input_dims <= 0 || hidden_width <= 0 || hidden_count < 0) {
    throw ConfigError("invalid mlp shape");
  }
  if (hidden_dropout < 0.0 || hidden_dropout >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  std::vector<LayerSpec> spec;
  int in = input_dims;
  for (int i = 0; i < hidden_count; ++i) {
    spec.push_back({in, hidden_width, hidden_act, hidden_dropout});
    in = hidden_width;
  }
  spec.push_back({in, 1, output_act, 0.0});
  return spec;
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.fan_in) * l.fan_out + l.fan_out;
  }
  return n;
}

DenseNet init_dense(const std::vector<LayerSpec>& spec, std::mt19937_64& rng) {
  DenseNet net;
  net.layers = spec;
  net.w.reserve(spec.size());
  net.b.reserve(spec.size());
  for (const auto& l : spec) {
    if (l.fan_in <= 0 || l.fan_out <= 0) throw ConfigError("layer with non-positive width");
    double limit = l.act == Activation::relu
                       ? std::sqrt(6.0 / l.fan_in)
                       : std::sqrt(6.0 / (l.fan_in + l.fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(l.fan_in, l.fan_out);
    for (int c = 0; c < w.cols(); ++c) {
      for (int r = 0; r < w.rows(); ++r) {
        w(r, c) = dist(rng);
      }
    }
    net.w.push_back(std::move(w));
    net.b.push_back(Vector::Zero(l.fan_out));
  }
  return net;
}

namespace {

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

Matrix forward(const DenseNet& net, const Matrix& x, Mode mode, std::mt19937_64* rng,
               ForwardCache* cache) {
  if (net.layers.empty()) throw ConfigError("forward through an empty network");
  if (x.rows() != net.input_dims()) {
    throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, network expects " +
                        std::to_string(net.input_dims()));
  }
  if (cache) {
    cache->input = x;
    cache->pre.assign(net.layers.size(), Matrix());
    cache->post.assign(net.layers.size(), Matrix());
    cache->mask.assign(net.layers.size(), Matrix());
  }

  Matrix a = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerSpec& spec = net.layers[l];
    Matrix z = (net.w[l].transpose() * a).colwise() + net.b[l];
    if (cache) cache->pre[l] = z;
    apply_activation(spec.act, z);
    if (spec.dropout > 0.0 && mode == Mode::train) {
      if (!rng) throw ConfigError("train-mode forward with dropout needs an rng");
      const double keep = 1.0 - spec.dropout;
      std::bernoulli_distribution coin(keep);
      Matrix mask(z.rows(), z.cols());
      for (int c = 0; c < mask.cols(); ++c) {
        for (int r = 0; r < mask.rows(); ++r) {
          mask(r, c) = coin(*rng) ? 1.0 / keep : 0.0;
        }
      }
      z = z.cwiseProduct(mask);
      if (cache) cache->mask[l] = std::move(mask);
    }
    if (cache) cache->post[l] = z;
    a = std::move(z);
  }
  return a;
}

Gradients zero_gradients(const DenseNet& net) {
  Gradients g;
  g.dw.reserve(net.layers.size());
  g.db.reserve(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.dw.push_back(Matrix::Zero(net.w[l].rows(), net.w[l].cols()));
    g.db.push_back(Vector::Zero(net.b[l].size()));
  }
  return g;
}

void accumulate(Gradients& into, const Gradients& from) {
  if (into.dw.size() != from.dw.size()) throw ShapeMismatch("gradient layer count mismatch");
  for (std::size_t l = 0; l < into.dw.size(); ++l) {
    into.dw[l] += from.dw[l];
    into.db[l] += from.db[l];
  }
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_out) {
  const std::size_t depth = net.layers.size();
  if (cache.pre.size() != depth) throw ShapeMismatch("cache does not match network depth");
  Gradients g;
  g.dw.resize(depth);
  g.db.resize(depth);

  Matrix upstream = d_out;  // gradient w.r.t. layer output
  for (std::size_t l = depth; l-- > 0;) {
    if (net.layers[l].dropout > 0.0 && cache.mask[l].size() > 0) {
      upstream = upstream.cwiseProduct(cache.mask[l]);
    }
    // Output before dropout is relu(pre)/tanh(pre); recompute from pre where
    // needed instead of caching yet another matrix.
    Matrix d_pre;
    switch (net.layers[l].act) {
      case Activation::relu:
        d_pre = ((cache.pre[l].array() > 0.0).cast<double>() * upstream.array()).matrix();
        break;
      case Activation::tanh:
        d_pre = ((1.0 - cache.pre[l].array().tanh().square()) * upstream.array()).matrix();
        break;
      case Activation::identity:
        d_pre = upstream;
        break;
    }
    const Matrix& a_prev = l == 0 ? cache.input : cache.post[l - 1];
    g.dw[l].noalias() = a_prev * d_pre.transpose();
    g.db[l] = d_pre.rowwise().sum();
    if (l > 0) {
      upstream.noalias() = net.w[l] * d_pre;
    } else {
      g.dx.noalias() = net.w[l] * d_pre;
    }
  }
  return g;
}

LossValue mae_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeMismatch("loss shape mismatch");
  }
  const double n = static_cast<double>(pred.size());
  LossValue out;
  Matrix diff = pred - target;
  out.value = diff.array().abs().sum() / n;
  out.grad = diff.array().sign().matrix() / n;
  return out;
}

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeMismatch("loss shape mismatch");
  }
  const double n = static_cast<double>(pred.size());
  LossValue out;
  Matrix diff = pred - target;
  out.value = diff.array().square().sum() / n;
  out.grad = 2.0 * diff / n;
  return out;
}

AdamState make_adam(const DenseNet& net) {
  AdamState s;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    s.mw.push_back(Matrix::Zero(net.w[l].rows(), net.w[l].cols()));
    s.vw.push_back(Matrix::Zero(net.w[l].rows(), net.w[l].cols()));
    s.mb.push_back(Vector::Zero(net.b[l].size()));
    s.vb.push_back(Vector::Zero(net.b[l].size()));
  }
  return s;
}

void adam_step(DenseNet& net, AdamState& state, const Gradients& grads, const AdamConfig& cfg) {
  if (state.mw.size() != net.layers.size() || grads.dw.size() != net.layers.size()) {
    throw ShapeMismatch("adam state does not match network");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    state.mw[l] = cfg.beta1 * state.mw[l] + (1.0 - cfg.beta1) * grads.dw[l];
    state.vw[l] = cfg.beta2 * state.vw[l].array() + (1.0 - cfg.beta2) * grads.dw[l].array().square();
    state.mb[l] = cfg.beta1 * state.mb[l] + (1.0 - cfg.beta1) * grads.db[l];
    state.vb[l] = cfg.beta2 * state.vb[l].array() + (1.0 - cfg.beta2) * grads.db[l].array().square();
    net.w[l].array() -= cfg.lr * (state.mw[l].array() / bc1) /
                        ((state.vw[l].array() / bc2).sqrt() + cfg.eps);
    net.b[l].array() -= cfg.lr * (state.mb[l].array() / bc1) /
                        ((state.vb[l].array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace mslice::nn
