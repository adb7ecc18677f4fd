// Minimal dense-network core: double precision, CPU only, deterministic.
//
// Convention: samples are *columns*. A batch of n inputs with d features is a
// d x n matrix, so a layer with weight matrix w (fan_in x fan_out) computes
// z = w^T a_prev + b. Gradients follow the same layout.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mslice/common.hpp"

namespace mslice::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, identity };

struct LayerSpec {
  int fan_in = 0;
  int fan_out = 0;
  Activation act = Activation::identity;
  // Dropout rate applied to this layer's *output* in train mode (inverted
  // dropout: kept units are scaled by 1/(1-rate), eval is a no-op).
  double dropout = 0.0;
};

// Stack of fully connected layers: `hidden_count` hidden layers of
// `hidden_width` units, then a single output unit.
std::vector<LayerSpec> make_mlp_spec(int input_dims, int hidden_width, int hidden_count,
                                     Activation hidden_act, Activation output_act,
                                     double hidden_dropout);

struct DenseNet {
  std::vector<LayerSpec> layers;
  std::vector<Matrix> w;  // w[l]: fan_in x fan_out
  std::vector<Vector> b;  // b[l]: fan_out

  int input_dims() const { return layers.empty() ? 0 : layers.front().fan_in; }
  int output_dims() const { return layers.empty() ? 0 : layers.back().fan_out; }
  std::size_t param_count() const;
};

// He-uniform fan-in init for relu layers, Glorot-uniform otherwise; biases
// start at zero. Draw order is fixed (layer by layer, column major) so a given
// rng state always yields the same network.
DenseNet init_dense(const std::vector<LayerSpec>& spec, std::mt19937_64& rng);

enum class Mode { train, eval };

// Everything backward() needs. `post[l]` is the layer-l output after
// activation and dropout; `pre[l]` the preactivation; `mask[l]` the scaled
// dropout keep-mask (empty when the layer has no dropout).
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  std::vector<Matrix> mask;
};

Matrix forward(const DenseNet& net, const Matrix& x, Mode mode, std::mt19937_64* rng = nullptr,
               ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Matrix> dw;
  std::vector<Vector> db;
  Matrix dx;  // gradient w.r.t. the batch input, fan_in x n
};

Gradients zero_gradients(const DenseNet& net);
void accumulate(Gradients& into, const Gradients& from);

// d_out is the loss gradient w.r.t. the network output (fan_out x n).
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_out);

struct LossValue {
  double value = 0.0;
  Matrix grad;  // same shape as the prediction
};

// Mean over *all* entries; the MAE subgradient at zero residual is taken as 0.
LossValue mae_loss(const Matrix& pred, const Matrix& target);
LossValue mse_loss(const Matrix& pred, const Matrix& target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  std::int64_t step = 0;
};

AdamState make_adam(const DenseNet& net);
void adam_step(DenseNet& net, AdamState& state, const Gradients& grads, const AdamConfig& cfg);

}  // namespace mslice::nn
