#include "mslice/tse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace mslice {

using nn::Matrix;
using nn::Vector;

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::full: return "full";
    case ModelKind::ind_only: return "ind";
    case ModelKind::glo_only: return "glo";
  }
  throw DomainError("unreachable model kind");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "full") return ModelKind::full;
  if (name == "ind") return ModelKind::ind_only;
  if (name == "glo") return ModelKind::glo_only;
  throw ConfigError("unknown model kind: " + name);
}

namespace {

void validate_config(const TseConfig& cfg) {
  if (cfg.hero_pool <= 0 || cfg.heroes_per_match <= 0 || cfg.item_types <= 0 ||
      cfg.subnet_width <= 0 || cfg.subnet_depth <= 0 || cfg.glo_width <= 0 ||
      cfg.glo_depth <= 0 || cfg.comb_width <= 0 || cfg.comb_depth <= 0) {
    throw ConfigError("model config fields must be positive");
  }
  if (cfg.heroes_per_match > cfg.hero_pool) {
    throw ConfigError("heroes per match exceeds hero pool");
  }
  if (cfg.heroes_per_match % 2 != 0) {
    throw ConfigError("heroes per match must split into two equal teams");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (cfg.mu < 0.0 || cfg.nu < 0.0) throw ConfigError("loss weights must be non-negative");
}

std::vector<nn::LayerSpec> subnet_spec(const TseConfig& cfg) {
  return nn::make_mlp_spec(cfg.subnet_input_dims(), cfg.subnet_width, cfg.subnet_depth,
                           nn::Activation::relu, nn::Activation::tanh, cfg.dropout);
}

std::vector<nn::LayerSpec> glo_spec(const TseConfig& cfg) {
  return nn::make_mlp_spec(cfg.slice_dims(), cfg.glo_width, cfg.glo_depth, nn::Activation::relu,
                           nn::Activation::tanh, cfg.dropout);
}

std::vector<nn::LayerSpec> comb_spec(const TseConfig& cfg) {
  // The combiner mixes the two branch outputs; no dropout on its hidden layers.
  return nn::make_mlp_spec(2, cfg.comb_width, cfg.comb_depth, nn::Activation::relu,
                           nn::Activation::tanh, 0.0);
}

}  // namespace

FeatureScaler identity_scaler(const TseConfig& cfg) {
  FeatureScaler s;
  s.slice_mean.assign(cfg.slice_dims(), 0.0);
  s.slice_inv_std.assign(cfg.slice_dims(), 1.0);
  s.hero_mean.assign(cfg.subnet_input_dims(), 0.0);
  s.hero_inv_std.assign(cfg.subnet_input_dims(), 1.0);
  return s;
}

FeatureScaler fit_feature_scaler(std::span<const TimeSlice> train_slices, const TseConfig& cfg) {
  if (train_slices.empty()) throw EmptyDataset("cannot fit feature scaling on an empty set");
  const int slice_dims = cfg.slice_dims();
  const int hero_dims = cfg.subnet_input_dims();
  const int block = hero_dims;  // hero block and subnet input have equal width
  const FeatureSchema schema{cfg.heroes_per_match, cfg.item_types};

  std::vector<double> s1(slice_dims, 0.0), s2(slice_dims, 0.0);
  std::vector<double> h1(hero_dims, 0.0), h2(hero_dims, 0.0);
  for (const auto& slice : train_slices) {
    if (static_cast<int>(slice.features.size()) != slice_dims) {
      throw ShapeMismatch("slice width does not match model config");
    }
    for (int d = 0; d < slice_dims; ++d) {
      const double v = slice.features[d];
      s1[d] += v;
      s2[d] += v * v;
    }
    const double gt = slice.features[0];
    h1[0] += cfg.heroes_per_match * gt;
    h2[0] += cfg.heroes_per_match * gt * gt;
    for (int h = 0; h < cfg.heroes_per_match; ++h) {
      const float* f = slice.features.data() + schema.block_offset(h);
      for (int d = 1; d < block; ++d) {
        const double v = f[d];
        h1[d] += v;
        h2[d] += v * v;
      }
    }
  }

  auto finalize = [](std::vector<double>& sum, std::vector<double>& sumsq, double n,
                     FeatureScaler& out, bool hero) {
    auto& mean = hero ? out.hero_mean : out.slice_mean;
    auto& inv = hero ? out.hero_inv_std : out.slice_inv_std;
    mean.resize(sum.size());
    inv.resize(sum.size());
    for (std::size_t d = 0; d < sum.size(); ++d) {
      mean[d] = sum[d] / n;
      double var = std::max(0.0, sumsq[d] / n - mean[d] * mean[d]);
      double sd = std::sqrt(var);
      inv[d] = sd > 1e-8 ? 1.0 / sd : 0.0;  // constant dims contribute nothing
    }
  };

  FeatureScaler scaler;
  const double n_slices = static_cast<double>(train_slices.size());
  finalize(s1, s2, n_slices, scaler, false);
  finalize(h1, h2, n_slices * cfg.heroes_per_match, scaler, true);
  return scaler;
}

std::size_t TseModel::param_count() const {
  std::size_t n = 0;
  for (const auto& s : subnets) n += s.param_count();
  n += glo.param_count() + comb.param_count();
  return n;
}

TseModel init_tse(const TseConfig& cfg, ModelKind kind, std::uint64_t seed) {
  validate_config(cfg);
  TseModel model;
  model.cfg = cfg;
  model.kind = kind;
  model.scaler = identity_scaler(cfg);
  auto rng = make_rng(seed, 0x7e5e);
  if (model.has_ind()) {
    model.subnets.reserve(cfg.hero_pool);
    const auto spec = subnet_spec(cfg);
    for (int h = 0; h < cfg.hero_pool; ++h) {
      model.subnets.push_back(nn::init_dense(spec, rng));
    }
  }
  if (model.has_glo()) model.glo = nn::init_dense(glo_spec(cfg), rng);
  if (kind == ModelKind::full) model.comb = nn::init_dense(comb_spec(cfg), rng);
  return model;
}

std::vector<double> subnet_input(const TimeSlice& slice, int hero_index, const TseConfig& cfg) {
  if (hero_index < 1 || hero_index > cfg.heroes_per_match) {
    throw DomainError("hero index out of range: " + std::to_string(hero_index));
  }
  const FeatureSchema schema{cfg.heroes_per_match, cfg.item_types};
  if (static_cast<int>(slice.features.size()) != schema.slice_dims()) {
    throw ShapeMismatch("slice width does not match model config");
  }
  const int width = cfg.subnet_input_dims();
  std::vector<double> x(width);
  x[0] = slice.features[0];  // game time stands in for the hero id
  const float* f = slice.features.data() + schema.block_offset(hero_index - 1);
  for (int d = 1; d < width; ++d) x[d] = f[d];
  return x;
}

SliceBatch build_batch(std::span<const TimeSlice> slices, std::span<const std::size_t> index,
                       const TseConfig& cfg, const ScalingParams& scaling,
                       const FeatureScaler& scaler) {
  const int slice_dims = cfg.slice_dims();
  const int hero_dims = cfg.subnet_input_dims();
  const FeatureSchema schema{cfg.heroes_per_match, cfg.item_types};
  const int n = static_cast<int>(index.size());
  if (static_cast<int>(scaler.slice_mean.size()) != slice_dims ||
      static_cast<int>(scaler.hero_mean.size()) != hero_dims) {
    throw ShapeMismatch("feature scaler does not match model config");
  }

  SliceBatch batch;
  batch.x.resize(slice_dims, n);
  batch.y.resize(1, n);

  // hero_id -> rows assigned to that subnet, discovered in batch order.
  std::map<int, std::vector<std::pair<int, double>>> slots;  // (column, sign)
  for (int c = 0; c < n; ++c) {
    const TimeSlice& s = slices[index[c]];
    if (static_cast<int>(s.features.size()) != slice_dims) {
      throw ShapeMismatch("slice width does not match model config");
    }
    for (int d = 0; d < slice_dims; ++d) {
      batch.x(d, c) = (s.features[d] - scaler.slice_mean[d]) * scaler.slice_inv_std[d];
    }
    batch.y(0, c) = scale_y(slice_target_y(s, scaling.alpha), scaling);
    for (int h = 0; h < cfg.heroes_per_match; ++h) {
      const int hero_id =
          static_cast<int>(std::lround(s.features[schema.block_offset(h)]));
      if (hero_id < 1 || hero_id > cfg.hero_pool) throw UnknownHero(hero_id);
      const double sign = h < cfg.heroes_per_match / 2 ? 1.0 : -1.0;
      slots[hero_id].push_back({c, sign});
    }
  }

  batch.groups.reserve(slots.size());
  for (auto& [hero_id, rows] : slots) {
    HeroGroup g;
    g.hero_id = hero_id;
    g.input.resize(hero_dims, static_cast<int>(rows.size()));
    g.cols.reserve(rows.size());
    g.signs.reserve(rows.size());
    int j = 0;
    for (auto [col, sign] : rows) {
      g.cols.push_back(col);
      g.signs.push_back(sign);
      const TimeSlice& s = slices[index[col]];
      // Subnet input: game time, then the hero block minus its id dim.
      g.input(0, j) = (s.features[0] - scaler.hero_mean[0]) * scaler.hero_inv_std[0];
      const float* f = s.features.data();
      int off = 0;
      for (int h = 0; h < cfg.heroes_per_match; ++h) {
        if (static_cast<int>(std::lround(f[schema.block_offset(h)])) == hero_id) {
          off = schema.block_offset(h);
          break;
        }
      }
      for (int d = 1; d < hero_dims; ++d) {
        g.input(d, j) = (f[off + d] - scaler.hero_mean[d]) * scaler.hero_inv_std[d];
      }
      ++j;
    }
    batch.groups.push_back(std::move(g));
  }
  return batch;
}

nn::Matrix ind_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng, std::vector<nn::ForwardCache>* caches) {
  if (!model.has_ind()) throw ConfigError("model has no individual branch");
  Matrix y = Matrix::Zero(1, batch.x.cols());
  if (caches) caches->assign(batch.groups.size(), nn::ForwardCache());
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const HeroGroup& group = batch.groups[g];
    if (group.hero_id < 1 || group.hero_id > static_cast<int>(model.subnets.size())) {
      throw UnknownHero(group.hero_id);
    }
    const nn::DenseNet& subnet = model.subnets[group.hero_id - 1];
    Matrix out = nn::forward(subnet, group.input, mode, rng, caches ? &(*caches)[g] : nullptr);
    for (std::size_t j = 0; j < group.cols.size(); ++j) {
      y(0, group.cols[j]) += group.signs[j] * out(0, static_cast<int>(j));
    }
  }
  return y;
}

nn::Matrix glo_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng, nn::ForwardCache* cache) {
  if (!model.has_glo()) throw ConfigError("model has no global branch");
  return nn::forward(model.glo, batch.x, mode, rng, cache);
}

TseForward tse_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng) {
  TseForward fwd;
  if (model.has_ind()) {
    fwd.y_ind = ind_forward(model, batch, mode, rng, &fwd.group_caches);
  }
  if (model.has_glo()) {
    fwd.y_glo = glo_forward(model, batch, mode, rng, &fwd.glo_cache);
  }
  switch (model.kind) {
    case ModelKind::ind_only:
      fwd.y_hat = fwd.y_ind;
      break;
    case ModelKind::glo_only:
      fwd.y_hat = fwd.y_glo;
      break;
    case ModelKind::full: {
      Matrix comb_in(2, batch.x.cols());
      comb_in.row(0) = fwd.y_ind;
      comb_in.row(1) = fwd.y_glo;
      fwd.y_hat = nn::forward(model.comb, comb_in, mode, rng, &fwd.comb_cache);
      break;
    }
  }
  return fwd;
}

TseLoss tse_loss(const TseModel& model, const SliceBatch& batch, const TseForward& fwd) {
  TseLoss loss;
  loss.main_mae = nn::mae_loss(fwd.y_hat, batch.y).value;
  switch (model.kind) {
    case ModelKind::ind_only:
      loss.ind_mae = loss.main_mae;
      loss.total = loss.main_mae;
      break;
    case ModelKind::glo_only:
      loss.glo_mae = loss.main_mae;
      loss.total = loss.main_mae;
      break;
    case ModelKind::full:
      loss.ind_mae = nn::mae_loss(fwd.y_ind, batch.y).value;
      loss.glo_mae = nn::mae_loss(fwd.y_glo, batch.y).value;
      loss.total = loss.main_mae + model.cfg.mu * loss.ind_mae + model.cfg.nu * loss.glo_mae;
      break;
  }
  return loss;
}

TseOptimizer make_optimizer(const TseModel& model, const nn::AdamConfig& cfg) {
  TseOptimizer opt;
  opt.cfg = cfg;
  for (const auto& s : model.subnets) opt.subnets.push_back(nn::make_adam(s));
  if (model.has_glo()) opt.glo = nn::make_adam(model.glo);
  if (model.kind == ModelKind::full) opt.comb = nn::make_adam(model.comb);
  return opt;
}

namespace {

// Backpropagates branch gradients and steps the optimizer. d_yind / d_yglo are
// 1 x n gradients w.r.t. the branch outputs (empty when absent).
void apply_branch_gradients(TseModel& model, TseOptimizer& opt, const SliceBatch& batch,
                            const TseForward& fwd, const Matrix& d_yind, const Matrix& d_yglo) {
  if (model.has_ind() && d_yind.size() > 0) {
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      const HeroGroup& group = batch.groups[g];
      Matrix d_out(1, static_cast<int>(group.cols.size()));
      for (std::size_t j = 0; j < group.cols.size(); ++j) {
        d_out(0, static_cast<int>(j)) = group.signs[j] * d_yind(0, group.cols[j]);
      }
      nn::DenseNet& subnet = model.subnets[group.hero_id - 1];
      nn::Gradients grads = nn::backward(subnet, fwd.group_caches[g], d_out);
      nn::adam_step(subnet, opt.subnets[group.hero_id - 1], grads, opt.cfg);
    }
  }
  if (model.has_glo() && d_yglo.size() > 0) {
    nn::Gradients grads = nn::backward(model.glo, fwd.glo_cache, d_yglo);
    nn::adam_step(model.glo, opt.glo, grads, opt.cfg);
  }
}

}  // namespace

TseLoss tse_train_step(TseModel& model, TseOptimizer& opt, const SliceBatch& batch,
                       std::mt19937_64& rng) {
  TseForward fwd = tse_forward(model, batch, nn::Mode::train, &rng);
  TseLoss loss = tse_loss(model, batch, fwd);

  switch (model.kind) {
    case ModelKind::ind_only: {
      Matrix d = nn::mae_loss(fwd.y_hat, batch.y).grad;
      apply_branch_gradients(model, opt, batch, fwd, d, Matrix());
      break;
    }
    case ModelKind::glo_only: {
      Matrix d = nn::mae_loss(fwd.y_hat, batch.y).grad;
      apply_branch_gradients(model, opt, batch, fwd, Matrix(), d);
      break;
    }
    case ModelKind::full: {
      Matrix d_yhat = nn::mae_loss(fwd.y_hat, batch.y).grad;
      nn::Gradients comb_grads = nn::backward(model.comb, fwd.comb_cache, d_yhat);
      Matrix d_yind = comb_grads.dx.row(0) + model.cfg.mu * nn::mae_loss(fwd.y_ind, batch.y).grad;
      Matrix d_yglo = comb_grads.dx.row(1) + model.cfg.nu * nn::mae_loss(fwd.y_glo, batch.y).grad;
      apply_branch_gradients(model, opt, batch, fwd, d_yind, d_yglo);
      nn::adam_step(model.comb, opt.comb, comb_grads, opt.cfg);
      break;
    }
  }
  return loss;
}

std::vector<double> predict_scaled(const TseModel& model, std::span<const TimeSlice> slices,
                                   const ScalingParams& scaling, int batch_size) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  std::vector<double> out;
  out.reserve(slices.size());
  std::vector<std::size_t> index;
  for (std::size_t start = 0; start < slices.size(); start += batch_size) {
    const std::size_t stop = std::min(slices.size(), start + batch_size);
    index.resize(stop - start);
    std::iota(index.begin(), index.end(), start);
    SliceBatch batch = build_batch(slices, index, model.cfg, scaling, model.scaler);
    TseForward fwd = tse_forward(model, batch, nn::Mode::eval);
    for (int c = 0; c < fwd.y_hat.cols(); ++c) out.push_back(fwd.y_hat(0, c));
  }
  return out;
}

SlicePrediction predict_slice(const TseModel& model, const TimeSlice& slice,
                              const ScalingParams& scaling) {
  const std::vector<double> y = predict_scaled(model, std::span(&slice, 1), scaling, 1);
  SlicePrediction out;
  out.y_hat_rescaled = rescale_y(y[0], scaling);
  const Prediction p = extract_prediction(out.y_hat_rescaled, scaling.alpha);
  out.t_hat_min = p.t_hat_min;
  out.r_hat = p.r_hat;
  return out;
}

EvalMetrics metrics_from_predictions(std::span<const double> y_hat_scaled,
                                     std::span<const TimeSlice> slices,
                                     const ScalingParams& scaling) {
  if (y_hat_scaled.size() != slices.size()) throw ShapeMismatch("prediction count mismatch");
  if (slices.empty()) throw EmptyDataset("no slices to evaluate");
  EvalMetrics m;
  m.n = slices.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const double y_true = slice_target_y(slices[i], scaling.alpha);
    const double y_true_scaled = scale_y(y_true, scaling);
    const double d = y_hat_scaled[i] - y_true_scaled;
    m.mae_scaled += std::abs(d);
    m.mse_scaled += d * d;
    const double y_resc = rescale_y(y_hat_scaled[i], scaling);
    const Prediction p = extract_prediction(y_resc, scaling.alpha);
    m.time_mae_min += std::abs(p.t_hat_min - slices[i].remaining_time_min);
    if (p.r_hat == slices[i].result) ++correct;
  }
  m.mae_scaled /= m.n;
  m.mse_scaled /= m.n;
  m.time_mae_min /= m.n;
  m.mae_rescaled = m.mae_scaled * (scaling.y_max - scaling.y_min) / 2.0;
  m.winner_accuracy = static_cast<double>(correct) / m.n;
  // Rescaled MAE upper-bounds alpha times the time error; a violation means
  // the metric pipeline itself is broken.
  if (m.mae_rescaled + 1e-9 < scaling.alpha * m.time_mae_min) {
    throw DomainError("rescaled-MAE bound violated in metrics");
  }
  return m;
}

EvalMetrics compute_metrics(const TseModel& model, std::span<const TimeSlice> slices,
                            const ScalingParams& scaling) {
  const std::vector<double> y_hat = predict_scaled(model, slices, scaling);
  return metrics_from_predictions(y_hat, slices, scaling);
}

FitResult fit(TseModel& model, std::span<const TimeSlice> train, std::span<const TimeSlice> val,
              const ScalingParams& scaling, const TrainConfig& tcfg) {
  if (train.empty()) throw EmptyDataset("no training slices");
  if (tcfg.epochs <= 0 || tcfg.batch_size <= 0) throw ConfigError("bad training config");

  auto rng = make_rng(tcfg.seed, 0x7a11);
  TseOptimizer opt = make_optimizer(model, {.lr = tcfg.lr});
  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);

  FitResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  TseModel best = model;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0, mae_sum = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(perm.size(), start + tcfg.batch_size);
      const std::span<const std::size_t> index(perm.data() + start, stop - start);
      SliceBatch batch = build_batch(train, index, model.cfg, scaling, model.scaler);
      TseLoss loss = tse_train_step(model, opt, batch, rng);
      if (!std::isfinite(loss.total)) {
        throw DivergenceError("training loss is not finite at epoch " + std::to_string(epoch));
      }
      loss_sum += loss.total * static_cast<double>(index.size());
      mae_sum += loss.main_mae * static_cast<double>(index.size());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.train_mae = mae_sum / static_cast<double>(train.size());

    double selection_mae;
    if (!val.empty()) {
      const std::vector<double> y_hat = predict_scaled(model, val, scaling, tcfg.eval_batch_size);
      const EvalMetrics m = metrics_from_predictions(y_hat, val, scaling);
      stats.val_mae = m.mae_scaled;
      stats.val_mse = m.mse_scaled;
      stats.val_rescaled_mae = m.mae_rescaled;
      selection_mae = m.mae_scaled;
    } else {
      stats.val_mae = stats.val_mse = stats.val_rescaled_mae =
          std::numeric_limits<double>::quiet_NaN();
      selection_mae = stats.train_mae;
    }
    result.history.push_back(stats);

    if (selection_mae < result.best_val_mae) {
      result.best_val_mae = selection_mae;
      result.best_epoch = epoch;
      best = model;
    }
  }

  model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json net_to_json(const nn::DenseNet& net) {
  ordered_json layers = ordered_json::array();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    ordered_json layer;
    std::vector<double> w(net.w[l].data(), net.w[l].data() + net.w[l].size());  // column-major
    std::vector<double> b(net.b[l].data(), net.b[l].data() + net.b[l].size());
    layer["w"] = w;
    layer["b"] = b;
    layers.push_back(std::move(layer));
  }
  return layers;
}

nn::DenseNet net_from_json(const ordered_json& layers, const std::vector<nn::LayerSpec>& spec) {
  if (!layers.is_array() || layers.size() != spec.size()) {
    throw IncompatibleCheckpoint("stored network depth does not match architecture");
  }
  nn::DenseNet net;
  net.layers = spec;
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const auto w = layers[l].at("w").get<std::vector<double>>();
    const auto b = layers[l].at("b").get<std::vector<double>>();
    const std::size_t want_w = static_cast<std::size_t>(spec[l].fan_in) * spec[l].fan_out;
    if (w.size() != want_w || b.size() != static_cast<std::size_t>(spec[l].fan_out)) {
      throw IncompatibleCheckpoint("stored layer size does not match architecture");
    }
    Matrix wm(spec[l].fan_in, spec[l].fan_out);
    std::copy(w.begin(), w.end(), wm.data());
    net.w.push_back(std::move(wm));
    net.b.push_back(Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())));
  }
  return net;
}

constexpr const char* kCheckpointSchema = "tse-ckpt/1";

}  // namespace

void save_checkpoint(const std::string& path, const TseModel& model, const ScalingParams& scaling,
                     const TrainConfig& tcfg, const FitResult& fit_result) {
  ordered_json doc;
  doc["schema"] = kCheckpointSchema;
  doc["arch"] = {{"kind", model_kind_name(model.kind)},
                 {"hero_pool", model.cfg.hero_pool},
                 {"heroes_per_match", model.cfg.heroes_per_match},
                 {"item_types", model.cfg.item_types},
                 {"subnet_width", model.cfg.subnet_width},
                 {"subnet_depth", model.cfg.subnet_depth},
                 {"glo_width", model.cfg.glo_width},
                 {"glo_depth", model.cfg.glo_depth},
                 {"comb_width", model.cfg.comb_width},
                 {"comb_depth", model.cfg.comb_depth},
                 {"dropout", model.cfg.dropout},
                 {"mu", model.cfg.mu},
                 {"nu", model.cfg.nu}};
  doc["scaling"] = {{"r", scaling.r},
                    {"alpha", scaling.alpha},
                    {"y_min", scaling.y_min},
                    {"y_max", scaling.y_max}};
  doc["feature_scaling"] = {{"slice_mean", model.scaler.slice_mean},
                            {"slice_inv_std", model.scaler.slice_inv_std},
                            {"hero_mean", model.scaler.hero_mean},
                            {"hero_inv_std", model.scaler.hero_inv_std}};
  ordered_json params;
  if (model.has_ind()) {
    ordered_json subnets = ordered_json::array();
    for (const auto& s : model.subnets) subnets.push_back(net_to_json(s));
    params["subnets"] = std::move(subnets);
  }
  if (model.has_glo()) params["glo"] = net_to_json(model.glo);
  if (model.kind == ModelKind::full) params["comb"] = net_to_json(model.comb);
  doc["params"] = std::move(params);
  doc["train_config"] = {{"epochs", tcfg.epochs},
                         {"batch_size", tcfg.batch_size},
                         {"lr", tcfg.lr},
                         {"eval_batch_size", tcfg.eval_batch_size},
                         {"best_epoch", fit_result.best_epoch},
                         {"best_val_mae", fit_result.best_val_mae}};
  doc["seed"] = tcfg.seed;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("IoError", "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("IoError", "cannot open: " + path);
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("schema", "") != kCheckpointSchema) {
      throw IncompatibleCheckpoint("unsupported checkpoint schema");
    }
    const auto& arch = doc.at("arch");
    Checkpoint ckpt;
    TseConfig cfg;
    cfg.hero_pool = arch.at("hero_pool").get<int>();
    cfg.heroes_per_match = arch.at("heroes_per_match").get<int>();
    cfg.item_types = arch.at("item_types").get<int>();
    cfg.subnet_width = arch.at("subnet_width").get<int>();
    cfg.subnet_depth = arch.at("subnet_depth").get<int>();
    cfg.glo_width = arch.at("glo_width").get<int>();
    cfg.glo_depth = arch.at("glo_depth").get<int>();
    cfg.comb_width = arch.at("comb_width").get<int>();
    cfg.comb_depth = arch.at("comb_depth").get<int>();
    cfg.dropout = arch.at("dropout").get<double>();
    cfg.mu = arch.at("mu").get<double>();
    cfg.nu = arch.at("nu").get<double>();
    validate_config(cfg);
    const ModelKind kind = parse_model_kind(arch.at("kind").get<std::string>());

    TseModel model;
    model.cfg = cfg;
    model.kind = kind;
    const auto& fs = doc.at("feature_scaling");
    model.scaler.slice_mean = fs.at("slice_mean").get<std::vector<double>>();
    model.scaler.slice_inv_std = fs.at("slice_inv_std").get<std::vector<double>>();
    model.scaler.hero_mean = fs.at("hero_mean").get<std::vector<double>>();
    model.scaler.hero_inv_std = fs.at("hero_inv_std").get<std::vector<double>>();
    if (static_cast<int>(model.scaler.slice_mean.size()) != cfg.slice_dims() ||
        static_cast<int>(model.scaler.hero_mean.size()) != cfg.subnet_input_dims()) {
      throw IncompatibleCheckpoint("feature scaling width does not match architecture");
    }

    const auto& params = doc.at("params");
    if (model.has_ind()) {
      const auto& subnets = params.at("subnets");
      if (!subnets.is_array() || static_cast<int>(subnets.size()) != cfg.hero_pool) {
        throw IncompatibleCheckpoint("subnet count does not match hero pool");
      }
      const auto spec = subnet_spec(cfg);
      model.subnets.reserve(cfg.hero_pool);
      for (const auto& s : subnets) model.subnets.push_back(net_from_json(s, spec));
    }
    if (model.has_glo()) model.glo = net_from_json(params.at("glo"), glo_spec(cfg));
    if (kind == ModelKind::full) model.comb = net_from_json(params.at("comb"), comb_spec(cfg));

    const auto& sc = doc.at("scaling");
    ckpt.scaling.r = sc.at("r").get<double>();
    ckpt.scaling.alpha = sc.at("alpha").get<double>();
    ckpt.scaling.y_min = sc.at("y_min").get<double>();
    ckpt.scaling.y_max = sc.at("y_max").get<double>();

    const auto& tc = doc.at("train_config");
    ckpt.train_config.epochs = tc.at("epochs").get<int>();
    ckpt.train_config.batch_size = tc.at("batch_size").get<int>();
    ckpt.train_config.lr = tc.at("lr").get<double>();
    ckpt.train_config.eval_batch_size = tc.at("eval_batch_size").get<int>();
    ckpt.train_config.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.best_epoch = tc.at("best_epoch").get<int>();
    ckpt.best_val_mae = tc.at("best_val_mae").get<double>();
    ckpt.model = std::move(model);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint is missing fields: ") + e.what());
  }
}

}  // namespace mslice
