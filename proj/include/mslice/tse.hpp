// Two-branch time-slice evaluation model.
//
// The individual branch runs one small per-hero subnet for every hero slot in
// the slice and combines the ten outputs as (sum of own team) - (sum of enemy
// team). The global branch feeds the whole slice vector through one wide
// net. A small combiner mixes the two branch outputs into the final scaled
// prediction. All three parts train jointly against the scaled discounted
// target, with auxiliary terms keeping each branch predictive on its own.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mslice/dataset.hpp"
#include "mslice/nn.hpp"

namespace mslice {

struct TseConfig {
  int hero_pool = 114;  // number of distinct hero ids, one subnet each
  int heroes_per_match = 10;
  int item_types = 244;

  int subnet_width = 40;
  int subnet_depth = 3;
  int glo_width = 400;
  int glo_depth = 4;
  int comb_width = 4;
  int comb_depth = 3;

  double dropout = 0.5;
  double mu = 0.3;  // weight of the individual-branch loss term
  double nu = 0.3;  // weight of the global-branch loss term

  // Per-hero subnet input: the hero block with hero_id swapped for game time.
  int subnet_input_dims() const { return 1 + 5 + 13 + item_types; }
  int slice_dims() const { return FeatureSchema{heroes_per_match, item_types}.slice_dims(); }
};

enum class ModelKind { full, ind_only, glo_only };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct UnknownHero : DataError {
  explicit UnknownHero(int hero_id)
      : DataError("UnknownHero", "hero id " + std::to_string(hero_id) + " has no subnet") {}
};

// Per-dimension affine standardization applied to network inputs when batches
// are built. Raw counters (gold, experience) are four orders of magnitude
// apart from binary dims; without this the tanh heads start saturated. Slice
// stats feed the global branch; hero stats are pooled over all ten hero slots
// so a hero's representation does not depend on its slot.
struct FeatureScaler {
  std::vector<double> slice_mean, slice_inv_std;  // slice_dims entries
  std::vector<double> hero_mean, hero_inv_std;    // subnet_input_dims entries

  bool empty() const { return slice_mean.empty(); }
};

FeatureScaler identity_scaler(const TseConfig& cfg);
FeatureScaler fit_feature_scaler(std::span<const TimeSlice> train_slices, const TseConfig& cfg);

struct TseModel {
  TseConfig cfg;
  ModelKind kind = ModelKind::full;
  std::vector<nn::DenseNet> subnets;  // indexed by hero_id - 1; empty for glo_only
  nn::DenseNet glo;                   // empty for ind_only
  nn::DenseNet comb;                  // only present for full
  FeatureScaler scaler;               // identity until fitted

  bool has_ind() const { return kind != ModelKind::glo_only; }
  bool has_glo() const { return kind != ModelKind::ind_only; }
  std::size_t param_count() const;
};

TseModel init_tse(const TseConfig& cfg, ModelKind kind, std::uint64_t seed);

// A batch ready for the network: columns are slices. Hero slots are grouped
// by hero id so each subnet runs once per batch on all its rows.
struct HeroGroup {
  int hero_id = 0;            // 1-based
  std::vector<int> cols;      // batch column of each row
  std::vector<double> signs;  // +1 own team (slots 0-4), -1 enemy (slots 5-9)
  nn::Matrix input;           // subnet_input_dims x rows
};

struct SliceBatch {
  nn::Matrix x;  // slice_dims x n, standardized
  nn::Matrix y;  // 1 x n scaled targets
  std::vector<HeroGroup> groups;  // ascending hero id
};

// Extracts one hero block with the hero_id dimension replaced by game time.
std::vector<double> subnet_input(const TimeSlice& slice, int hero_index, const TseConfig& cfg);

SliceBatch build_batch(std::span<const TimeSlice> slices, std::span<const std::size_t> index,
                       const TseConfig& cfg, const ScalingParams& scaling,
                       const FeatureScaler& scaler);

nn::Matrix ind_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng = nullptr,
                       std::vector<nn::ForwardCache>* caches = nullptr);
nn::Matrix glo_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng = nullptr, nn::ForwardCache* cache = nullptr);

// Forward state kept for the backward pass.
struct TseForward {
  nn::Matrix y_ind;  // 1 x n, zero-size when the branch is absent
  nn::Matrix y_glo;
  nn::Matrix y_hat;  // final output; aliases the active branch for single-branch kinds
  std::vector<nn::ForwardCache> group_caches;  // parallel to batch.groups
  nn::ForwardCache glo_cache;
  nn::ForwardCache comb_cache;
};

TseForward tse_forward(const TseModel& model, const SliceBatch& batch, nn::Mode mode,
                       std::mt19937_64* rng = nullptr);

struct TseLoss {
  double total = 0.0;
  double main_mae = 0.0;  // MAE of the final output against the scaled target
  double ind_mae = 0.0;
  double glo_mae = 0.0;
};

TseLoss tse_loss(const TseModel& model, const SliceBatch& batch, const TseForward& fwd);

// One optimizer slot per trainable part; subnets update lazily (only the ones
// that appeared in the batch take a step).
struct TseOptimizer {
  nn::AdamConfig cfg;
  std::vector<nn::AdamState> subnets;
  nn::AdamState glo;
  nn::AdamState comb;
};

TseOptimizer make_optimizer(const TseModel& model, const nn::AdamConfig& cfg);

// Full backward + optimizer step for one batch; returns the loss at the
// pre-step parameters.
TseLoss tse_train_step(TseModel& model, TseOptimizer& opt, const SliceBatch& batch,
                       std::mt19937_64& rng);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int eval_batch_size = 1024;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double val_mse = 0.0;
  double val_rescaled_mae = 0.0;
};

struct FitResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_mae = 0.0;
};

// Trains in place; on return the model holds the parameters of the epoch with
// the lowest validation MAE. Throws DivergenceError if the loss stops being
// finite.
FitResult fit(TseModel& model, std::span<const TimeSlice> train, std::span<const TimeSlice> val,
              const ScalingParams& scaling, const TrainConfig& tcfg);

// Eval-mode predictions in scaled space, one per slice.
std::vector<double> predict_scaled(const TseModel& model, std::span<const TimeSlice> slices,
                                   const ScalingParams& scaling, int batch_size = 1024);

struct SlicePrediction {
  double t_hat_min = 0.0;
  int r_hat = 0;  // +1, -1, or 0 = unknown
  double y_hat_rescaled = 0.0;
};

SlicePrediction predict_slice(const TseModel& model, const TimeSlice& slice,
                              const ScalingParams& scaling);

struct EvalMetrics {
  double mae_scaled = 0.0;
  double mse_scaled = 0.0;
  double mae_rescaled = 0.0;
  double time_mae_min = 0.0;    // MAE of recovered remaining time, minutes
  double winner_accuracy = 0.0; // sign matches; a zero prediction counts as wrong
  std::size_t n = 0;
};

EvalMetrics compute_metrics(const TseModel& model, std::span<const TimeSlice> slices,
                            const ScalingParams& scaling);
EvalMetrics metrics_from_predictions(std::span<const double> y_hat_scaled,
                                     std::span<const TimeSlice> slices,
                                     const ScalingParams& scaling);

void save_checkpoint(const std::string& path, const TseModel& model, const ScalingParams& scaling,
                     const TrainConfig& tcfg, const FitResult& fit_result);

struct Checkpoint {
  TseModel model;
  ScalingParams scaling;
  TrainConfig train_config;
  int best_epoch = 0;
  double best_val_mae = 0.0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mslice
