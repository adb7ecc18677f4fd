#ifndef MSLICE_DATASET_HPP
#define MSLICE_DATASET_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mslice/records.hpp"

namespace mslice {

// Layout of a slice feature vector: one leading game-time dimension, then one
// block per hero. Hero blocks hold [hero_id, life_state, gold, experience,
// pos_x, pos_y, 13 statistics, item_types item-count dims]; team A blocks
// come first.
struct FeatureSchema {
  int heroes_per_slice = 10;
  int item_types = 244;

  static constexpr int kAttributeDims = 5;
  static constexpr int kStatisticDims = 13;

  int hero_block_dims() const { return 1 + kAttributeDims + kStatisticDims + item_types; }
  int slice_dims() const { return 1 + heroes_per_slice * hero_block_dims(); }
  int block_offset(int hero_index) const { return 1 + hero_index * hero_block_dims(); }

  bool operator==(const FeatureSchema&) const = default;
};

struct TimeSlice {
  std::string match_id;
  int slice_time_s = 0;
  double remaining_time_min = 0.0;  // t
  int result = +1;                  // R: +1 team A won, -1 team B won
  std::vector<float> features;
};

inline double default_discount_rate() { return std::exp(1.0) - 1.0; }  // r = e-1, alpha = 1

// alpha = ln(1+r) plus the target range observed on the training split.
struct ScalingParams {
  double r = default_discount_rate();
  double alpha = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;

  static ScalingParams from_rate(double r);
};

// Discounted evaluation DE(R, t) = R / (alpha * t); sign tracks the winner and
// magnitude grows as the match nears its end.
double de_ts(int result, double t_min, double alpha);

// Regression target y = 1/DE = alpha * t * R. Undefined at t <= 0; slices at
// exactly t = 0 get their target from slice_target_y below.
double target_y(int result, double t_min, double alpha);

// alpha * t * R for t >= 0. Same formula as target_y but total: the zero-
// remaining-time slice of a match whose duration is a multiple of the slice
// period is real data with target 0.
double slice_target_y(const TimeSlice& slice, double alpha);

// Affine map of [y_min, y_max] onto [-1, 1]; out-of-range values extrapolate
// linearly, no clamping.
double scale_y(double y, const ScalingParams& p);
double rescale_y(double y_hat, const ScalingParams& p);

struct Prediction {
  double t_hat_min = 0.0;
  int r_hat = 0;  // sign of the rescaled prediction; 0 means unknown
};

Prediction extract_prediction(double y_hat_rescaled, double alpha);

struct MissingHeroState : DataError {
  int hero_id;
  int slice_time_s;
  MissingHeroState(int hero, int t)
      : DataError("MissingHeroState", "hero " + std::to_string(hero) +
                                          " has no record at or before t=" + std::to_string(t)),
        hero_id(hero), slice_time_s(t) {}
};

// One slice per full period of game time; each hero block is populated from
// the latest record at or before the slice time.
std::vector<TimeSlice> build_slices(const MatchTimeline& timeline, const FeatureSchema& schema,
                                    int period_s = 60);

// y range over the training slices only. The result is degenerate
// (y_min == y_max) for single-valued targets; scale_y rejects that downstream.
ScalingParams fit_scaling(std::span<const TimeSlice> train_slices,
                          double r = default_discount_rate());

// Keeps slices whose game-time percentage lies in [lo_pct, hi_pct], measured
// against their own match duration.
std::vector<TimeSlice> filter_interval(std::span<const TimeSlice> slices, double lo_pct,
                                       double hi_pct);

struct SplitPlan {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::vector<std::vector<std::string>> folds;
  std::uint64_t seed = 0;
};

SplitPlan split_matches(std::vector<std::string> match_ids, double train_frac, double val_frac,
                        double test_frac, std::uint64_t seed);
SplitPlan kfold_matches(std::vector<std::string> match_ids, int k, std::uint64_t seed);

// Dataset files. CSV: header `match_id,slice_time_s,remaining_time_min,result,
// f0..fN`. Binary: magic "MSLC", little-endian, faster to reload. Both
// round-trip exactly.
void write_dataset_csv(const std::string& path, std::span<const TimeSlice> slices);
std::vector<TimeSlice> read_dataset_csv(const std::string& path);
void write_dataset_bin(const std::string& path, std::span<const TimeSlice> slices);
std::vector<TimeSlice> read_dataset_bin(const std::string& path);

}  // namespace mslice

#endif
