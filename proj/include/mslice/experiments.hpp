// Scripted, reportable experiment runs over a corpus of match files:
// four-model holdout tables, match-level k-fold cross validation, per-match
// prediction traces, per-window interval studies, and winner-accuracy by game
// time percent. Every run writes CSV reports plus a JSON summary into a
// deterministically named directory, so identical inputs reproduce identical
// bytes.
#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mslice/dataset.hpp"
#include "mslice/ingest.hpp"
#include "mslice/tse.hpp"

namespace mslice {

struct MatchSlices {
  std::string match_id;
  int duration_s = 0;
  int result = 0;  // +1 team A won, -1 team B
  std::vector<TimeSlice> slices;
};

struct CorpusLoad {
  std::vector<MatchSlices> matches;  // accepted, ascending match_id
  std::vector<std::pair<std::string, std::string>> rejected;  // (file, reason)
  std::string dataset_id;  // hash of accepted file contents
};

// Every file is parsed through the real ingestion path; files that fail any
// validation are rejected whole and reported, mirroring how unparseable
// replays get dropped from a real corpus.
CorpusLoad load_corpus(std::vector<std::string> files, const IngestConfig& icfg = {},
                       int period_s = 60);

// *.jsonl files directly inside dir, sorted by name.
std::vector<std::string> list_corpus_files(const std::string& dir);

std::vector<TimeSlice> gather_slices(std::span<const MatchSlices> matches,
                                     std::span<const std::string> match_ids);
std::vector<TimeSlice> gather_all_slices(std::span<const MatchSlices> matches);

// The constant minimizing MAE against the given targets (their median).
double blind_constant(std::span<const double> y_scaled);

struct MetricsRow {
  std::string name;
  EvalMetrics metrics;
};

struct ExperimentConfig {
  TseConfig model;
  TrainConfig train;
  double train_frac = 0.9, val_frac = 0.05, test_frac = 0.05;
  double interval_lo = 50.0, interval_hi = 100.0;
  double discount_rate = default_discount_rate();
  int kfold = 10;
};

std::string config_hash(const ExperimentConfig& cfg, const std::string& dataset_id);

// Resolves the directory reports go to: MSLICE_RUN_DIR overrides out_root,
// then a deterministic `<kind>-s<seed>-<hash8>` run id is appended.
std::string resolve_run_dir(const std::string& out_root, const std::string& kind,
                            std::uint64_t seed, const std::string& hash);

struct HoldoutResult {
  std::vector<MetricsRow> rows;  // blind, ind, glo, tse
  SplitPlan split;
  ScalingParams scaling;
  std::string dataset_id;
  std::string run_dir;
  std::map<std::string, FitResult> history;  // keyed like rows
};

HoldoutResult run_holdout(const CorpusLoad& corpus, const ExperimentConfig& cfg,
                          const std::string& out_root);

struct KfoldResult {
  std::vector<EvalMetrics> folds;
  double mean_mae = 0.0, std_mae = 0.0;
  double mean_mse = 0.0, std_mse = 0.0;
  double mean_rescaled = 0.0, std_rescaled = 0.0;
  std::string run_dir;
};

KfoldResult run_kfold(const CorpusLoad& corpus, const ExperimentConfig& cfg,
                      const std::string& out_root);

struct TraceRow {
  int slice_time_s = 0;
  double t_true_min = 0.0;
  double y_true = 0.0;
  double y_hat_rescaled = 0.0;
  double t_hat_min = 0.0;
  int r_hat = 0;
  bool past_half = false;  // at or past 50% of the match
};

std::vector<TraceRow> trace_match(const TseModel& model, const ScalingParams& scaling,
                                  const MatchSlices& match);
void write_trace_csv(const std::string& path, std::span<const TraceRow> rows);

struct IntervalWindow {
  double lo_pct = 0.0;
  double hi_pct = 100.0;
};

std::vector<IntervalWindow> decile_windows();  // (0,10), (10,20), ..., (90,100)
std::vector<IntervalWindow> suffix_windows();  // (0,100), (10,100), ..., (90,100)

struct IntervalStudyRow {
  IntervalWindow window;
  double test_mae = 0.0;
  double test_rescaled_mae = 0.0;
  std::size_t train_slices = 0, test_slices = 0;
};

struct IntervalStudyResult {
  std::vector<IntervalStudyRow> rows;
  std::string run_dir;
};

// Trains one model per window on that window's slices and tests on the same
// window (held-out matches). Uses the global branch alone for runtime parity
// with how the original interval experiments were run.
IntervalStudyResult run_interval_study(const CorpusLoad& corpus,
                                       std::span<const IntervalWindow> windows,
                                       const ExperimentConfig& cfg, const std::string& out_root);

struct AccuracyTable {
  std::vector<double> percents;
  std::vector<double> accuracy;  // parallel to percents
  double average = 0.0;
  std::size_t n_matches = 0;
};

// For each percent, evaluates the slice nearest to p% of each match's
// duration; a zero (unknown) winner prediction counts as an error.
AccuracyTable accuracy_by_time_percent(const TseModel& model, const ScalingParams& scaling,
                                       std::span<const MatchSlices> matches,
                                       std::span<const double> percents);
void write_accuracy_csv(const std::string& path, const AccuracyTable& table);

}  // namespace mslice
