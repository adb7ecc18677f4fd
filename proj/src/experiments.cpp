#include "mslice/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mslice {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> list_corpus_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("IoError", "not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

CorpusLoad load_corpus(std::vector<std::string> files, const IngestConfig& icfg, int period_s) {
  std::sort(files.begin(), files.end());
  CorpusLoad out;
  const FeatureSchema schema{2 * icfg.team_size, icfg.item_types};
  std::map<std::string, std::uint64_t> content_hash;  // match_id -> file hash

  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      out.rejected.push_back({file, "IoError: cannot open"});
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    ParseResult parsed = parse_interval_stream(text, icfg);
    if (!parsed.issues.empty()) {
      const LineIssue& issue = parsed.issues.front();
      out.rejected.push_back({file, std::string(issue.class_name()) + " at line " +
                                        std::to_string(issue.line_no) + ": " + issue.detail});
      continue;
    }
    if (!parsed.meta) {
      out.rejected.push_back({file, "MissingMeta: no meta line"});
      continue;
    }
    try {
      MatchTimeline timeline =
          assemble_timeline(std::move(parsed.records), *parsed.meta, icfg);
      std::vector<TimeSlice> slices = build_slices(timeline, schema, period_s);
      if (content_hash.count(timeline.match_id)) {
        out.rejected.push_back({file, "DuplicateMatch: " + timeline.match_id});
        continue;
      }
      content_hash[timeline.match_id] = fnv1a64(text);
      MatchSlices m;
      m.match_id = timeline.match_id;
      m.duration_s = timeline.duration_s;
      m.result = timeline.result_sign();
      m.slices = std::move(slices);
      out.matches.push_back(std::move(m));
    } catch (const DataError& e) {
      out.rejected.push_back({file, e.error_class + ": " + e.what()});
    }
  }

  std::sort(out.matches.begin(), out.matches.end(),
            [](const MatchSlices& a, const MatchSlices& b) { return a.match_id < b.match_id; });
  std::uint64_t id_state = 0xcbf29ce484222325ull;
  for (const auto& m : out.matches) {
    id_state = fnv1a64(m.match_id, id_state);
    id_state = fnv1a64(to_hex(content_hash[m.match_id]), id_state);
  }
  out.dataset_id = to_hex(id_state);
  return out;
}

std::vector<TimeSlice> gather_slices(std::span<const MatchSlices> matches,
                                     std::span<const std::string> match_ids) {
  const std::set<std::string> wanted(match_ids.begin(), match_ids.end());
  std::vector<TimeSlice> slices;
  for (const auto& m : matches) {
    if (wanted.count(m.match_id)) {
      slices.insert(slices.end(), m.slices.begin(), m.slices.end());
    }
  }
  return slices;
}

std::vector<TimeSlice> gather_all_slices(std::span<const MatchSlices> matches) {
  std::vector<TimeSlice> slices;
  for (const auto& m : matches) slices.insert(slices.end(), m.slices.begin(), m.slices.end());
  return slices;
}

double blind_constant(std::span<const double> y_scaled) {
  if (y_scaled.empty()) throw EmptyDataset("no targets for the blind baseline");
  std::vector<double> v(y_scaled.begin(), y_scaled.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string config_hash(const ExperimentConfig& cfg, const std::string& dataset_id) {
  std::string s;
  auto add = [&s](const std::string& tag, const std::string& val) {
    s += tag;
    s += '=';
    s += val;
    s += ';';
  };
  const TseConfig& m = cfg.model;
  add("hero_pool", std::to_string(m.hero_pool));
  add("heroes", std::to_string(m.heroes_per_match));
  add("items", std::to_string(m.item_types));
  add("sub", std::to_string(m.subnet_width) + "x" + std::to_string(m.subnet_depth));
  add("glo", std::to_string(m.glo_width) + "x" + std::to_string(m.glo_depth));
  add("comb", std::to_string(m.comb_width) + "x" + std::to_string(m.comb_depth));
  add("dropout", format_double(m.dropout));
  add("mu", format_double(m.mu));
  add("nu", format_double(m.nu));
  add("epochs", std::to_string(cfg.train.epochs));
  add("batch", std::to_string(cfg.train.batch_size));
  add("lr", format_double(cfg.train.lr));
  add("seed", std::to_string(cfg.train.seed));
  add("split", format_double(cfg.train_frac) + ":" + format_double(cfg.val_frac) + ":" +
                   format_double(cfg.test_frac));
  add("interval", format_double(cfg.interval_lo) + ":" + format_double(cfg.interval_hi));
  add("rate", format_double(cfg.discount_rate));
  add("kfold", std::to_string(cfg.kfold));
  add("dataset", dataset_id);
  return to_hex(fnv1a64(s));
}

std::string resolve_run_dir(const std::string& out_root, const std::string& kind,
                            std::uint64_t seed, const std::string& hash) {
  std::string root = out_root;
  if (const char* env = std::getenv("MSLICE_RUN_DIR"); env && *env) root = env;
  if (root.empty()) throw ConfigError("no output directory (set --out or MSLICE_RUN_DIR)");
  fs::path dir = fs::path(root) / (kind + "-s" + std::to_string(seed) + "-" + hash.substr(0, 8));
  fs::create_directories(dir);
  return dir.string();
}

namespace {

std::vector<double> scaled_targets(std::span<const TimeSlice> slices,
                                   const ScalingParams& scaling) {
  std::vector<double> y;
  y.reserve(slices.size());
  for (const auto& s : slices) y.push_back(scale_y(slice_target_y(s, scaling.alpha), scaling));
  return y;
}

void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << "model,mae,mse,rescaled_mae_min,time_mae_min,winner_accuracy,n\n";
  for (const auto& row : rows) {
    const EvalMetrics& m = row.metrics;
    out << row.name << ',' << format_double(m.mae_scaled) << ',' << format_double(m.mse_scaled)
        << ',' << format_double(m.mae_rescaled) << ',' << format_double(m.time_mae_min) << ','
        << format_double(m.winner_accuracy) << ',' << m.n << '\n';
  }
}

void write_history_csv(const std::string& path, const FitResult& fit_result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << "epoch,train_loss,train_mae,val_mae,val_mse,val_rescaled_mae\n";
  for (const auto& e : fit_result.history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_mae)
        << ',' << format_double(e.val_mae) << ',' << format_double(e.val_mse) << ','
        << format_double(e.val_rescaled_mae) << '\n';
  }
}

ordered_json metrics_to_json(const EvalMetrics& m) {
  return {{"mae", m.mae_scaled},          {"mse", m.mse_scaled},
          {"rescaled_mae_min", m.mae_rescaled}, {"time_mae_min", m.time_mae_min},
          {"winner_accuracy", m.winner_accuracy}, {"n", m.n}};
}

ordered_json scaling_to_json(const ScalingParams& p) {
  return {{"r", p.r}, {"alpha", p.alpha}, {"y_min", p.y_min}, {"y_max", p.y_max}};
}

void write_json(const std::string& path, const ordered_json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace

HoldoutResult run_holdout(const CorpusLoad& corpus, const ExperimentConfig& cfg,
                          const std::string& out_root) {
  if (corpus.matches.empty()) throw EmptyDataset("corpus has no valid matches");
  HoldoutResult result;
  result.dataset_id = corpus.dataset_id;
  const std::string hash = config_hash(cfg, corpus.dataset_id);
  result.run_dir = resolve_run_dir(out_root, "holdout", cfg.train.seed, hash);

  std::vector<std::string> ids;
  for (const auto& m : corpus.matches) ids.push_back(m.match_id);
  result.split =
      split_matches(ids, cfg.train_frac, cfg.val_frac, cfg.test_frac, cfg.train.seed);

  auto windowed = [&](std::span<const std::string> subset) {
    const std::vector<TimeSlice> all = gather_slices(corpus.matches, subset);
    return filter_interval(all, cfg.interval_lo, cfg.interval_hi);
  };
  const std::vector<TimeSlice> train = windowed(result.split.train);
  const std::vector<TimeSlice> val = windowed(result.split.val);
  const std::vector<TimeSlice> test = windowed(result.split.test);
  if (train.empty()) throw EmptyDataset("no training slices in the interval window");
  if (test.empty()) throw EmptyDataset("no test slices in the interval window");

  result.scaling = fit_scaling(train, cfg.discount_rate);
  const FeatureScaler scaler = fit_feature_scaler(train, cfg.model);

  // Blind baseline: constant minimizing train MAE, evaluated like a model.
  const double constant = blind_constant(scaled_targets(train, result.scaling));
  std::vector<double> blind_pred(test.size(), constant);
  result.rows.push_back({"blind", metrics_from_predictions(blind_pred, test, result.scaling)});

  const std::pair<std::string, ModelKind> kinds[] = {
      {"ind", ModelKind::ind_only}, {"glo", ModelKind::glo_only}, {"tse", ModelKind::full}};
  for (const auto& [name, kind] : kinds) {
    TseModel model = init_tse(cfg.model, kind, cfg.train.seed);
    model.scaler = scaler;
    FitResult fitres = fit(model, train, val, result.scaling, cfg.train);
    result.rows.push_back({name, compute_metrics(model, test, result.scaling)});
    write_history_csv((fs::path(result.run_dir) / ("history_" + name + ".csv")).string(), fitres);
    if (kind == ModelKind::full) {
      save_checkpoint((fs::path(result.run_dir) / "checkpoint.json").string(), model,
                      result.scaling, cfg.train, fitres);
    }
    result.history[name] = std::move(fitres);
  }

  write_metrics_csv((fs::path(result.run_dir) / "metrics.csv").string(), result.rows);

  ordered_json summary;
  summary["schema"] = "run-summary/1";
  summary["kind"] = "holdout";
  summary["seed"] = cfg.train.seed;
  summary["config_hash"] = hash;
  summary["dataset_id"] = corpus.dataset_id;
  summary["interval"] = {{"lo", cfg.interval_lo}, {"hi", cfg.interval_hi}};
  summary["scaling"] = scaling_to_json(result.scaling);
  summary["split"] = {{"train", result.split.train},
                      {"val", result.split.val},
                      {"test", result.split.test}};
  ordered_json rows = ordered_json::array();
  for (const auto& row : result.rows) {
    ordered_json r = metrics_to_json(row.metrics);
    r["name"] = row.name;
    rows.push_back(std::move(r));
  }
  summary["rows"] = std::move(rows);
  ordered_json best;
  for (const auto& [name, fitres] : result.history) {
    best[name] = {{"epoch", fitres.best_epoch}, {"val_mae", fitres.best_val_mae}};
  }
  summary["best"] = std::move(best);
  write_json((fs::path(result.run_dir) / "summary.json").string(), summary);
  return result;
}

KfoldResult run_kfold(const CorpusLoad& corpus, const ExperimentConfig& cfg,
                      const std::string& out_root) {
  if (corpus.matches.empty()) throw EmptyDataset("corpus has no valid matches");
  KfoldResult result;
  const std::string hash = config_hash(cfg, corpus.dataset_id);
  result.run_dir = resolve_run_dir(out_root, "kfold", cfg.train.seed, hash);

  std::vector<std::string> ids;
  for (const auto& m : corpus.matches) ids.push_back(m.match_id);
  const SplitPlan folds = kfold_matches(ids, cfg.kfold, cfg.train.seed);

  for (int f = 0; f < cfg.kfold; ++f) {
    std::vector<std::string> train_pool;
    for (int g = 0; g < cfg.kfold; ++g) {
      if (g == f) continue;
      train_pool.insert(train_pool.end(), folds.folds[g].begin(), folds.folds[g].end());
    }
    // Carve a tenth of the training matches for epoch selection.
    const SplitPlan carve = split_matches(train_pool, 0.9, 0.1, 0.0, cfg.train.seed + f);
    auto windowed = [&](std::span<const std::string> subset) {
      const std::vector<TimeSlice> all = gather_slices(corpus.matches, subset);
      return filter_interval(all, cfg.interval_lo, cfg.interval_hi);
    };
    const std::vector<TimeSlice> train = windowed(carve.train);
    const std::vector<TimeSlice> val = windowed(carve.val);
    const std::vector<TimeSlice> test = windowed(folds.folds[f]);
    if (train.empty() || test.empty()) throw EmptyDataset("fold has no slices in the window");

    const ScalingParams scaling = fit_scaling(train, cfg.discount_rate);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + f;
    TseModel model = init_tse(cfg.model, ModelKind::full, tc.seed);
    model.scaler = fit_feature_scaler(train, cfg.model);
    fit(model, train, val, scaling, tc);
    result.folds.push_back(compute_metrics(model, test, scaling));
  }

  auto mean_std = [&](auto pick, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& m : result.folds) sum += pick(m);
    mean = sum / result.folds.size();
    double ss = 0.0;
    for (const auto& m : result.folds) ss += (pick(m) - mean) * (pick(m) - mean);
    sd = result.folds.size() > 1 ? std::sqrt(ss / (result.folds.size() - 1)) : 0.0;
  };
  mean_std([](const EvalMetrics& m) { return m.mae_scaled; }, result.mean_mae, result.std_mae);
  mean_std([](const EvalMetrics& m) { return m.mse_scaled; }, result.mean_mse, result.std_mse);
  mean_std([](const EvalMetrics& m) { return m.mae_rescaled; }, result.mean_rescaled,
           result.std_rescaled);

  std::ofstream out(fs::path(result.run_dir) / "kfold.csv", std::ios::binary);
  if (!out) throw DataError("IoError", "cannot write kfold.csv");
  out << "fold,mae,mse,rescaled_mae_min,time_mae_min,winner_accuracy,n\n";
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const EvalMetrics& m = result.folds[f];
    out << f << ',' << format_double(m.mae_scaled) << ',' << format_double(m.mse_scaled) << ','
        << format_double(m.mae_rescaled) << ',' << format_double(m.time_mae_min) << ','
        << format_double(m.winner_accuracy) << ',' << m.n << '\n';
  }
  out << "mean," << format_double(result.mean_mae) << ',' << format_double(result.mean_mse) << ','
      << format_double(result.mean_rescaled) << ",,,\n";
  out << "std," << format_double(result.std_mae) << ',' << format_double(result.std_mse) << ','
      << format_double(result.std_rescaled) << ",,,\n";
  out.close();

  ordered_json summary;
  summary["schema"] = "run-summary/1";
  summary["kind"] = "kfold";
  summary["seed"] = cfg.train.seed;
  summary["config_hash"] = hash;
  summary["dataset_id"] = corpus.dataset_id;
  summary["k"] = cfg.kfold;
  summary["mean"] = {{"mae", result.mean_mae},
                     {"mse", result.mean_mse},
                     {"rescaled_mae_min", result.mean_rescaled}};
  summary["std"] = {{"mae", result.std_mae},
                    {"mse", result.std_mse},
                    {"rescaled_mae_min", result.std_rescaled}};
  ordered_json fold_rows = ordered_json::array();
  for (const auto& m : result.folds) fold_rows.push_back(metrics_to_json(m));
  summary["folds"] = std::move(fold_rows);
  write_json((fs::path(result.run_dir) / "summary.json").string(), summary);
  return result;
}

std::vector<TraceRow> trace_match(const TseModel& model, const ScalingParams& scaling,
                                  const MatchSlices& match) {
  const std::vector<double> y_hat = predict_scaled(model, match.slices, scaling);
  std::vector<TraceRow> rows;
  rows.reserve(match.slices.size());
  for (std::size_t i = 0; i < match.slices.size(); ++i) {
    const TimeSlice& s = match.slices[i];
    TraceRow row;
    row.slice_time_s = s.slice_time_s;
    row.t_true_min = s.remaining_time_min;
    row.y_true = slice_target_y(s, scaling.alpha);
    row.y_hat_rescaled = rescale_y(y_hat[i], scaling);
    const Prediction p = extract_prediction(row.y_hat_rescaled, scaling.alpha);
    row.t_hat_min = p.t_hat_min;
    row.r_hat = p.r_hat;
    row.past_half = 2 * s.slice_time_s >= match.duration_s;
    rows.push_back(row);
  }
  return rows;
}

void write_trace_csv(const std::string& path, std::span<const TraceRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << "slice_time_s,remaining_time_min,y_true,y_hat_rescaled,t_hat_min,r_hat,past_half\n";
  for (const auto& r : rows) {
    out << r.slice_time_s << ',' << format_double(r.t_true_min) << ',' << format_double(r.y_true)
        << ',' << format_double(r.y_hat_rescaled) << ',' << format_double(r.t_hat_min) << ','
        << r.r_hat << ',' << (r.past_half ? 1 : 0) << '\n';
  }
}

std::vector<IntervalWindow> decile_windows() {
  std::vector<IntervalWindow> w;
  for (int i = 0; i < 10; ++i) w.push_back({10.0 * i, 10.0 * (i + 1)});
  return w;
}

std::vector<IntervalWindow> suffix_windows() {
  std::vector<IntervalWindow> w;
  for (int i = 0; i < 10; ++i) w.push_back({10.0 * i, 100.0});
  return w;
}

IntervalStudyResult run_interval_study(const CorpusLoad& corpus,
                                       std::span<const IntervalWindow> windows,
                                       const ExperimentConfig& cfg, const std::string& out_root) {
  if (corpus.matches.empty()) throw EmptyDataset("corpus has no valid matches");
  IntervalStudyResult result;
  const std::string hash = config_hash(cfg, corpus.dataset_id);
  result.run_dir = resolve_run_dir(out_root, "intervals", cfg.train.seed, hash);

  std::vector<std::string> ids;
  for (const auto& m : corpus.matches) ids.push_back(m.match_id);
  const SplitPlan split =
      split_matches(ids, cfg.train_frac, cfg.val_frac, cfg.test_frac, cfg.train.seed);
  const std::vector<TimeSlice> train_all = gather_slices(corpus.matches, split.train);
  const std::vector<TimeSlice> val_all = gather_slices(corpus.matches, split.val);
  const std::vector<TimeSlice> test_all = gather_slices(corpus.matches, split.test);

  for (const IntervalWindow& w : windows) {
    const std::vector<TimeSlice> train = filter_interval(train_all, w.lo_pct, w.hi_pct);
    const std::vector<TimeSlice> val = filter_interval(val_all, w.lo_pct, w.hi_pct);
    const std::vector<TimeSlice> test = filter_interval(test_all, w.lo_pct, w.hi_pct);
    if (train.empty() || test.empty()) {
      throw EmptyDataset("window has no slices: " + format_double(w.lo_pct) + "-" +
                         format_double(w.hi_pct));
    }
    const ScalingParams scaling = fit_scaling(train, cfg.discount_rate);
    TseModel model = init_tse(cfg.model, ModelKind::glo_only, cfg.train.seed);
    model.scaler = fit_feature_scaler(train, cfg.model);
    fit(model, train, val, scaling, cfg.train);
    const EvalMetrics m = compute_metrics(model, test, scaling);
    result.rows.push_back({w, m.mae_scaled, m.mae_rescaled, train.size(), test.size()});
  }

  std::ofstream out(fs::path(result.run_dir) / "intervals.csv", std::ios::binary);
  if (!out) throw DataError("IoError", "cannot write intervals.csv");
  out << "lo_pct,hi_pct,test_mae,test_rescaled_mae_min,train_slices,test_slices\n";
  for (const auto& r : result.rows) {
    out << format_double(r.window.lo_pct) << ',' << format_double(r.window.hi_pct) << ','
        << format_double(r.test_mae) << ',' << format_double(r.test_rescaled_mae) << ','
        << r.train_slices << ',' << r.test_slices << '\n';
  }
  out.close();

  ordered_json summary;
  summary["schema"] = "run-summary/1";
  summary["kind"] = "intervals";
  summary["seed"] = cfg.train.seed;
  summary["config_hash"] = hash;
  summary["dataset_id"] = corpus.dataset_id;
  ordered_json rows = ordered_json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"lo", r.window.lo_pct},
                    {"hi", r.window.hi_pct},
                    {"test_mae", r.test_mae},
                    {"test_rescaled_mae_min", r.test_rescaled_mae},
                    {"train_slices", r.train_slices},
                    {"test_slices", r.test_slices}});
  }
  summary["rows"] = std::move(rows);
  write_json((fs::path(result.run_dir) / "summary.json").string(), summary);
  return result;
}

AccuracyTable accuracy_by_time_percent(const TseModel& model, const ScalingParams& scaling,
                                       std::span<const MatchSlices> matches,
                                       std::span<const double> percents) {
  if (matches.empty()) throw EmptyDataset("no matches for the accuracy table");
  AccuracyTable table;
  table.percents.assign(percents.begin(), percents.end());
  table.accuracy.assign(percents.size(), 0.0);
  table.n_matches = matches.size();

  for (const auto& match : matches) {
    if (match.slices.empty()) throw EmptyDataset("match without slices: " + match.match_id);
    const std::vector<double> y_hat = predict_scaled(model, match.slices, scaling);
    for (std::size_t pi = 0; pi < percents.size(); ++pi) {
      const double target_t = percents[pi] / 100.0 * match.duration_s;
      std::size_t pick = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < match.slices.size(); ++i) {
        const double d = std::abs(match.slices[i].slice_time_s - target_t);
        if (d < best) {  // ties keep the earlier slice
          best = d;
          pick = i;
        }
      }
      const double y_resc = rescale_y(y_hat[pick], scaling);
      const int r_hat = (y_resc > 0.0) - (y_resc < 0.0);
      if (r_hat == match.slices[pick].result) table.accuracy[pi] += 1.0;
    }
  }
  for (double& a : table.accuracy) a /= static_cast<double>(matches.size());
  table.average =
      std::accumulate(table.accuracy.begin(), table.accuracy.end(), 0.0) / table.accuracy.size();
  return table;
}

void write_accuracy_csv(const std::string& path, const AccuracyTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  out << "game_time_pct,accuracy\n";
  for (std::size_t i = 0; i < table.percents.size(); ++i) {
    out << format_double(table.percents[i]) << ',' << format_double(table.accuracy[i]) << '\n';
  }
  out << "average," << format_double(table.average) << '\n';
}

}  // namespace mslice
