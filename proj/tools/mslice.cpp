// Command-line entry point: corpus synthesis, replay ingestion, model
// training, per-match prediction, and the scripted experiment runs.
//
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 divergence.
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mslice/experiments.hpp"
#include "mslice/synthgen.hpp"

namespace fs = std::filesystem;
using namespace mslice;

namespace {

std::pair<double, double> parse_interval(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("interval must look like LO:HI, got " + s);
  return {parse_double(s.substr(0, colon)), parse_double(s.substr(colon + 1))};
}

std::array<double, 3> parse_split(const std::string& s) {
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) {
    throw ConfigError("split must look like TRAIN:VAL:TEST, got " + s);
  }
  return {parse_double(s.substr(0, c1)), parse_double(s.substr(c1 + 1, c2 - c1 - 1)),
          parse_double(s.substr(c2 + 1))};
}

bool use_binary_format(const std::string& format, const std::string& path) {
  if (format == "bin") return true;
  if (format == "csv") return false;
  const std::string ext = fs::path(path).extension().string();
  return ext == ".bin" || ext == ".mslc";
}

std::vector<TimeSlice> read_dataset(const std::string& path, const std::string& format) {
  return use_binary_format(format, path) ? read_dataset_bin(path) : read_dataset_csv(path);
}

// Rebuilds per-match grouping from a flat dataset (needed for match-level
// splits). Duration is recovered from any slice of the match.
std::vector<MatchSlices> group_by_match(std::vector<TimeSlice> slices) {
  std::map<std::string, MatchSlices> by_id;
  for (auto& s : slices) {
    MatchSlices& m = by_id[s.match_id];
    if (m.slices.empty()) {
      m.match_id = s.match_id;
      m.duration_s = static_cast<int>(std::llround(s.slice_time_s + s.remaining_time_min * 60.0));
      m.result = s.result;
    }
    m.slices.push_back(std::move(s));
  }
  std::vector<MatchSlices> matches;
  matches.reserve(by_id.size());
  for (auto& [id, m] : by_id) {
    std::sort(m.slices.begin(), m.slices.end(),
              [](const TimeSlice& a, const TimeSlice& b) { return a.slice_time_s < b.slice_time_s; });
    matches.push_back(std::move(m));
  }
  return matches;
}

struct TrainFlags {
  std::string input, out, format = "auto", kind = "full", interval = "50:100",
              split = "0.9:0.05:0.05";
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch = 256;
  double lr = 1e-3, mu = 0.3, nu = 0.3, dropout = 0.5;
  int kfold = 10;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--seed", f.seed, "RNG seed (reproducibility contract)")->required();
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch", f.batch, "mini-batch size");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--mu", f.mu, "individual-branch loss weight");
  cmd->add_option("--nu", f.nu, "global-branch loss weight");
  cmd->add_option("--dropout", f.dropout, "hidden-layer dropout rate");
  cmd->add_option("--interval", f.interval, "game-time window in percent, LO:HI");
  cmd->add_option("--split", f.split, "match-level TRAIN:VAL:TEST fractions");
}

ExperimentConfig experiment_config(const TrainFlags& f) {
  ExperimentConfig cfg;
  cfg.model.mu = f.mu;
  cfg.model.nu = f.nu;
  cfg.model.dropout = f.dropout;
  cfg.train.epochs = f.epochs;
  cfg.train.batch_size = f.batch;
  cfg.train.lr = f.lr;
  cfg.train.seed = f.seed;
  const auto [lo, hi] = parse_interval(f.interval);
  cfg.interval_lo = lo;
  cfg.interval_hi = hi;
  const auto split = parse_split(f.split);
  cfg.train_frac = split[0];
  cfg.val_frac = split[1];
  cfg.test_frac = split[2];
  cfg.kfold = f.kfold;
  return cfg;
}

int cmd_synth(const std::string& out, int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_matches = n;
  cfg.seed = seed;
  const auto files = generate_corpus(cfg, out);
  std::cout << "wrote " << files.size() << " match files under " << out << "\n";
  return 0;
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& out,
               const std::string& format) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      const auto dir_files = list_corpus_files(in);
      files.insert(files.end(), dir_files.begin(), dir_files.end());
    } else {
      files.push_back(in);
    }
  }
  if (files.empty()) throw DataError("IoError", "no input files");

  const CorpusLoad corpus = load_corpus(files);
  std::ofstream report(out + ".report.txt", std::ios::binary);
  report << "accepted " << corpus.matches.size() << " matches, rejected "
         << corpus.rejected.size() << " files\n";
  report << "dataset_id " << corpus.dataset_id << "\n";
  for (const auto& [file, reason] : corpus.rejected) {
    report << "rejected " << file << ": " << reason << "\n";
    std::cerr << "rejected " << file << ": " << reason << "\n";
  }
  if (corpus.matches.empty()) {
    std::cerr << "error: no valid matches in input\n";
    return 3;
  }
  const std::vector<TimeSlice> slices = gather_all_slices(corpus.matches);
  if (use_binary_format(format, out)) {
    write_dataset_bin(out, slices);
  } else {
    write_dataset_csv(out, slices);
  }
  std::cout << "wrote " << slices.size() << " slices from " << corpus.matches.size()
            << " matches to " << out << " (dataset " << corpus.dataset_id << ")\n";
  return 0;
}

int cmd_train(const TrainFlags& f) {
  const ExperimentConfig cfg = experiment_config(f);
  const ModelKind kind = parse_model_kind(f.kind);

  const std::vector<MatchSlices> matches = group_by_match(read_dataset(f.input, f.format));
  if (matches.empty()) throw EmptyDataset("dataset is empty: " + f.input);
  std::vector<std::string> ids;
  for (const auto& m : matches) ids.push_back(m.match_id);
  const SplitPlan split =
      split_matches(ids, cfg.train_frac, cfg.val_frac, cfg.test_frac, cfg.train.seed);

  auto windowed = [&](std::span<const std::string> subset) {
    return filter_interval(gather_slices(matches, subset), cfg.interval_lo, cfg.interval_hi);
  };
  const std::vector<TimeSlice> train = windowed(split.train);
  const std::vector<TimeSlice> val = windowed(split.val);
  const std::vector<TimeSlice> test = windowed(split.test);
  if (train.empty()) throw EmptyDataset("no training slices in the interval window");

  const ScalingParams scaling = fit_scaling(train, cfg.discount_rate);
  TseModel model = init_tse(cfg.model, kind, cfg.train.seed);
  model.scaler = fit_feature_scaler(train, cfg.model);
  const FitResult fitres = fit(model, train, val, scaling, cfg.train);
  for (const auto& e : fitres.history) {
    std::cout << "epoch " << e.epoch << " train_loss " << format_double(e.train_loss)
              << " train_mae " << format_double(e.train_mae) << " val_mae "
              << format_double(e.val_mae) << " val_rescaled_mae_min "
              << format_double(e.val_rescaled_mae) << "\n";
  }

  fs::create_directories(f.out);
  save_checkpoint((fs::path(f.out) / "checkpoint.json").string(), model, scaling, cfg.train,
                  fitres);
  std::ofstream hist(fs::path(f.out) / "history.csv", std::ios::binary);
  hist << "epoch,train_loss,train_mae,val_mae,val_mse,val_rescaled_mae\n";
  for (const auto& e : fitres.history) {
    hist << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_mae)
         << ',' << format_double(e.val_mae) << ',' << format_double(e.val_mse) << ','
         << format_double(e.val_rescaled_mae) << '\n';
  }
  hist.close();

  if (!test.empty()) {
    const EvalMetrics m = compute_metrics(model, test, scaling);
    std::ofstream metrics(fs::path(f.out) / "metrics.csv", std::ios::binary);
    metrics << "model,mae,mse,rescaled_mae_min,time_mae_min,winner_accuracy,n\n";
    metrics << f.kind << ',' << format_double(m.mae_scaled) << ',' << format_double(m.mse_scaled)
            << ',' << format_double(m.mae_rescaled) << ',' << format_double(m.time_mae_min) << ','
            << format_double(m.winner_accuracy) << ',' << m.n << '\n';
    std::cout << "test mae " << format_double(m.mae_scaled) << " rescaled_mae_min "
              << format_double(m.mae_rescaled) << "\n";
  }
  std::cout << "checkpoint written to " << (fs::path(f.out) / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  IngestConfig icfg;
  icfg.hero_pool = ckpt.model.cfg.hero_pool;
  icfg.item_types = ckpt.model.cfg.item_types;
  icfg.team_size = ckpt.model.cfg.heroes_per_match / 2;
  const CorpusLoad corpus = load_corpus({input}, icfg);
  if (corpus.matches.empty()) {
    const std::string reason = corpus.rejected.empty() ? "no data" : corpus.rejected[0].second;
    throw DataError("IoError", "cannot use match file " + input + ": " + reason);
  }
  const auto rows = trace_match(ckpt.model, ckpt.scaling, corpus.matches.front());
  write_trace_csv(out, rows);
  std::cout << "wrote " << rows.size() << " trace rows to " << out << "\n";
  return 0;
}

int cmd_experiment(const std::string& kind, const std::string& input, const std::string& out,
                   const TrainFlags& f, const std::string& ckpt_path,
                   const std::string& summary_path) {
  const ExperimentConfig cfg = experiment_config(f);
  const CorpusLoad corpus = load_corpus(list_corpus_files(input));
  for (const auto& [file, reason] : corpus.rejected) {
    std::cerr << "rejected " << file << ": " << reason << "\n";
  }
  if (corpus.matches.empty()) throw EmptyDataset("corpus has no valid matches");

  if (kind == "holdout") {
    const HoldoutResult r = run_holdout(corpus, cfg, out);
    for (const auto& row : r.rows) {
      std::cout << row.name << " mae " << format_double(row.metrics.mae_scaled)
                << " rescaled_mae_min " << format_double(row.metrics.mae_rescaled) << "\n";
    }
    std::cout << "run dir: " << r.run_dir << "\n";
    return 0;
  }
  if (kind == "kfold") {
    const KfoldResult r = run_kfold(corpus, cfg, out);
    std::cout << "k=" << cfg.kfold << " mean mae " << format_double(r.mean_mae) << " (std "
              << format_double(r.std_mae) << "), mean rescaled_mae_min "
              << format_double(r.mean_rescaled) << " (std " << format_double(r.std_rescaled)
              << ")\n";
    std::cout << "run dir: " << r.run_dir << "\n";
    return 0;
  }
  if (kind == "intervals") {
    const auto windows = decile_windows();
    const IntervalStudyResult r = run_interval_study(corpus, windows, cfg, out);
    for (const auto& row : r.rows) {
      std::cout << format_double(row.window.lo_pct) << "-" << format_double(row.window.hi_pct)
                << "% test mae " << format_double(row.test_mae) << "\n";
    }
    std::cout << "run dir: " << r.run_dir << "\n";
    return 0;
  }
  if (kind == "accuracy") {
    if (ckpt_path.empty()) throw ConfigError("accuracy experiment needs --checkpoint");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::vector<MatchSlices> matches = corpus.matches;
    if (!summary_path.empty()) {
      // Restrict to the test split of a previous run.
      std::ifstream in(summary_path);
      if (!in) throw DataError("IoError", "cannot open: " + summary_path);
      nlohmann::json doc;
      in >> doc;
      const auto test_ids = doc.at("split").at("test").get<std::vector<std::string>>();
      const std::set<std::string> keep(test_ids.begin(), test_ids.end());
      std::erase_if(matches, [&](const MatchSlices& m) { return !keep.count(m.match_id); });
    }
    if (matches.empty()) throw EmptyDataset("no matches left for the accuracy table");
    std::vector<double> percents;
    for (int p = 10; p <= 90; p += 10) percents.push_back(p);
    const AccuracyTable table =
        accuracy_by_time_percent(ckpt.model, ckpt.scaling, matches, percents);
    const std::string run_dir =
        resolve_run_dir(out, "accuracy", f.seed, config_hash(cfg, corpus.dataset_id));
    write_accuracy_csv((fs::path(run_dir) / "accuracy.csv").string(), table);
    for (std::size_t i = 0; i < table.percents.size(); ++i) {
      std::cout << format_double(table.percents[i]) << "% accuracy "
                << format_double(table.accuracy[i]) << "\n";
    }
    std::cout << "average " << format_double(table.average) << "\n";
    std::cout << "run dir: " << run_dir << "\n";
    return 0;
  }
  throw ConfigError("unknown experiment kind: " + kind +
                    " (expected holdout, kfold, intervals, or accuracy)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-slice match evaluation: ingestion, synthesis, training, experiments"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out;
  int synth_n = 100;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "number of matches");
  synth->add_option("--seed", synth_seed, "RNG seed")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse match files into a slice dataset");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out, ingest_format = "auto";
  ingest->add_option("--input", ingest_inputs, "match files or directories")->required();
  ingest->add_option("--out", ingest_out, "dataset file to write")->required();
  ingest->add_option("--format", ingest_format, "csv or bin (default: by extension)");

  // train
  auto* train = app.add_subcommand("train", "train a model on a slice dataset");
  TrainFlags train_flags;
  train->add_option("--input", train_flags.input, "dataset file")->required();
  train->add_option("--out", train_flags.out, "output directory")->required();
  train->add_option("--format", train_flags.format, "csv or bin (default: by extension)");
  train->add_option("--kind", train_flags.kind, "model kind: full, ind, or glo");
  add_train_flags(train, train_flags);

  // predict
  auto* predict = app.add_subcommand("predict", "trace one match through a trained model");
  std::string predict_ckpt, predict_in, predict_out;
  predict->add_option("--checkpoint", predict_ckpt, "checkpoint JSON")->required();
  predict->add_option("--input", predict_in, "match file (JSON lines)")->required();
  predict->add_option("--out", predict_out, "trace CSV to write")->required();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a scripted experiment over a corpus");
  std::string exp_kind, exp_in, exp_out, exp_ckpt, exp_summary;
  TrainFlags exp_flags;
  exp->add_option("kind", exp_kind, "holdout, kfold, intervals, or accuracy")->required();
  exp->add_option("--input", exp_in, "corpus directory")->required();
  exp->add_option("--out", exp_out, "run output root (or MSLICE_RUN_DIR)");
  exp->add_option("--kfold", exp_flags.kfold, "fold count for kfold");
  exp->add_option("--checkpoint", exp_ckpt, "checkpoint for the accuracy experiment");
  exp->add_option("--summary", exp_summary, "summary.json restricting accuracy to its test split");
  add_train_flags(exp, exp_flags);

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(synth_out, synth_n, synth_seed);
    if (ingest->parsed()) return cmd_ingest(ingest_inputs, ingest_out, ingest_format);
    if (train->parsed()) return cmd_train(train_flags);
    if (predict->parsed()) return cmd_predict(predict_ckpt, predict_in, predict_out);
    if (exp->parsed()) {
      return cmd_experiment(exp_kind, exp_in, exp_out, exp_flags, exp_ckpt, exp_summary);
    }
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "error [" << e.error_class << "]: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
