#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mslice/experiments.hpp"
#include "mslice/synthgen.hpp"
#include "test_support.hpp"

using namespace mslice;
using mslice::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

TseConfig toy_cfg() {
  TseConfig cfg;
  cfg.hero_pool = 4;
  cfg.heroes_per_match = 2;
  cfg.item_types = 3;
  cfg.subnet_width = 6;
  cfg.subnet_depth = 1;
  cfg.glo_width = 8;
  cfg.glo_depth = 1;
  cfg.comb_width = 4;
  cfg.comb_depth = 1;
  cfg.dropout = 0.0;
  return cfg;
}

TimeSlice make_toy_slice(const TseConfig& cfg, const std::vector<int>& hero_ids, int game_time_s,
                         double remaining_min, int result) {
  FeatureSchema schema{cfg.heroes_per_match, cfg.item_types};
  TimeSlice s;
  s.match_id = "toy";
  s.slice_time_s = game_time_s;
  s.remaining_time_min = remaining_min;
  s.result = result;
  s.features.assign(schema.slice_dims(), 0.0f);
  s.features[0] = static_cast<float>(game_time_s);
  for (int h = 0; h < cfg.heroes_per_match; ++h) {
    float* f = s.features.data() + schema.block_offset(h);
    f[0] = static_cast<float>(hero_ids[h]);
    f[2] = 100.0f * hero_ids[h];
  }
  return s;
}

// Small but real corpus on disk, loaded through the ingestion path.
CorpusLoad make_corpus(TempDir& dir, int n_matches, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_matches = n_matches;
  cfg.seed = seed;
  cfg.mean_length_min = 25.0;
  cfg.std_length_min = 5.0;
  auto files = generate_corpus(cfg, dir.str());
  return load_corpus(files);
}

ExperimentConfig small_experiment(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.model.subnet_width = 8;
  cfg.model.subnet_depth = 1;
  cfg.model.glo_width = 16;
  cfg.model.glo_depth = 1;
  cfg.model.comb_width = 4;
  cfg.model.comb_depth = 1;
  cfg.model.dropout = 0.1;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 128;
  cfg.train.seed = seed;
  cfg.interval_lo = 0.0;
  cfg.interval_hi = 100.0;
  cfg.train_frac = 0.8;
  cfg.val_frac = 0.1;
  cfg.test_frac = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("blind baseline is the median of the training targets") {
  std::vector<double> odd = {1.0, -1.0, 0.0};
  CHECK(blind_constant(odd) == 0.0);
  std::vector<double> even = {4.0, 1.0, 3.0, 2.0};
  CHECK(blind_constant(even) == doctest::Approx(2.5).epsilon(1e-12));
  std::vector<double> single = {7.0};
  CHECK(blind_constant(single) == 7.0);
  CHECK_THROWS_AS(blind_constant(std::span<const double>{}), EmptyDataset);

  // The median minimizes mean absolute error.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  std::vector<double> ys(101);
  for (auto& y : ys) y = dist(rng);
  double c = blind_constant(ys);
  auto mae_at = [&](double v) {
    double s = 0.0;
    for (double y : ys) s += std::abs(y - v);
    return s / ys.size();
  };
  CHECK(mae_at(c) <= mae_at(c + 0.1) + 1e-12);
  CHECK(mae_at(c) <= mae_at(c - 0.1) + 1e-12);
}

TEST_CASE("corpus loading accepts valid files and rejects broken ones whole") {
  TempDir dir("corpus");
  SynthConfig scfg;
  scfg.n_matches = 4;
  scfg.seed = 5;
  auto files = generate_corpus(scfg, dir.str());
  REQUIRE(files.size() == 4);

  // Break one file by chopping it mid-line.
  std::string broken = dir.str() + "/zz-broken.jsonl";
  {
    std::string text = slurp(files[1]);
    std::ofstream out(broken, std::ios::binary);
    out << text.substr(0, text.size() / 2 - 7);
  }
  // Duplicate of an accepted match under a different name.
  std::string dup = dir.str() + "/zz-dup.jsonl";
  fs::copy_file(files[0], dup);

  auto all_files = list_corpus_files(dir.str());
  CHECK(all_files.size() == 6);
  CorpusLoad corpus = load_corpus(all_files);
  CHECK(corpus.matches.size() == 4);
  REQUIRE(corpus.rejected.size() == 2);
  CHECK(corpus.rejected[0].first == broken);
  CHECK(corpus.rejected[1].first == dup);
  CHECK(corpus.rejected[1].second.find("DuplicateMatch") == 0);

  for (std::size_t i = 1; i < corpus.matches.size(); ++i) {
    CHECK(corpus.matches[i - 1].match_id < corpus.matches[i].match_id);
  }
  for (const auto& m : corpus.matches) {
    CHECK(m.slices.size() == static_cast<std::size_t>(m.duration_s / 60));
    CHECK((m.result == 1 || m.result == -1));
  }
}

TEST_CASE("the dataset id is stable under file order and reruns") {
  TempDir dir("corpus-id");
  SynthConfig scfg;
  scfg.n_matches = 3;
  scfg.seed = 9;
  auto files = generate_corpus(scfg, dir.str());

  CorpusLoad a = load_corpus(files);
  std::reverse(files.begin(), files.end());
  CorpusLoad b = load_corpus(files);
  CHECK(a.dataset_id == b.dataset_id);
  CHECK(a.dataset_id.size() == 16);

  // Appending a record to one file changes the id.
  {
    std::ofstream out(files[0], std::ios::binary | std::ios::app);
    out << "\n";
  }
  CorpusLoad c = load_corpus(files);
  CHECK(c.dataset_id != a.dataset_id);
}

TEST_CASE("slice gathering respects the match subset") {
  TseConfig cfg = toy_cfg();
  std::vector<MatchSlices> matches(2);
  matches[0].match_id = "a";
  matches[0].slices = {make_toy_slice(cfg, {1, 2}, 60, 5.0, +1),
                       make_toy_slice(cfg, {1, 2}, 120, 4.0, +1)};
  matches[1].match_id = "b";
  matches[1].slices = {make_toy_slice(cfg, {3, 4}, 60, 9.0, -1)};

  std::vector<std::string> want = {"b"};
  auto got = gather_slices(matches, want);
  REQUIRE(got.size() == 1);
  CHECK(got[0].result == -1);

  CHECK(gather_all_slices(matches).size() == 3);
  std::vector<std::string> none = {"zz"};
  CHECK(gather_slices(matches, none).empty());
}

TEST_CASE("experiment fingerprints react to any knob") {
  ExperimentConfig cfg = small_experiment(1);
  std::string base = config_hash(cfg, "dataset-a");
  CHECK(base.size() == 16);
  CHECK(config_hash(cfg, "dataset-a") == base);
  CHECK(config_hash(cfg, "dataset-b") != base);

  ExperimentConfig other = cfg;
  other.train.epochs += 1;
  CHECK(config_hash(other, "dataset-a") != base);
  other = cfg;
  other.train.seed = 2;
  CHECK(config_hash(other, "dataset-a") != base);
  other = cfg;
  other.interval_lo = 50.0;
  CHECK(config_hash(other, "dataset-a") != base);
}

TEST_CASE("run directories are deterministic and env-overridable") {
  TempDir root("runs");
  unsetenv("MSLICE_RUN_DIR");
  std::string dir = resolve_run_dir(root.str(), "holdout", 42, "0123456789abcdef");
  CHECK(fs::exists(dir));
  CHECK(fs::path(dir).filename().string() == "holdout-s42-01234567");
  CHECK(fs::path(dir).parent_path() == fs::path(root.str()));

  TempDir forced("runs-forced");
  setenv("MSLICE_RUN_DIR", forced.str().c_str(), 1);
  std::string forced_dir = resolve_run_dir(root.str(), "kfold", 7, "ffff0000ffff0000");
  unsetenv("MSLICE_RUN_DIR");
  CHECK(fs::path(forced_dir).parent_path() == fs::path(forced.str()));
  CHECK(fs::path(forced_dir).filename().string() == "kfold-s7-ffff0000");

  unsetenv("MSLICE_RUN_DIR");
  CHECK_THROWS_AS(resolve_run_dir("", "holdout", 1, "aaaabbbbccccdddd"), ConfigError);
}

TEST_CASE("match traces walk the match minute by minute") {
  TseConfig cfg = toy_cfg();
  ScalingParams scaling;
  scaling.y_min = -60.0;
  scaling.y_max = 60.0;

  TseModel model = init_tse(cfg, ModelKind::glo_only, 4);
  for (auto& w : model.glo.w) w.setZero();
  for (auto& b : model.glo.b) b.setZero();
  model.glo.b.back()(0) = std::atanh(0.2);

  MatchSlices match;
  match.match_id = "m";
  match.duration_s = 300;
  match.result = +1;
  for (int st = 60; st <= 300; st += 60) {
    match.slices.push_back(make_toy_slice(cfg, {1, 2}, st, (300 - st) / 60.0, +1));
  }

  auto rows = trace_match(model, scaling, match);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& r = rows[i];
    CHECK(r.slice_time_s == 60 * static_cast<int>(i + 1));
    CHECK(r.y_hat_rescaled == doctest::Approx(12.0).epsilon(1e-9));  // rescale(0.2)
    CHECK(r.t_hat_min == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(r.r_hat == +1);
    CHECK(r.past_half == (2 * r.slice_time_s >= 300));
    if (i > 0) CHECK(r.t_true_min < rows[i - 1].t_true_min);
  }
  CHECK(rows[0].past_half == false);
  CHECK(rows[4].past_half == true);

  TempDir dir("trace");
  std::string path = dir.str() + "/trace.csv";
  write_trace_csv(path, rows);
  std::string text = slurp(path);
  CHECK(text.find("slice_time_s,remaining_time_min,") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);  // header + 5 rows
}

TEST_CASE("winner accuracy picks the slice nearest each percent") {
  TseConfig cfg = toy_cfg();
  ScalingParams scaling;
  scaling.y_min = -60.0;
  scaling.y_max = 60.0;

  // Output flips sign at 90 s of game time: tanh(0.05 * (t - 90)).
  TseModel model;
  model.cfg = cfg;
  model.kind = ModelKind::glo_only;
  model.scaler = identity_scaler(cfg);
  nn::DenseNet glo;
  glo.layers = {{cfg.slice_dims(), 1, nn::Activation::tanh, 0.0}};
  nn::Matrix w = nn::Matrix::Zero(cfg.slice_dims(), 1);
  w(0, 0) = 0.05;
  glo.w = {w};
  glo.b = {nn::Vector::Constant(1, -0.05 * 90.0)};
  model.glo = std::move(glo);

  MatchSlices match;
  match.match_id = "m";
  match.duration_s = 150;
  match.result = -1;
  match.slices = {make_toy_slice(cfg, {1, 2}, 60, 1.5, -1),
                  make_toy_slice(cfg, {1, 2}, 120, 0.5, -1)};

  std::vector<MatchSlices> matches = {match};
  std::vector<double> percents = {10.0, 60.0, 90.0};
  AccuracyTable table = accuracy_by_time_percent(model, scaling, matches, percents);
  REQUIRE(table.accuracy.size() == 3);
  CHECK(table.accuracy[0] == 1.0);  // 15 s -> slice at 60 s -> negative -> correct
  CHECK(table.accuracy[1] == 1.0);  // 90 s is equidistant; the earlier slice wins
  CHECK(table.accuracy[2] == 0.0);  // 135 s -> slice at 120 s -> positive -> wrong
  CHECK(table.average == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(table.n_matches == 1);

  TempDir dir("acc");
  std::string path = dir.str() + "/accuracy.csv";
  write_accuracy_csv(path, table);
  std::string text = slurp(path);
  CHECK(text.find("game_time_pct,accuracy\n") == 0);
  CHECK(text.find("average,") != std::string::npos);
}

TEST_CASE("an always-unknown model scores zero winner accuracy") {
  TseConfig cfg = toy_cfg();
  ScalingParams scaling;
  scaling.y_min = -60.0;
  scaling.y_max = 60.0;
  TseModel model = init_tse(cfg, ModelKind::glo_only, 6);
  for (auto& w : model.glo.w) w.setZero();
  for (auto& b : model.glo.b) b.setZero();  // output 0 -> rescaled 0 -> unknown

  MatchSlices match;
  match.match_id = "m";
  match.duration_s = 120;
  match.result = +1;
  match.slices = {make_toy_slice(cfg, {1, 2}, 60, 1.0, +1),
                  make_toy_slice(cfg, {1, 2}, 120, 0.0, +1)};
  std::vector<MatchSlices> matches = {match};
  std::vector<double> percents = {25.0, 75.0};
  AccuracyTable table = accuracy_by_time_percent(model, scaling, matches, percents);
  CHECK(table.accuracy[0] == 0.0);
  CHECK(table.accuracy[1] == 0.0);
  CHECK(table.average == 0.0);
}

TEST_CASE("holdout runs produce the four-model report deterministically") {
  unsetenv("MSLICE_RUN_DIR");
  TempDir corpus_dir("holdout-corpus");
  CorpusLoad corpus = make_corpus(corpus_dir, 30, 17);
  REQUIRE(corpus.matches.size() == 30);
  ExperimentConfig cfg = small_experiment(17);

  TempDir out1("holdout-out1");
  HoldoutResult res = run_holdout(corpus, cfg, out1.str());

  REQUIRE(res.rows.size() == 4);
  CHECK(res.rows[0].name == "blind");
  CHECK(res.rows[1].name == "ind");
  CHECK(res.rows[2].name == "glo");
  CHECK(res.rows[3].name == "tse");
  const std::size_t n_test = res.rows[0].metrics.n;
  CHECK(n_test > 0);
  for (const auto& row : res.rows) {
    CHECK(row.metrics.n == n_test);
    // Scaled and rescaled error stay linked by the fitted target span.
    CHECK(row.metrics.mae_rescaled ==
          doctest::Approx(row.metrics.mae_scaled * (res.scaling.y_max - res.scaling.y_min) / 2.0)
              .epsilon(1e-9));
    CHECK(row.metrics.mae_rescaled + 1e-9 >= res.scaling.alpha * row.metrics.time_mae_min);
  }
  CHECK(res.split.train.size() == 24);
  CHECK(res.split.val.size() == 3);
  CHECK(res.split.test.size() == 3);
  CHECK(res.dataset_id == corpus.dataset_id);

  for (const char* name :
       {"metrics.csv", "history_ind.csv", "history_glo.csv", "history_tse.csv",
        "checkpoint.json", "summary.json"}) {
    CHECK(fs::exists(fs::path(res.run_dir) / name));
  }

  auto summary = nlohmann::json::parse(slurp((fs::path(res.run_dir) / "summary.json").string()));
  CHECK(summary.at("schema") == "run-summary/1");
  CHECK(summary.at("kind") == "holdout");
  CHECK(summary.at("dataset_id") == corpus.dataset_id);
  CHECK(summary.at("split").at("test").size() == 3);
  CHECK(summary.at("rows").size() == 4);

  // The checkpoint reloads into a model giving the reported tse numbers.
  Checkpoint ckpt = load_checkpoint((fs::path(res.run_dir) / "checkpoint.json").string());
  std::vector<TimeSlice> test =
      filter_interval(gather_slices(corpus.matches, res.split.test), 0.0, 100.0);
  EvalMetrics again = compute_metrics(ckpt.model, test, ckpt.scaling);
  CHECK(again.mae_scaled == doctest::Approx(res.rows[3].metrics.mae_scaled).epsilon(1e-12));

  // Same corpus and config, fresh output root: byte-identical reports.
  TempDir out2("holdout-out2");
  HoldoutResult res2 = run_holdout(corpus, cfg, out2.str());
  CHECK(res2.run_dir != res.run_dir);
  for (const char* name : {"metrics.csv", "checkpoint.json", "summary.json"}) {
    CHECK(slurp((fs::path(res.run_dir) / name).string()) ==
          slurp((fs::path(res2.run_dir) / name).string()));
  }
}

TEST_CASE("k-fold reports one row per fold plus moments") {
  unsetenv("MSLICE_RUN_DIR");
  TempDir corpus_dir("kfold-corpus");
  CorpusLoad corpus = make_corpus(corpus_dir, 12, 23);
  ExperimentConfig cfg = small_experiment(23);
  cfg.kfold = 3;
  cfg.train.epochs = 1;

  TempDir out("kfold-out");
  KfoldResult res = run_kfold(corpus, cfg, out.str());
  REQUIRE(res.folds.size() == 3);
  double sum = 0.0;
  for (const auto& m : res.folds) sum += m.mae_scaled;
  CHECK(res.mean_mae == doctest::Approx(sum / 3.0).epsilon(1e-12));
  CHECK(res.std_mae >= 0.0);
  CHECK(fs::exists(fs::path(res.run_dir) / "kfold.csv"));
  CHECK(fs::exists(fs::path(res.run_dir) / "summary.json"));

  std::string csv = slurp((fs::path(res.run_dir) / "kfold.csv").string());
  CHECK(csv.find("fold,mae,") == 0);
  CHECK(csv.find("\nmean,") != std::string::npos);
  CHECK(csv.find("\nstd,") != std::string::npos);
}

TEST_CASE("interval study trains one model per window") {
  unsetenv("MSLICE_RUN_DIR");
  TempDir corpus_dir("interval-corpus");
  CorpusLoad corpus = make_corpus(corpus_dir, 12, 29);
  ExperimentConfig cfg = small_experiment(29);
  cfg.train.epochs = 1;

  std::vector<IntervalWindow> windows = {{0.0, 50.0}, {50.0, 100.0}};
  TempDir out("interval-out");
  IntervalStudyResult res = run_interval_study(corpus, windows, cfg, out.str());
  REQUIRE(res.rows.size() == 2);
  for (const auto& row : res.rows) {
    CHECK(row.train_slices > 0);
    CHECK(row.test_slices > 0);
    CHECK(row.test_mae >= 0.0);
  }
  CHECK(fs::exists(fs::path(res.run_dir) / "intervals.csv"));
  CHECK(fs::exists(fs::path(res.run_dir) / "summary.json"));

  CHECK(decile_windows().size() == 10);
  CHECK(decile_windows().front().lo_pct == 0.0);
  CHECK(decile_windows().front().hi_pct == 10.0);
  CHECK(decile_windows().back().lo_pct == 90.0);
  CHECK(suffix_windows().size() == 10);
  CHECK(suffix_windows().front().hi_pct == 100.0);
  CHECK(suffix_windows().back().lo_pct == 90.0);
}

TEST_CASE("interval study refuses windows with no data") {
  unsetenv("MSLICE_RUN_DIR");
  // One short match: slices at 60 and 120 of a 150 s match sit at 40% and
  // 80%; nothing lands in the last decile.
  TempDir dir("interval-empty");
  SynthConfig scfg;
  scfg.n_matches = 1;
  scfg.seed = 3;
  auto files = generate_corpus(scfg, dir.str());
  CorpusLoad corpus = load_corpus(files);
  // Overwrite with a handmade two-slice match is overkill; instead ask for a
  // window narrower than one slice period at the very start.
  ExperimentConfig cfg = small_experiment(3);
  cfg.train_frac = 1.0;
  cfg.val_frac = 0.0;
  cfg.test_frac = 0.0;
  std::vector<IntervalWindow> windows = {{0.0, 0.5}};
  TempDir out("interval-empty-out");
  CHECK_THROWS_AS(run_interval_study(corpus, windows, cfg, out.str()), EmptyDataset);
}
