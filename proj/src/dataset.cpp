#include "mslice/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>

namespace mslice {

namespace {

void check_result_sign(int result) {
  if (result != 1 && result != -1) {
    throw DomainError("result must be +1 or -1, got " + std::to_string(result));
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) {
    throw DomainError("alpha must be positive, got " + format_double(alpha));
  }
}

}  // namespace

ScalingParams ScalingParams::from_rate(double r) {
  if (!(r > 0.0)) throw ConfigError("discount rate must be positive, got " + format_double(r));
  ScalingParams p;
  p.r = r;
  p.alpha = std::log1p(r);
  return p;
}

double de_ts(int result, double t_min, double alpha) {
  check_result_sign(result);
  check_alpha(alpha);
  if (!(t_min > 0.0)) {
    throw DomainError("remaining time must be positive, got " + format_double(t_min));
  }
  return result / (alpha * t_min);
}

double target_y(int result, double t_min, double alpha) {
  check_result_sign(result);
  check_alpha(alpha);
  if (!(t_min > 0.0)) {
    throw DomainError("remaining time must be positive, got " + format_double(t_min));
  }
  // 1/DE = alpha*t/R, and 1/R == R for R in {+1,-1}.
  return alpha * t_min * result;
}

double slice_target_y(const TimeSlice& slice, double alpha) {
  check_result_sign(slice.result);
  check_alpha(alpha);
  if (slice.remaining_time_min < 0.0) {
    throw DomainError("slice has negative remaining time");
  }
  return alpha * slice.remaining_time_min * slice.result;
}

double scale_y(double y, const ScalingParams& p) {
  if (!(p.y_max > p.y_min)) {
    throw ConfigError("scaling range is degenerate: y_min=" + format_double(p.y_min) +
                      " y_max=" + format_double(p.y_max));
  }
  return -1.0 + 2.0 * (y - p.y_min) / (p.y_max - p.y_min);
}

double rescale_y(double y_hat, const ScalingParams& p) {
  if (!(p.y_max > p.y_min)) {
    throw ConfigError("scaling range is degenerate: y_min=" + format_double(p.y_min) +
                      " y_max=" + format_double(p.y_max));
  }
  return p.y_min + (y_hat + 1.0) / 2.0 * (p.y_max - p.y_min);
}

Prediction extract_prediction(double y_hat_rescaled, double alpha) {
  check_alpha(alpha);
  Prediction p;
  p.t_hat_min = std::abs(y_hat_rescaled) / alpha;
  p.r_hat = (y_hat_rescaled > 0.0) - (y_hat_rescaled < 0.0);
  return p;
}

std::vector<TimeSlice> build_slices(const MatchTimeline& timeline, const FeatureSchema& schema,
                                    int period_s) {
  if (period_s <= 0) throw ConfigError("slice period must be positive");
  if (static_cast<int>(timeline.heroes.size()) != schema.heroes_per_slice) {
    throw ShapeMismatch("timeline has " + std::to_string(timeline.heroes.size()) +
                        " heroes, schema expects " + std::to_string(schema.heroes_per_slice));
  }

  std::vector<TimeSlice> slices;
  slices.reserve(timeline.duration_s / period_s);
  // Per-hero cursor over time-ordered records; slice times are increasing so
  // each record list is walked once.
  std::vector<std::size_t> cursor(timeline.heroes.size(), 0);

  for (int st = period_s; st <= timeline.duration_s; st += period_s) {
    TimeSlice slice;
    slice.match_id = timeline.match_id;
    slice.slice_time_s = st;
    slice.remaining_time_min = (timeline.duration_s - st) / 60.0;
    slice.result = timeline.result_sign();
    slice.features.assign(schema.slice_dims(), 0.0f);
    slice.features[0] = static_cast<float>(st);

    for (std::size_t h = 0; h < timeline.heroes.size(); ++h) {
      const auto& records = timeline.heroes[h].records;
      std::size_t& cur = cursor[h];
      while (cur + 1 < records.size() && records[cur + 1].game_time_s <= st) ++cur;
      if (records.empty() || records[cur].game_time_s > st) {
        throw MissingHeroState(timeline.heroes[h].hero_id, st);
      }
      const IntervalRecord& r = records[cur];
      float* f = slice.features.data() + schema.block_offset(static_cast<int>(h));
      f[0] = static_cast<float>(r.hero_id);
      f[1] = r.life_state == LifeState::alive ? 0.0f : 1.0f;
      f[2] = static_cast<float>(r.gold);
      f[3] = static_cast<float>(r.experience);
      f[4] = static_cast<float>(r.pos_x);
      f[5] = static_cast<float>(r.pos_y);
      f[6] = static_cast<float>(r.deaths);
      f[7] = static_cast<float>(r.kills);
      f[8] = static_cast<float>(r.last_hits);
      f[9] = static_cast<float>(r.denies);
      f[10] = static_cast<float>(r.assists);
      f[11] = static_cast<float>(r.creeps_stacked);
      f[12] = static_cast<float>(r.camps_stacked);
      f[13] = static_cast<float>(r.towers_killed);
      f[14] = static_cast<float>(r.roshans_killed);
      f[15] = static_cast<float>(r.obs_placed);
      f[16] = static_cast<float>(r.sen_placed);
      f[17] = static_cast<float>(r.rune_pickups);
      f[18] = static_cast<float>(r.teamfight_participation);
      for (int item : r.items) {
        f[19 + item - 1] += 1.0f;
      }
    }
    slices.push_back(std::move(slice));
  }
  return slices;
}

ScalingParams fit_scaling(std::span<const TimeSlice> train_slices, double r) {
  if (train_slices.empty()) throw EmptyDataset("cannot fit scaling on an empty training set");
  ScalingParams p = ScalingParams::from_rate(r);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : train_slices) {
    double y = slice_target_y(s, p.alpha);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  p.y_min = lo;
  p.y_max = hi;
  return p;
}

std::vector<TimeSlice> filter_interval(std::span<const TimeSlice> slices, double lo_pct,
                                       double hi_pct) {
  if (!(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0)) {
    throw ConfigError("bad interval [" + format_double(lo_pct) + ", " + format_double(hi_pct) +
                      "]");
  }
  std::vector<TimeSlice> kept;
  for (const auto& s : slices) {
    double duration_s = s.slice_time_s + s.remaining_time_min * 60.0;
    double pct = 100.0 * s.slice_time_s / duration_s;
    if (lo_pct <= pct && pct <= hi_pct) kept.push_back(s);
  }
  return kept;
}

SplitPlan split_matches(std::vector<std::string> match_ids, double train_frac, double val_frac,
                        double test_frac, std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::sort(match_ids.begin(), match_ids.end());
  match_ids.erase(std::unique(match_ids.begin(), match_ids.end()), match_ids.end());
  auto rng = make_rng(seed, 0x5317);
  std::shuffle(match_ids.begin(), match_ids.end(), rng);

  const std::size_t n = match_ids.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(n * train_frac));
  std::size_t n_val = static_cast<std::size_t>(std::llround(n * val_frac));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  SplitPlan plan;
  plan.seed = seed;
  plan.train.assign(match_ids.begin(), match_ids.begin() + n_train);
  plan.val.assign(match_ids.begin() + n_train, match_ids.begin() + n_train + n_val);
  plan.test.assign(match_ids.begin() + n_train + n_val, match_ids.end());
  return plan;
}

SplitPlan kfold_matches(std::vector<std::string> match_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  std::sort(match_ids.begin(), match_ids.end());
  match_ids.erase(std::unique(match_ids.begin(), match_ids.end()), match_ids.end());
  if (match_ids.size() < static_cast<std::size_t>(k)) {
    throw ConfigError("fewer matches than folds");
  }
  auto rng = make_rng(seed, 0xf01d);
  std::shuffle(match_ids.begin(), match_ids.end(), rng);

  SplitPlan plan;
  plan.seed = seed;
  plan.folds.resize(k);
  const std::size_t n = match_ids.size();
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    plan.folds[f].assign(match_ids.begin() + pos, match_ids.begin() + pos + len);
    pos += len;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Dataset files

void write_dataset_csv(const std::string& path, std::span<const TimeSlice> slices) {
  if (slices.empty()) throw EmptyDataset("refusing to write an empty dataset: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);

  const std::size_t dim = slices.front().features.size();
  std::string row = "match_id,slice_time_s,remaining_time_min,result";
  for (std::size_t i = 0; i < dim; ++i) {
    row += ",f" + std::to_string(i);
  }
  row += '\n';
  out << row;

  for (const auto& s : slices) {
    if (s.features.size() != dim) throw ShapeMismatch("inconsistent feature dimension");
    row.clear();
    row += s.match_id;
    row += ',';
    row += std::to_string(s.slice_time_s);
    row += ',';
    row += format_double(s.remaining_time_min);
    row += ',';
    row += std::to_string(s.result);
    for (float f : s.features) {
      row += ',';
      row += format_float(f);
    }
    row += '\n';
    out << row;
  }
  if (!out) throw DataError("IoError", "write failed: " + path);
}

std::vector<TimeSlice> read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("IoError", "cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("IoError", "empty dataset file: " + path);
  std::size_t dim = 0;
  for (std::size_t pos = 0; (pos = line.find(",f", pos)) != std::string::npos; ++pos) ++dim;
  if (dim == 0) throw DataError("IoError", "bad dataset header: " + path);

  std::vector<TimeSlice> slices;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TimeSlice s;
    s.features.reserve(dim);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto next_field = [&]() -> std::string_view {
      const char* start = p;
      while (p < end && *p != ',') ++p;
      std::string_view field(start, static_cast<std::size_t>(p - start));
      if (p < end) ++p;  // skip comma
      return field;
    };
    try {
      s.match_id = std::string(next_field());
      s.slice_time_s = static_cast<int>(parse_double(next_field()));
      s.remaining_time_min = parse_double(next_field());
      s.result = static_cast<int>(parse_double(next_field()));
      check_result_sign(s.result);
      while (p <= end && s.features.size() < dim) {
        s.features.push_back(static_cast<float>(parse_double(next_field())));
      }
    } catch (const DomainError& e) {
      throw DataError("IoError",
                      path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (s.features.size() != dim) {
      throw DataError("IoError", path + ":" + std::to_string(line_no) + ": row has " +
                                     std::to_string(s.features.size()) + " features, expected " +
                                     std::to_string(dim));
    }
    slices.push_back(std::move(s));
  }
  return slices;
}

namespace {

constexpr char kBinMagic[4] = {'M', 'S', 'L', 'C'};
constexpr std::uint16_t kBinVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T take(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void write_dataset_bin(const std::string& path, std::span<const TimeSlice> slices) {
  if (slices.empty()) throw EmptyDataset("refusing to write an empty dataset: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);

  const std::uint32_t dim = static_cast<std::uint32_t>(slices.front().features.size());
  out.write(kBinMagic, 4);
  put(out, kBinVersion);
  put(out, dim);
  put(out, static_cast<std::uint64_t>(slices.size()));
  for (const auto& s : slices) {
    if (s.features.size() != dim) throw ShapeMismatch("inconsistent feature dimension");
    put(out, static_cast<std::uint32_t>(s.match_id.size()));
    out.write(s.match_id.data(), static_cast<std::streamsize>(s.match_id.size()));
    put(out, static_cast<std::int32_t>(s.slice_time_s));
    put(out, s.remaining_time_min);
    put(out, static_cast<std::int8_t>(s.result));
    out.write(reinterpret_cast<const char*>(s.features.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw DataError("IoError", "write failed: " + path);
}

std::vector<TimeSlice> read_dataset_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("IoError", "cannot open: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBinMagic, 4) != 0) {
    throw DataError("IoError", "not a MSLC dataset: " + path);
  }
  const auto version = take<std::uint16_t>(in);
  if (version != kBinVersion) {
    throw DataError("IoError", "unsupported dataset version " + std::to_string(version));
  }
  const auto dim = take<std::uint32_t>(in);
  const auto rows = take<std::uint64_t>(in);

  std::vector<TimeSlice> slices;
  slices.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    TimeSlice s;
    const auto id_len = take<std::uint32_t>(in);
    s.match_id.resize(id_len);
    in.read(s.match_id.data(), id_len);
    s.slice_time_s = take<std::int32_t>(in);
    s.remaining_time_min = take<double>(in);
    s.result = take<std::int8_t>(in);
    s.features.resize(dim);
    in.read(reinterpret_cast<char*>(s.features.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw DataError("IoError", "truncated dataset: " + path);
    check_result_sign(s.result);
    slices.push_back(std::move(s));
  }
  return slices;
}

}  // namespace mslice
