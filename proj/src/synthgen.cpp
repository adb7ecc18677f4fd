#include "mslice/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "mslice/ingest.hpp"

namespace mslice {

namespace {

// Corpus-stable per-hero traits: the same hero plays the same way in every
// match of a corpus, so per-hero models have something to learn.
struct HeroTraits {
  double skill = 0.0;  // farm/fight multiplier, in (-0.25, 0.25)
  bool support = false;
};

std::vector<HeroTraits> hero_traits(const SynthConfig& cfg) {
  auto rng = make_rng(cfg.seed, 0);
  std::uniform_real_distribution<double> skill(-0.25, 0.25);
  std::bernoulli_distribution support(0.3);
  std::vector<HeroTraits> traits(cfg.hero_pool);
  for (auto& t : traits) {
    t.skill = skill(rng);
    t.support = support(rng);
  }
  return traits;
}

void validate(const SynthConfig& cfg) {
  if (cfg.hero_pool <= 0 || cfg.heroes_per_match <= 0 || cfg.item_types <= 0) {
    throw ConfigError("generator pool sizes must be positive");
  }
  if (cfg.heroes_per_match % 2 != 0 || cfg.heroes_per_match > cfg.hero_pool) {
    throw ConfigError("heroes per match must be even and fit the pool");
  }
  if (!(cfg.min_length_min > 0) || !(cfg.max_length_min > cfg.min_length_min)) {
    throw ConfigError("bad match length bounds");
  }
  if (cfg.std_length_min < 0 || cfg.advantage_volatility < 0 || cfg.feature_noise < 0 ||
      cfg.early_noise_mult < 1.0) {
    throw ConfigError("noise parameters out of range");
  }
}

}  // namespace

std::string synth_match_id(const SynthConfig& cfg, int match_index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "synth-%llu-%05d",
                static_cast<unsigned long long>(cfg.seed), match_index);
  return buf;
}

MatchTimeline generate_match(const SynthConfig& cfg, int match_index) {
  validate(cfg);
  auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(match_index) + 1);
  const std::vector<HeroTraits> traits = hero_traits(cfg);
  const int n_heroes = cfg.heroes_per_match;
  const int side = n_heroes / 2;

  // Match length: redraw until inside the configured band.
  std::normal_distribution<double> len_dist(cfg.mean_length_min, cfg.std_length_min);
  double len_min = len_dist(rng);
  while (len_min < cfg.min_length_min || len_min > cfg.max_length_min) len_min = len_dist(rng);
  const int duration_s = std::max(60, static_cast<int>(std::llround(len_min * 60.0)));

  std::bernoulli_distribution coin(0.5);
  const Team winner = coin(rng) ? Team::A : Team::B;
  const double S = winner == Team::A ? 1.0 : -1.0;

  // Lineup: distinct ids, team A first, ascending id inside each team.
  std::vector<int> pool(cfg.hero_pool);
  std::iota(pool.begin(), pool.end(), 1);
  for (int i = 0; i < n_heroes; ++i) {
    std::uniform_int_distribution<int> pick(i, cfg.hero_pool - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<int> lineup(pool.begin(), pool.begin() + n_heroes);
  std::sort(lineup.begin(), lineup.begin() + side);
  std::sort(lineup.begin() + side, lineup.end());

  // Record grid: one snapshot per minute plus the final state.
  std::vector<int> ts{0};
  for (int t = 60; t <= duration_s; t += 60) ts.push_back(t);
  if (ts.back() != duration_s) ts.push_back(duration_s);
  const int n_rec = static_cast<int>(ts.size());

  std::uniform_real_distribution<double> lane(-900.0, 900.0);
  std::vector<double> lane_x(n_heroes), lane_y(n_heroes);
  for (int h = 0; h < n_heroes; ++h) {
    lane_x[h] = lane(rng);
    lane_y[h] = lane(rng);
  }

  // Latent advantage: random walk started at the team-skill gap, bridged so
  // the final record lands exactly on the winner's side at +/-drift.
  double skill_gap = 0.0;
  for (int h = 0; h < n_heroes; ++h) {
    skill_gap += (h < side ? 1.0 : -1.0) * traits[lineup[h] - 1].skill;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> walk(n_rec);
  walk[0] = 0.6 * skill_gap;
  for (int i = 1; i < n_rec; ++i) {
    const double dt_min = (ts[i] - ts[i - 1]) / 60.0;
    walk[i] = walk[i - 1] + cfg.advantage_volatility * std::sqrt(dt_min) * gauss(rng);
  }
  std::vector<double> adv_path(n_rec);
  for (int i = 0; i < n_rec; ++i) {
    const double frac = static_cast<double>(ts[i]) / duration_s;
    adv_path[i] = walk[i] + frac * (S * cfg.advantage_drift - walk.back());
  }

  MatchTimeline match;
  match.match_id = synth_match_id(cfg, match_index);
  match.duration_s = duration_s;
  match.winner = winner;
  match.heroes.resize(n_heroes);

  struct HeroState {
    double earned_gold = 600.0;
    int items_bought = 0;
    long long xp = 0;
    int deaths = 0, kills = 0, last_hits = 0, denies = 0, assists = 0;
    int creeps_stacked = 0, camps_stacked = 0, towers_killed = 0, roshans_killed = 0;
    double obs = 0.0, sen = 0.0, runes = 0.0, tf = 0.0;
    std::vector<int> items;
  };
  std::vector<HeroState> state(n_heroes);

  auto poisson = [&rng](double lambda) {
    std::poisson_distribution<int> dist(std::max(lambda, 1e-9));
    return dist(rng);
  };

  const double fn = cfg.feature_noise;
  for (int i = 0; i < n_rec; ++i) {
    const double frac = static_cast<double>(ts[i]) / duration_s;
    const double noise_mult = 1.0 + (cfg.early_noise_mult - 1.0) * (1.0 - frac);
    const double adv = std::tanh(adv_path[i]);
    const double front = 2500.0 * std::tanh(1.2 * adv_path[i]);
    const double dt = i == 0 ? 0.0 : (ts[i] - ts[i - 1]) / 60.0;

    for (int h = 0; h < n_heroes; ++h) {
      HeroState& st = state[h];
      const HeroTraits& tr = traits[lineup[h] - 1];
      const double team = h < side ? 1.0 : -1.0;
      const double sided = team * adv;  // >0 when this hero's team is ahead

      if (i > 0) {
        // Farm: the leading team farms faster. This is the main channel a
        // per-hero model can read the advantage from, via the team difference.
        const double gold_rate = 320.0 * (1.0 + 0.5 * tr.skill) * (1.0 + 0.7 * sided) *
                                     (tr.support ? 0.55 : 1.0) +
                                 gauss(rng) * 45.0 * noise_mult * fn;
        st.earned_gold += std::max(0.0, gold_rate * dt);
        const double xp_rate = 620.0 * (1.0 + 0.4 * tr.skill) * (1.0 + 0.5 * sided) *
                                   (0.75 + 0.5 * frac) +
                               gauss(rng) * 70.0 * noise_mult * fn;
        st.xp += std::max<long long>(0, std::llround(xp_rate * dt));

        st.kills += poisson(dt * 0.22 * (0.6 + 0.8 * frac) * (1.0 + 0.9 * sided));
        st.deaths += poisson(dt * 0.22 * (0.6 + 0.8 * frac) * (1.0 - 0.9 * sided));
        st.assists += poisson(dt * 0.30 * (0.6 + 0.8 * frac) * (1.0 + 0.8 * sided));
        const double lh_rate = 7.5 * (1.0 + 0.6 * tr.skill) * (1.0 + 0.5 * sided) *
                               (tr.support ? 0.35 : 1.0);
        st.last_hits += std::max<int>(
            0, static_cast<int>(std::llround(lh_rate * dt + gauss(rng) * 2.0 * noise_mult * fn)));
        st.denies += poisson(dt * 0.9 * (1.0 + 0.5 * tr.skill));
        st.creeps_stacked += poisson(dt * 0.12 * (tr.support ? 2.0 : 1.0));
        st.camps_stacked += poisson(dt * 0.10 * (tr.support ? 2.0 : 1.0));
        // Towers fall faster late and mostly to the leading team; tower totals
        // double as a progress clock for whole-slice models.
        st.towers_killed += poisson(dt * 0.02 * (1.0 + 2.2 * frac) * (1.0 + 0.9 * sided));
        st.roshans_killed += poisson(dt * 0.008 * (1.0 + frac) * (1.0 + 0.8 * std::max(0.0, sided)));
        st.obs += poisson(dt * (tr.support ? 0.55 : 0.10));
        st.sen += poisson(dt * (tr.support ? 0.50 : 0.08));
        st.runes += poisson(dt * 0.25);
        std::uniform_real_distribution<double> tf_inc(0.0, 0.05 * dt);
        st.tf = std::min(1.0, st.tf + tf_inc(rng));

        // Spend earned gold on items at fixed net-worth thresholds.
        std::uniform_int_distribution<int> item_pick(1, cfg.item_types);
        while (st.items_bought < 12 &&
               st.earned_gold >= 1400.0 * (st.items_bought + 1) + 600.0) {
          st.items.push_back(item_pick(rng));
          ++st.items_bought;
        }
      }

      IntervalRecord rec;
      rec.match_id = match.match_id;
      rec.game_time_s = ts[i];
      rec.hero_id = lineup[h];
      rec.team = h < side ? Team::A : Team::B;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double p_dead = i == 0 ? 0.0 : std::min(0.35, 0.06 * (1.0 - 0.6 * sided) *
                                                              (0.6 + 0.8 * frac));
      rec.life_state = unit(rng) < p_dead ? LifeState::dead : LifeState::alive;
      rec.gold = static_cast<int>(std::llround(st.earned_gold - 1000.0 * st.items_bought));
      rec.experience = static_cast<int>(st.xp);
      rec.pos_x = front + lane_x[h] + gauss(rng) * 240.0 * noise_mult * fn;
      rec.pos_y = 0.6 * front + lane_y[h] + gauss(rng) * 240.0 * noise_mult * fn;
      rec.deaths = st.deaths;
      rec.kills = st.kills;
      rec.last_hits = st.last_hits;
      rec.denies = st.denies;
      rec.assists = st.assists;
      rec.creeps_stacked = st.creeps_stacked;
      rec.camps_stacked = st.camps_stacked;
      rec.towers_killed = st.towers_killed;
      rec.roshans_killed = st.roshans_killed;
      rec.obs_placed = st.obs;
      rec.sen_placed = st.sen;
      rec.rune_pickups = st.runes;
      rec.teamfight_participation = st.tf;
      rec.items = st.items;
      match.heroes[h].records.push_back(std::move(rec));
    }
  }

  for (int h = 0; h < n_heroes; ++h) {
    match.heroes[h].hero_id = lineup[h];
    match.heroes[h].team = h < side ? Team::A : Team::B;
  }
  return match;
}

void write_match_file(const std::string& path, const MatchTimeline& timeline) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("IoError", "cannot open for writing: " + path);
  MatchMeta meta{timeline.match_id, timeline.winner, timeline.duration_s};
  out << serialize_meta(meta) << '\n';
  if (timeline.heroes.empty()) return;
  const std::size_t n_rec = timeline.heroes.front().records.size();
  for (std::size_t i = 0; i < n_rec; ++i) {
    for (const auto& hero : timeline.heroes) {
      out << serialize_record(hero.records.at(i)) << '\n';
    }
  }
  if (!out) throw DataError("IoError", "write failed: " + path);
}

std::vector<std::string> generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.n_matches <= 0) throw ConfigError("corpus needs at least one match");
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  paths.reserve(cfg.n_matches);
  for (int i = 0; i < cfg.n_matches; ++i) {
    MatchTimeline match = generate_match(cfg, i);
    std::filesystem::path p = std::filesystem::path(out_dir) / (match.match_id + ".jsonl");
    write_match_file(p.string(), match);
    paths.push_back(p.string());
  }
  return paths;
}

}  // namespace mslice
