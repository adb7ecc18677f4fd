#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mslice/dataset.hpp"
#include "mslice/ingest.hpp"
#include "mslice/synthgen.hpp"
#include "test_support.hpp"

using namespace mslice;
using mslice::testing::TempDir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("generated matches are valid timelines") {
  SynthConfig cfg;
  cfg.n_matches = 8;
  cfg.seed = 21;
  IngestConfig icfg;
  FeatureSchema schema;

  for (int i = 0; i < cfg.n_matches; ++i) {
    MatchTimeline tl = generate_match(cfg, i);
    CHECK(tl.match_id == synth_match_id(cfg, i));
    CHECK(tl.duration_s >= 600);
    CHECK(tl.duration_s <= 6000);
    REQUIRE(tl.heroes.size() == 10);

    std::set<int> ids;
    for (int h = 0; h < 10; ++h) {
      const auto& hero = tl.heroes[h];
      CHECK(hero.team == (h < 5 ? Team::A : Team::B));
      CHECK(hero.hero_id >= 1);
      CHECK(hero.hero_id <= cfg.hero_pool);
      CHECK(ids.insert(hero.hero_id).second);  // all distinct
      REQUIRE_FALSE(hero.records.empty());
      CHECK(hero.records.front().game_time_s == 0);
      CHECK(hero.records.back().game_time_s == tl.duration_s);
    }

    // Round-tripping through the serialized form and the validator is clean.
    std::vector<IntervalRecord> records;
    for (const auto& hero : tl.heroes) {
      for (const auto& r : hero.records) records.push_back(r);
    }
    MatchMeta meta{tl.match_id, tl.winner, tl.duration_s};
    CHECK_NOTHROW(assemble_timeline(records, meta, icfg));
    CHECK_NOTHROW(build_slices(tl, schema));
  }
}

TEST_CASE("generation is deterministic and order-independent") {
  SynthConfig cfg;
  cfg.n_matches = 4;
  cfg.seed = 33;
  MatchTimeline a = generate_match(cfg, 2);
  MatchTimeline b = generate_match(cfg, 2);
  CHECK(a.duration_s == b.duration_s);
  CHECK(a.winner == b.winner);
  REQUIRE(a.heroes.size() == b.heroes.size());
  for (std::size_t h = 0; h < a.heroes.size(); ++h) {
    CHECK(a.heroes[h].hero_id == b.heroes[h].hero_id);
    CHECK(a.heroes[h].records == b.heroes[h].records);
  }

  // Generating match 3 first does not change match 2.
  generate_match(cfg, 3);
  MatchTimeline c = generate_match(cfg, 2);
  CHECK(c.heroes[0].records == a.heroes[0].records);

  SynthConfig other = cfg;
  other.seed = 34;
  MatchTimeline d = generate_match(other, 2);
  CHECK(a.heroes[0].records != d.heroes[0].records);
}

TEST_CASE("cumulative counters never regress") {
  SynthConfig cfg;
  cfg.n_matches = 5;
  cfg.seed = 55;
  for (int i = 0; i < cfg.n_matches; ++i) {
    MatchTimeline tl = generate_match(cfg, i);
    for (const auto& hero : tl.heroes) {
      for (std::size_t k = 1; k < hero.records.size(); ++k) {
        const auto& prev = hero.records[k - 1];
        const auto& cur = hero.records[k];
        CHECK(cur.game_time_s > prev.game_time_s);
        CHECK(cur.experience >= prev.experience);
        CHECK(cur.kills >= prev.kills);
        CHECK(cur.deaths >= prev.deaths);
        CHECK(cur.last_hits >= prev.last_hits);
        CHECK(cur.denies >= prev.denies);
        CHECK(cur.assists >= prev.assists);
        CHECK(cur.towers_killed >= prev.towers_killed);
        CHECK(cur.roshans_killed >= prev.roshans_killed);
        CHECK(cur.obs_placed >= prev.obs_placed);
        CHECK(cur.sen_placed >= prev.sen_placed);
        CHECK(cur.rune_pickups >= prev.rune_pickups);
        CHECK(cur.gold >= 0);
      }
      for (const auto& r : hero.records) {
        CHECK(r.teamfight_participation >= 0.0);
        CHECK(r.teamfight_participation <= 1.0);
        for (int item : r.items) {
          CHECK(item >= 1);
          CHECK(item <= cfg.item_types);
        }
      }
    }
  }
}

TEST_CASE("match lengths follow the configured distribution") {
  SynthConfig cfg;
  cfg.n_matches = 400;
  cfg.seed = 77;
  double sum = 0.0;
  int wins_a = 0;
  for (int i = 0; i < cfg.n_matches; ++i) {
    MatchTimeline tl = generate_match(cfg, i);
    double minutes = tl.duration_s / 60.0;
    CHECK(minutes >= cfg.min_length_min);
    CHECK(minutes <= cfg.max_length_min);
    sum += minutes;
    if (tl.winner == Team::A) ++wins_a;
  }
  double mean = sum / cfg.n_matches;
  CHECK(mean > cfg.mean_length_min - 3.0);
  CHECK(mean < cfg.mean_length_min + 3.0);
  // Winners are a fair coin.
  CHECK(wins_a > 400 * 0.40);
  CHECK(wins_a < 400 * 0.60);
}

TEST_CASE("corpus files ingest with zero issues") {
  SynthConfig cfg;
  cfg.n_matches = 6;
  cfg.seed = 91;
  TempDir dir("synth-corpus");
  auto paths = generate_corpus(cfg, dir.str());
  REQUIRE(paths.size() == 6);

  FeatureSchema schema;
  std::size_t total_slices = 0;
  for (const auto& path : paths) {
    CHECK(std::filesystem::exists(path));
    std::ifstream in(path, std::ios::binary);
    ParseResult res = parse_interval_stream(in);
    CHECK(res.issues.empty());
    CHECK(res.dropped_pre_horn == 0);
    REQUIRE(res.meta.has_value());
    MatchTimeline tl = assemble_timeline(std::move(res.records), *res.meta);
    auto slices = build_slices(tl, schema);
    CHECK(slices.size() == static_cast<std::size_t>(tl.duration_s / 60));
    total_slices += slices.size();
  }
  CHECK(total_slices > 0);

  // Regenerating the corpus yields byte-identical files.
  TempDir dir2("synth-corpus-again");
  auto paths2 = generate_corpus(cfg, dir2.str());
  REQUIRE(paths2.size() == paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    CHECK(slurp(paths[i]) == slurp(paths2[i]));
  }
}

TEST_CASE("late-game records reflect the final result more than early ones") {
  // The latent advantage is pinned to the winner at the end of the match, so
  // the team gold difference at 90% game time should side with the winner far
  // more often than the difference at 10%.
  SynthConfig cfg;
  cfg.n_matches = 120;
  cfg.seed = 101;
  int early_agree = 0;
  int late_agree = 0;
  for (int i = 0; i < cfg.n_matches; ++i) {
    MatchTimeline tl = generate_match(cfg, i);
    auto xp_diff_at = [&](int t) {
      double diff = 0.0;
      for (const auto& hero : tl.heroes) {
        const IntervalRecord* last = nullptr;
        for (const auto& r : hero.records) {
          if (r.game_time_s <= t) last = &r;
        }
        REQUIRE(last != nullptr);
        diff += team_sign(hero.team) * static_cast<double>(last->experience);
      }
      return diff;
    };
    int sign = tl.result_sign();
    if (xp_diff_at(tl.duration_s / 10) * sign > 0) ++early_agree;
    if (xp_diff_at(tl.duration_s * 9 / 10) * sign > 0) ++late_agree;
  }
  CHECK(late_agree > early_agree);
  CHECK(late_agree >= 120 * 0.7);  // end of match: advantage is pinned
}

TEST_CASE("match ids embed seed and index") {
  SynthConfig cfg;
  cfg.seed = 7;
  std::string id = synth_match_id(cfg, 3);
  CHECK(id.find("7") != std::string::npos);
  CHECK(id.find("00003") != std::string::npos);
  CHECK(synth_match_id(cfg, 3) == id);
  CHECK(synth_match_id(cfg, 4) != id);
}
