#ifndef MSLICE_TEST_SUPPORT_HPP
#define MSLICE_TEST_SUPPORT_HPP

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "mslice/ingest.hpp"
#include "mslice/records.hpp"

namespace mslice::testing {

inline IntervalRecord make_record(std::string match_id, int t, int hero, Team team) {
  IntervalRecord r;
  r.match_id = std::move(match_id);
  r.game_time_s = t;
  r.hero_id = hero;
  r.team = team;
  r.life_state = LifeState::alive;
  r.gold = 600 + t;
  r.experience = 2 * t;
  r.pos_x = 100.0 + hero;
  r.pos_y = -50.0 + t;
  r.kills = t / 300;
  r.deaths = t / 600;
  r.last_hits = t / 12;
  r.teamfight_participation = 0.25;
  return r;
}

// Ten heroes (ids 1..5 on A, 6..10 on B), one record per hero per timestamp.
inline std::vector<IntervalRecord> make_match_records(const std::string& match_id,
                                                      const std::vector<int>& times) {
  std::vector<IntervalRecord> out;
  for (int t : times) {
    for (int hero = 1; hero <= 10; ++hero) {
      out.push_back(make_record(match_id, t, hero, hero <= 5 ? Team::A : Team::B));
    }
  }
  return out;
}

inline MatchMeta make_meta(const std::string& match_id, Team winner, int duration_s) {
  MatchMeta m;
  m.match_id = match_id;
  m.winner = winner;
  m.duration_s = duration_s;
  return m;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("mslice-test-" + tag + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir for tag " + tag);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace mslice::testing

#endif
