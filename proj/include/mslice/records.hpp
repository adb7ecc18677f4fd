#ifndef MSLICE_RECORDS_HPP
#define MSLICE_RECORDS_HPP

#include <string>
#include <vector>

#include "mslice/common.hpp"

namespace mslice {

enum class Team : std::uint8_t { A, B };
enum class LifeState : std::uint8_t { alive = 0, dead = 1 };

inline const char* team_name(Team t) { return t == Team::A ? "A" : "B"; }
inline int team_sign(Team t) { return t == Team::A ? +1 : -1; }

// One per-second snapshot of a single hero, as emitted by the replay parser.
struct IntervalRecord {
  std::string match_id;
  int game_time_s = 0;
  int hero_id = 0;
  Team team = Team::A;
  LifeState life_state = LifeState::alive;
  int gold = 0;
  int experience = 0;
  double pos_x = 0.0;
  double pos_y = 0.0;
  int deaths = 0;
  int kills = 0;
  int last_hits = 0;
  int denies = 0;
  int assists = 0;
  int creeps_stacked = 0;
  int camps_stacked = 0;
  int towers_killed = 0;
  int roshans_killed = 0;
  double obs_placed = 0.0;
  double sen_placed = 0.0;
  double rune_pickups = 0.0;
  double teamfight_participation = 0.0;
  std::vector<int> items;

  bool operator==(const IntervalRecord&) const = default;
};

// Match result and duration arrive on a sidecar meta line, since interval
// records never carry the winner.
struct MatchMeta {
  std::string match_id;
  Team winner = Team::A;
  int duration_s = 0;
};

struct HeroTimeline {
  int hero_id = 0;
  Team team = Team::A;
  std::vector<IntervalRecord> records;  // time-ordered
};

// Validated per-match container. Heroes are stored team A first, then team B,
// ascending hero id within each team; this is also the hero-block order used
// for time-slice features.
struct MatchTimeline {
  std::string match_id;
  int duration_s = 0;
  Team winner = Team::A;
  std::vector<HeroTimeline> heroes;

  int result_sign() const { return team_sign(winner); }
};

struct HeroCountViolation : DataError {
  explicit HeroCountViolation(const std::string& msg) : DataError("HeroCountViolation", msg) {}
};

struct DuplicateHero : DataError {
  int hero_id;
  DuplicateHero(int hero, const std::string& msg) : DataError("DuplicateHero", msg), hero_id(hero) {}
};

struct NonMonotoneCounter : DataError {
  int hero_id;
  std::string field;
  int game_time_s;
  NonMonotoneCounter(int hero, std::string fld, int t, const std::string& msg)
      : DataError("NonMonotoneCounter", msg), hero_id(hero), field(std::move(fld)), game_time_s(t) {}
};

struct MissingMeta : DataError {
  explicit MissingMeta(const std::string& msg) : DataError("MissingMeta", msg) {}
};

}  // namespace mslice

#endif
