#include "mslice/ingest.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace mslice {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Thrown per line inside the parser, converted into a LineIssue.
struct FieldError {
  std::string field;
  std::string detail;
};

long long require_int(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw FieldError{field, "missing"};
  if (!it->is_number_integer()) throw FieldError{field, "expected integer"};
  return it->get<long long>();
}

long long require_int_min(const json& j, const char* field, long long lo) {
  long long v = require_int(j, field);
  if (v < lo) throw FieldError{field, "out of range"};
  return v;
}

double require_real(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw FieldError{field, "missing"};
  if (!it->is_number()) throw FieldError{field, "expected number"};
  return it->get<double>();
}

double require_real_min(const json& j, const char* field, double lo) {
  double v = require_real(j, field);
  if (v < lo) throw FieldError{field, "out of range"};
  return v;
}

std::string require_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw FieldError{field, "missing"};
  if (!it->is_string()) throw FieldError{field, "expected string"};
  return it->get<std::string>();
}

Team require_team(const json& j, const char* field) {
  std::string s = require_string(j, field);
  if (s == "A") return Team::A;
  if (s == "B") return Team::B;
  throw FieldError{field, "expected \"A\" or \"B\""};
}

IntervalRecord parse_interval(const json& j, const IngestConfig& cfg) {
  IntervalRecord r;
  r.match_id = require_string(j, "match_id");
  r.game_time_s = static_cast<int>(require_int(j, "game_time_s"));
  long long hero = require_int(j, "hero_id");
  if (hero < 1 || hero > cfg.hero_pool) throw FieldError{"hero_id", "out of range"};
  r.hero_id = static_cast<int>(hero);
  r.team = require_team(j, "team");
  long long life = require_int(j, "life_state");
  if (life != 0 && life != 1) throw FieldError{"life_state", "expected 0 or 1"};
  r.life_state = life == 0 ? LifeState::alive : LifeState::dead;
  r.gold = static_cast<int>(require_int(j, "gold"));
  r.experience = static_cast<int>(require_int(j, "xp"));
  r.pos_x = require_real(j, "x");
  r.pos_y = require_real(j, "y");
  r.deaths = static_cast<int>(require_int_min(j, "deaths", 0));
  r.kills = static_cast<int>(require_int_min(j, "kills", 0));
  r.last_hits = static_cast<int>(require_int_min(j, "lh", 0));
  r.denies = static_cast<int>(require_int_min(j, "denies", 0));
  r.assists = static_cast<int>(require_int_min(j, "assists", 0));
  r.creeps_stacked = static_cast<int>(require_int_min(j, "creeps_stacked", 0));
  r.camps_stacked = static_cast<int>(require_int_min(j, "camps_stacked", 0));
  r.towers_killed = static_cast<int>(require_int_min(j, "towers_killed", 0));
  r.roshans_killed = static_cast<int>(require_int_min(j, "roshans_killed", 0));
  r.obs_placed = require_real_min(j, "obs_placed", 0.0);
  r.sen_placed = require_real_min(j, "sen_placed", 0.0);
  r.rune_pickups = require_real_min(j, "rune_pickups", 0.0);
  r.teamfight_participation = require_real_min(j, "teamfight_participation", 0.0);
  auto it = j.find("items");
  if (it == j.end()) throw FieldError{"items", "missing"};
  if (!it->is_array()) throw FieldError{"items", "expected array"};
  r.items.reserve(it->size());
  for (const auto& e : *it) {
    if (!e.is_number_integer()) throw FieldError{"items", "expected integer id"};
    long long id = e.get<long long>();
    if (id < 1 || id > cfg.item_types) throw FieldError{"items", "item id out of range"};
    r.items.push_back(static_cast<int>(id));
  }
  return r;
}

MatchMeta parse_meta(const json& j) {
  MatchMeta m;
  m.match_id = require_string(j, "match_id");
  m.winner = require_team(j, "winner");
  long long dur = require_int(j, "duration_s");
  if (dur <= 0) throw FieldError{"duration_s", "must be positive"};
  m.duration_s = static_cast<int>(dur);
  return m;
}

// Cumulative counters checked for regressions. Gold is spendable and
// teamfight participation is opaque, so neither is listed.
struct CounterField {
  const char* name;
  double (*get)(const IntervalRecord&);
};

constexpr CounterField kCumulativeFields[] = {
    {"experience", [](const IntervalRecord& r) { return double(r.experience); }},
    {"deaths", [](const IntervalRecord& r) { return double(r.deaths); }},
    {"kills", [](const IntervalRecord& r) { return double(r.kills); }},
    {"last_hits", [](const IntervalRecord& r) { return double(r.last_hits); }},
    {"denies", [](const IntervalRecord& r) { return double(r.denies); }},
    {"assists", [](const IntervalRecord& r) { return double(r.assists); }},
    {"creeps_stacked", [](const IntervalRecord& r) { return double(r.creeps_stacked); }},
    {"camps_stacked", [](const IntervalRecord& r) { return double(r.camps_stacked); }},
    {"towers_killed", [](const IntervalRecord& r) { return double(r.towers_killed); }},
    {"roshans_killed", [](const IntervalRecord& r) { return double(r.roshans_killed); }},
    {"obs_placed", [](const IntervalRecord& r) { return r.obs_placed; }},
    {"sen_placed", [](const IntervalRecord& r) { return r.sen_placed; }},
    {"rune_pickups", [](const IntervalRecord& r) { return r.rune_pickups; }},
};

}  // namespace

ParseResult parse_interval_stream(std::istream& in, const IngestConfig& cfg) {
  ParseResult out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      out.issues.push_back({LineIssue::Kind::malformed_line, line_no, "", "invalid JSON"});
      continue;
    }
    try {
      std::string type = require_string(j, "type");
      if (type == "meta") {
        out.meta = parse_meta(j);
      } else if (type == "interval") {
        IntervalRecord rec = parse_interval(j, cfg);
        if (rec.game_time_s < 0) {
          ++out.dropped_pre_horn;
        } else {
          out.records.push_back(std::move(rec));
        }
      } else {
        throw FieldError{"type", "unknown record type '" + type + "'"};
      }
    } catch (const FieldError& e) {
      out.issues.push_back({LineIssue::Kind::schema_violation, line_no, e.field, e.detail});
    }
  }
  return out;
}

ParseResult parse_interval_stream(const std::string& text, const IngestConfig& cfg) {
  std::istringstream in(text);
  return parse_interval_stream(in, cfg);
}

std::string serialize_record(const IntervalRecord& r) {
  ordered_json j;
  j["type"] = "interval";
  j["match_id"] = r.match_id;
  j["game_time_s"] = r.game_time_s;
  j["hero_id"] = r.hero_id;
  j["team"] = team_name(r.team);
  j["life_state"] = r.life_state == LifeState::alive ? 0 : 1;
  j["gold"] = r.gold;
  j["xp"] = r.experience;
  j["x"] = r.pos_x;
  j["y"] = r.pos_y;
  j["deaths"] = r.deaths;
  j["kills"] = r.kills;
  j["lh"] = r.last_hits;
  j["denies"] = r.denies;
  j["assists"] = r.assists;
  j["creeps_stacked"] = r.creeps_stacked;
  j["camps_stacked"] = r.camps_stacked;
  j["towers_killed"] = r.towers_killed;
  j["roshans_killed"] = r.roshans_killed;
  j["obs_placed"] = r.obs_placed;
  j["sen_placed"] = r.sen_placed;
  j["rune_pickups"] = r.rune_pickups;
  j["teamfight_participation"] = r.teamfight_participation;
  j["items"] = r.items;
  return j.dump();
}

std::string serialize_meta(const MatchMeta& m) {
  ordered_json j;
  j["type"] = "meta";
  j["match_id"] = m.match_id;
  j["winner"] = team_name(m.winner);
  j["duration_s"] = m.duration_s;
  return j.dump();
}

MatchTimeline assemble_timeline(std::vector<IntervalRecord> records, const MatchMeta& meta,
                                const IngestConfig& cfg) {
  for (const auto& r : records) {
    if (r.match_id != meta.match_id) {
      throw DataError("MatchIdMismatch", "record match_id '" + r.match_id +
                                             "' does not match meta '" + meta.match_id + "'");
    }
  }

  std::map<int, HeroTimeline> by_hero;
  for (auto& r : records) {
    auto [it, inserted] = by_hero.try_emplace(r.hero_id);
    if (inserted) {
      it->second.hero_id = r.hero_id;
      it->second.team = r.team;
    } else if (it->second.team != r.team) {
      throw DuplicateHero(r.hero_id, "hero " + std::to_string(r.hero_id) +
                                         " appears on both teams in match " + meta.match_id);
    }
    it->second.records.push_back(std::move(r));
  }

  int team_a = 0;
  int team_b = 0;
  for (const auto& [id, hero] : by_hero) {
    (hero.team == Team::A ? team_a : team_b)++;
  }
  const int expected = cfg.team_size;
  if (team_a != expected || team_b != expected) {
    throw HeroCountViolation("match " + meta.match_id + " has " +
                             std::to_string(by_hero.size()) + " heroes (" +
                             std::to_string(team_a) + " on A, " + std::to_string(team_b) +
                             " on B), expected " + std::to_string(expected) + " per team");
  }

  MatchTimeline tl;
  tl.match_id = meta.match_id;
  tl.duration_s = meta.duration_s;
  tl.winner = meta.winner;
  tl.heroes.reserve(by_hero.size());
  for (Team team : {Team::A, Team::B}) {
    for (auto& [id, hero] : by_hero) {
      if (hero.team == team) tl.heroes.push_back(std::move(hero));
    }
  }

  for (auto& hero : tl.heroes) {
    std::stable_sort(hero.records.begin(), hero.records.end(),
                     [](const IntervalRecord& a, const IntervalRecord& b) {
                       return a.game_time_s < b.game_time_s;
                     });
    for (std::size_t i = 1; i < hero.records.size(); ++i) {
      for (const auto& field : kCumulativeFields) {
        if (field.get(hero.records[i]) < field.get(hero.records[i - 1])) {
          throw NonMonotoneCounter(hero.hero_id, field.name, hero.records[i].game_time_s,
                                   "hero " + std::to_string(hero.hero_id) + " counter '" +
                                       field.name + "' regresses at t=" +
                                       std::to_string(hero.records[i].game_time_s));
        }
      }
    }
  }
  return tl;
}

}  // namespace mslice
