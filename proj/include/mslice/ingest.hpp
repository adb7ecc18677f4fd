#ifndef MSLICE_INGEST_HPP
#define MSLICE_INGEST_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mslice/records.hpp"

namespace mslice {

struct IngestConfig {
  int hero_pool = 114;   // valid hero ids are 1..hero_pool
  int item_types = 244;  // valid item ids are 1..item_types
  int team_size = 5;
};

// Per-line problem found while parsing a stream. Offending lines are reported
// and skipped; parsing continues.
struct LineIssue {
  enum class Kind { malformed_line, schema_violation };
  Kind kind = Kind::malformed_line;
  int line_no = 0;        // 1-based over the stream
  std::string field;      // offending field for schema violations
  std::string detail;

  const char* class_name() const {
    return kind == Kind::malformed_line ? "MalformedLine" : "SchemaViolation";
  }
};

struct ParseResult {
  std::optional<MatchMeta> meta;
  std::vector<IntervalRecord> records;
  std::vector<LineIssue> issues;
  int dropped_pre_horn = 0;  // records with game_time_s < 0, dropped by policy
};

// Reads newline-delimited JSON records. A meta line may appear anywhere but is
// expected first; records with negative game time are dropped and counted.
ParseResult parse_interval_stream(std::istream& in, const IngestConfig& cfg = {});
ParseResult parse_interval_stream(const std::string& text, const IngestConfig& cfg = {});

// One JSON line, the exact inverse of the parser (parse of the output yields
// an equal record).
std::string serialize_record(const IntervalRecord& rec);
std::string serialize_meta(const MatchMeta& meta);

// Groups records by hero, sorts by game time (stable) and validates the
// timeline invariants: 2*team_size distinct heroes split evenly across teams,
// no hero on both teams, cumulative counters non-decreasing. Gold is allowed
// to drop (it is spent); teamfight participation is treated as opaque.
MatchTimeline assemble_timeline(std::vector<IntervalRecord> records, const MatchMeta& meta,
                                const IngestConfig& cfg = {});

}  // namespace mslice

#endif
