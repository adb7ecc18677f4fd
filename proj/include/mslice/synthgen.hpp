// Deterministic synthetic match generator.
//
// Matches follow a latent advantage path: a random walk bridged so it ends at
// +drift when team A wins and -drift otherwise. The path leaks into exactly
// the fields a real match would reflect it in — farm and fight counters get a
// team-signed boost (visible to per-hero models through the team difference),
// while map positions and tower totals track the shared front line (visible
// only to models that read the whole slice). Early records carry extra noise
// so predictions should improve as a match progresses.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mslice/records.hpp"

namespace mslice {

struct SynthConfig {
  int n_matches = 100;
  std::uint64_t seed = 1;

  int hero_pool = 114;
  int heroes_per_match = 10;
  int item_types = 244;

  double mean_length_min = 40.0;
  double std_length_min = 10.0;
  double min_length_min = 10.0;
  double max_length_min = 100.0;

  double advantage_drift = 1.0;       // |latent advantage| at the final record
  double advantage_volatility = 0.2;  // random-walk step scale per minute
  double early_noise_mult = 3.0;      // noise multiplier at 0% game time (1x at 100%)
  double feature_noise = 1.0;         // global scale on all observation noise
};

// Total and deterministic in (config, match_index).
MatchTimeline generate_match(const SynthConfig& cfg, int match_index);

std::string synth_match_id(const SynthConfig& cfg, int match_index);

// One JSON-lines file per match (ingestion format); returns the file paths.
std::vector<std::string> generate_corpus(const SynthConfig& cfg, const std::string& out_dir);

void write_match_file(const std::string& path, const MatchTimeline& timeline);

}  // namespace mslice
