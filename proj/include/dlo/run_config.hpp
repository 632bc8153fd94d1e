#pragma once

#include <string>

#include "dlo/dlo_sim.hpp"
#include "dlo/episode.hpp"
#include "dlo/trainer.hpp"

namespace dlo {

struct RunPaths {
  std::string dataset;
  std::string checkpoint;
  std::string checkpoint_orientation;
  std::string checkpoint_position;
  std::string log;
  std::string losses;
  std::string report;
  std::string trace;
};

// Every tunable of the toolkit in one flat key-value file. Defaults are the
// published DDPG table plus the desk-scale training schedule; run_config_text
// of a default instance doubles as a documented template.
struct RunConfig {
  TrainerConfig trainer;  // carries the DDPG hyperparameters
  EpisodeConfig episode;
  DloParams dlo;
  SimConfig sim;
  std::string reward = "max";
  RunPaths paths;

  void validate() const;  // throws ConfigError
};

// Strict parse: '#' comment lines and blank lines are ignored, every other
// line is "key value..."; unknown or repeated keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// DLOSHAPE_* environment variables override path entries only (never tunables).
void apply_env_overrides(RunConfig& cfg);

// Canonical emission of every key; parse_run_config round-trips it exactly.
std::string run_config_text(const RunConfig& cfg);

}  // namespace dlo
