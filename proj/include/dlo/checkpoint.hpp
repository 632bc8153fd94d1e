#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlo/ddpg.hpp"

namespace dlo {

enum class AgentRole { Position, Orientation, Ac3, Ac6 };
AgentRole parse_agent_role(const std::string& name);  // throws UsageError
std::string agent_role_name(AgentRole role);

// Self-describing text snapshot of an agent: both networks, both targets,
// both optimizers, and the metadata needed to reproduce the run. Parameters
// are stored as hexfloats, so a save -> load -> save cycle is byte-identical.
// Exploration-noise state is deliberately not persisted (it is reset at every
// episode boundary anyway).
struct Checkpoint {
  int version = 1;
  AgentRole role = AgentRole::Position;
  Hyperparams hyperparams;
  std::uint64_t seed = 0;
  std::int64_t episodes_done = 0;
  std::uint64_t dataset_hash = 0;

  std::vector<int> actor_arch;  // layer sizes, input first
  std::vector<int> critic_arch;
  std::vector<double> actor_params;
  std::vector<double> critic_params;
  std::vector<double> actor_target_params;
  std::vector<double> critic_target_params;
  std::vector<double> actor_moments;  // flat Adam first/second moments
  std::vector<double> critic_moments;
  std::int64_t actor_opt_steps = 0;
  std::int64_t critic_opt_steps = 0;

  // Structural consistency: array lengths match the architecture descriptor,
  // the critic consumes state + action, every value is finite. Throws
  // IntegrityError (ConfigError for bad hyperparameters).
  void validate() const;
};

Checkpoint make_checkpoint(const DdpgAgent& agent, const Hyperparams& hp, AgentRole role,
                           std::uint64_t seed, std::int64_t episodes_done,
                           std::uint64_t dataset_hash);

// Rebuilds the full agent from a validated checkpoint. The restored agent's
// deterministic actions match the saved agent's exactly.
DdpgAgent restore_agent(const Checkpoint& ck);

std::string checkpoint_text(const Checkpoint& ck);

// Writes atomically (temp file + rename), so an interrupted writer never
// destroys the previous valid checkpoint at the path.
void save_checkpoint(const Checkpoint& ck, const std::string& path);

// Strict parse: IoError for malformed or truncated files, VersionError for an
// unrecognized format version, IntegrityError for structural corruption.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dlo
