#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dlo/dataset.hpp"
#include "dlo/ddpg.hpp"
#include "dlo/episode.hpp"

namespace dlo {

struct TrainerConfig {
  int num_workers = 8;
  int episodes_p = 100;  // per worker
  int steps_p = 300;
  int episodes_o = 60;  // per worker
  int steps_o = 100;
  Hyperparams hyperparams;
  int eval_every = 20;  // checkpoint cadence, in rounds
  std::uint64_t seed = 0;
  int kernel_chunks = 1;  // gradient-kernel parallelism (1 = serial reference)

  void validate() const;  // throws ConfigError
};

struct TrainEpisode {
  int episode = 0;  // global index, monotone per worker
  int worker = 0;
  int steps = 0;
  double ep_return = 0.0;
  double final_error = 0.0;
  bool success = false;
  double wall_time_s = 0.0;
};

struct TrainingLog {
  std::vector<TrainEpisode> episodes;
  std::vector<double> critic_loss;  // one entry per learner update
  std::vector<double> actor_loss;
  std::vector<std::int64_t> worker_transitions;  // buffer contributions per worker
  std::vector<std::uint64_t> sync_hashes;        // actor hash at each round sync

  std::int64_t total_transitions() const;
  std::string csv() const;       // per-episode table
  std::string loss_csv() const;  // per-update losses
};

struct TrainHooks {
  bool quiet = false;  // suppress the per-episode progress line
  std::function<void(const TrainEpisode&)> on_episode;          // streamed as merged
  std::function<void(const DdpgAgent&, int)> on_checkpoint;     // agent, episodes done
};

struct TrainResult {
  DdpgAgent agent;
  TrainingLog log;
};

// Kinematic orientation training: workers roll out exploration episodes on
// goals sampled from the dataset, the single learner consumes the shared
// buffer with one (critic, actor, target) update per stored transition after
// a 128-transition warm-up. No simulator involved.
TrainResult train_agent_o(const TrainerConfig& cfg, const DatasetFile& dataset,
                          const EpisodeConfig& episode_cfg, double control_dt,
                          const TrainHooks& hooks = {});

// Position training: each episode applies the goal's zeta directly (the
// hand-crafted orientation start) and runs the simulator-coupled position
// phase; otherwise the same worker/learner contract as train_agent_o.
TrainResult train_agent_p(const TrainerConfig& cfg, const DatasetFile& dataset,
                          RewardKind reward_kind, const DloParams& params,
                          const SimConfig& sim, const EpisodeConfig& episode_cfg,
                          const TrainHooks& hooks = {});

// Single-agent baselines on the full task (no phase decomposition): AC3 has a
// translation-only actor, AC6 a combined translation/rotation actor. Episode
// budget and step cap are taken from the position knobs.
TrainResult train_agent_single(const TrainerConfig& cfg, const DatasetFile& dataset,
                               SingleAgentVariant variant, RewardKind reward_kind,
                               const DloParams& params, const SimConfig& sim,
                               const EpisodeConfig& episode_cfg, const TrainHooks& hooks = {});

enum class EvalMode { MultiAc6, MultiAc6Star, Ac3, Ac6 };
EvalMode parse_eval_mode(const std::string& name);
std::string eval_mode_name(EvalMode mode);

// actor_p is the position agent for the multiac6 modes and the whole agent
// for ac3 / ac6; actor_o is only consulted by multiac6.
struct EvalAgents {
  const MlpNetwork* actor_o = nullptr;
  const MlpNetwork* actor_p = nullptr;
};

// One exploration-free episode per dataset goal, aggregated into SR / AE / ME
// at the episode config's delta_p. zeta_noise_deg perturbs each goal's zeta
// uniformly per axis (deterministic per seed and goal index); 0 leaves goals
// bit-identical. Never mutates the networks.
EvalReport evaluate(const EvalAgents& agents, const DatasetFile& dataset, EvalMode mode,
                    double zeta_noise_deg, const DloParams& params, const SimConfig& sim,
                    const EpisodeConfig& episode_cfg, std::uint64_t seed);

}  // namespace dlo
