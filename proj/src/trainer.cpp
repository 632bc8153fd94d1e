#include "dlo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "dlo/errors.hpp"
#include "dlo/hash.hpp"
#include "dlo/nn.hpp"
#include "dlo/rng.hpp"

namespace dlo {

void TrainerConfig::validate() const {
  if (num_workers < 1) throw ConfigError("num_workers must be >= 1");
  if (episodes_p < 1) throw ConfigError("episodes_p must be >= 1");
  if (steps_p < 1) throw ConfigError("steps_p must be >= 1");
  if (episodes_o < 1) throw ConfigError("episodes_o must be >= 1");
  if (steps_o < 1) throw ConfigError("steps_o must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (kernel_chunks < 1) throw ConfigError("kernel_chunks must be >= 1");
  hyperparams.validate();
}

std::int64_t TrainingLog::total_transitions() const {
  std::int64_t total = 0;
  for (std::int64_t n : worker_transitions) total += n;
  return total;
}

namespace {

void append_g17(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string TrainingLog::csv() const {
  std::string out = "episode,worker,steps,return,final_error,success,wall_time_s\n";
  for (const TrainEpisode& e : episodes) {
    out += std::to_string(e.episode);
    out += ',';
    out += std::to_string(e.worker);
    out += ',';
    out += std::to_string(e.steps);
    out += ',';
    append_g17(out, e.ep_return);
    out += ',';
    append_g17(out, e.final_error);
    out += ',';
    out += e.success ? '1' : '0';
    out += ',';
    append_g17(out, e.wall_time_s);
    out += '\n';
  }
  return out;
}

std::string TrainingLog::loss_csv() const {
  std::string out = "update,critic_loss,actor_loss\n";
  for (std::size_t i = 0; i < critic_loss.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    append_g17(out, critic_loss[i]);
    out += ',';
    append_g17(out, actor_loss[i]);
    out += '\n';
  }
  return out;
}

namespace {

struct WorkerEpisode {
  std::vector<Transition> transitions;
  TrainEpisode record;
};

double episode_return(const std::vector<Transition>& transitions) {
  double total = 0.0;
  for (const Transition& t : transitions) total += t.reward;
  return total;
}

// The shared training loop: within each round, the workers take turns rolling
// one exploration episode against the learner's current actor, and each
// episode's transitions immediately feed the learner one update per stored
// transition (after the warm-up fill). Keeping the rollout-update interleave
// at episode granularity keeps the data the learner consumes close to the
// policy that produced it, which off-policy theory tolerates but convergence
// speed rewards.
template <typename EpisodeFn>
TrainResult train_rounds(const TrainerConfig& cfg, int state_dim, int action_dim, int rounds,
                         const TrainHooks& hooks, const char* tag, EpisodeFn&& run_one) {
  const Hyperparams& hp = cfg.hyperparams;
  TrainResult res{make_agent(state_dim, action_dim, hp, mix_seed(cfg.seed, 1)), {}};
  DdpgAgent& agent = res.agent;
  TrainingLog& log = res.log;

  const int workers = cfg.num_workers;
  log.worker_transitions.assign(static_cast<std::size_t>(workers), 0);

  ReplayBuffer buffer(static_cast<std::size_t>(hp.buffer_capacity), mix_seed(cfg.seed, 2));
  std::vector<OuNoiseProcess> noises;
  std::vector<Rng> goal_rngs;
  noises.reserve(static_cast<std::size_t>(workers));
  goal_rngs.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    noises.emplace_back(action_dim, hp.ou_theta, hp.ou_sigma, hp.ou_dt,
                        mix_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(w)));
    goal_rngs.emplace_back(mix_seed(cfg.seed, 0x200 + static_cast<std::uint64_t>(w)));
  }

  int episodes_done = 0;
  int last_checkpoint = -1;
  for (int round = 0; round < rounds; ++round) {
    log.sync_hashes.push_back(params_hash(agent.actor));

    for (int w = 0; w < workers; ++w) {
      WorkerEpisode we;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        noises[static_cast<std::size_t>(w)].reset();
        Policy pol{&agent.actor, &noises[static_cast<std::size_t>(w)]};
        PhaseOutcome out =
            run_one(pol, goal_rngs[static_cast<std::size_t>(w)], we.transitions);
        we.record.worker = w;
        we.record.steps = out.steps_used;
        we.record.ep_return = episode_return(we.transitions);
        we.record.final_error = out.final_error;
        we.record.success = out.success;
      } catch (const std::exception& ex) {
        throw std::runtime_error(std::string(tag) + " worker " + std::to_string(w) +
                                 " failed in round " + std::to_string(round) + ": " + ex.what());
      }
      we.record.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      we.record.episode = episodes_done++;
      log.worker_transitions[static_cast<std::size_t>(w)] +=
          static_cast<std::int64_t>(we.transitions.size());
      log.episodes.push_back(we.record);
      if (!hooks.quiet)
        std::printf("[%s] episode %d worker %d steps %d return %.4f error %.4f %s\n", tag,
                    we.record.episode, w, we.record.steps, we.record.ep_return,
                    we.record.final_error, we.record.success ? "success" : "fail");
      if (hooks.on_episode) hooks.on_episode(we.record);

      for (Transition& t : we.transitions) {
        buffer.store(std::move(t));
        if (buffer.size() >= 128) {
          if (auto batch = buffer.sample(static_cast<std::size_t>(agent.batch_size))) {
            log.critic_loss.push_back(critic_update(agent, *batch, cfg.kernel_chunks));
            log.actor_loss.push_back(actor_update(agent, *batch, cfg.kernel_chunks));
            soft_update_targets(agent, agent.tau);
          }
        }
      }
    }

    if (hooks.on_checkpoint && (round + 1) % cfg.eval_every == 0) {
      hooks.on_checkpoint(agent, episodes_done);
      last_checkpoint = round;
    }
  }
  if (hooks.on_checkpoint && last_checkpoint != rounds - 1)
    hooks.on_checkpoint(agent, episodes_done);
  return res;
}

const DeformationGoal& sample_goal(const DatasetFile& dataset, Rng& rng) {
  const std::size_t i = rng.below(dataset.records.size());
  return dataset.records[i].goal;
}

}  // namespace

TrainResult train_agent_o(const TrainerConfig& cfg, const DatasetFile& dataset,
                          const EpisodeConfig& episode_cfg, double control_dt,
                          const TrainHooks& hooks) {
  cfg.validate();
  episode_cfg.validate();
  if (dataset.records.empty()) throw UsageError("dataset has no records");
  if (!(control_dt > 0.0)) throw ConfigError("control_dt must be positive");

  EpisodeConfig run_cfg = episode_cfg;
  run_cfg.max_steps_o = cfg.steps_o;
  const int state_dim = 6 + 3 * dataset.m;

  return train_rounds(
      cfg, state_dim, 3, cfg.episodes_o, hooks, "train-o",
      [&](Policy& pol, Rng& rng, std::vector<Transition>& transitions) {
        const DeformationGoal& goal = sample_goal(dataset, rng);
        Vec3 theta = run_cfg.home.euler;
        return run_orientation_phase(pol, goal, theta, run_cfg, control_dt, true, &transitions,
                                     nullptr);
      });
}

TrainResult train_agent_p(const TrainerConfig& cfg, const DatasetFile& dataset,
                          RewardKind reward_kind, const DloParams& params, const SimConfig& sim,
                          const EpisodeConfig& episode_cfg, const TrainHooks& hooks) {
  cfg.validate();
  episode_cfg.validate();
  params.validate();
  sim.validate();
  if (dataset.records.empty()) throw UsageError("dataset has no records");

  EpisodeConfig run_cfg = episode_cfg;
  run_cfg.max_steps_p = cfg.steps_p;
  const int state_dim = 6 + 6 * dataset.m;

  return train_rounds(
      cfg, state_dim, 3, cfg.episodes_p, hooks, "train-p",
      [&](Policy& pol, Rng& rng, std::vector<Transition>& transitions) {
        const DeformationGoal& goal = sample_goal(dataset, rng);
        EpisodeResult er = run_episode_multiac6_star(pol, goal, params, sim, run_cfg, true,
                                                     reward_kind, &transitions, nullptr);
        return er.position;
      });
}

TrainResult train_agent_single(const TrainerConfig& cfg, const DatasetFile& dataset,
                               SingleAgentVariant variant, RewardKind reward_kind,
                               const DloParams& params, const SimConfig& sim,
                               const EpisodeConfig& episode_cfg, const TrainHooks& hooks) {
  cfg.validate();
  episode_cfg.validate();
  params.validate();
  sim.validate();
  if (dataset.records.empty()) throw UsageError("dataset has no records");

  EpisodeConfig run_cfg = episode_cfg;
  run_cfg.max_steps_p = cfg.steps_p;
  const bool six = variant == SingleAgentVariant::Ac6;
  const int state_dim = (six ? 12 : 6) + 6 * dataset.m;
  const int action_dim = six ? 6 : 3;

  return train_rounds(
      cfg, state_dim, action_dim, cfg.episodes_p, hooks, six ? "train-ac6" : "train-ac3",
      [&](Policy& pol, Rng& rng, std::vector<Transition>& transitions) {
        const DeformationGoal& goal = sample_goal(dataset, rng);
        EpisodeResult er = run_episode_single_agent(pol, goal, variant, params, sim, run_cfg,
                                                    true, reward_kind, &transitions, nullptr);
        return er.position;
      });
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "multiac6") return EvalMode::MultiAc6;
  if (name == "multiac6_star") return EvalMode::MultiAc6Star;
  if (name == "ac3") return EvalMode::Ac3;
  if (name == "ac6") return EvalMode::Ac6;
  throw UsageError("unknown eval mode: " + name +
                   " (expected multiac6, multiac6_star, ac3, or ac6)");
}

std::string eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::MultiAc6: return "multiac6";
    case EvalMode::MultiAc6Star: return "multiac6_star";
    case EvalMode::Ac3: return "ac3";
    case EvalMode::Ac6: return "ac6";
  }
  throw std::logic_error("unreachable eval mode");
}

namespace {

void require_arch(const MlpNetwork* net, const char* label, int in, int out) {
  if (net == nullptr)
    throw UsageError(std::string("eval mode requires ") + label);
  if (net->input_size() != in || net->output_size() != out)
    throw DimensionError(std::string(label) + " expects " + std::to_string(in) + " -> " +
                         std::to_string(out) + ", got " + std::to_string(net->input_size()) +
                         " -> " + std::to_string(net->output_size()));
}

}  // namespace

EvalReport evaluate(const EvalAgents& agents, const DatasetFile& dataset, EvalMode mode,
                    double zeta_noise_deg, const DloParams& params, const SimConfig& sim,
                    const EpisodeConfig& episode_cfg, std::uint64_t seed) {
  episode_cfg.validate();
  params.validate();
  sim.validate();
  if (dataset.records.empty()) throw UsageError("dataset has no records");
  const int m = dataset.m;
  switch (mode) {
    case EvalMode::MultiAc6:
      require_arch(agents.actor_o, "orientation actor", 6 + 3 * m, 3);
      require_arch(agents.actor_p, "position actor", 6 + 6 * m, 3);
      break;
    case EvalMode::MultiAc6Star:
    case EvalMode::Ac3:
      require_arch(agents.actor_p, "position actor", 6 + 6 * m, 3);
      break;
    case EvalMode::Ac6:
      require_arch(agents.actor_p, "combined actor", 12 + 6 * m, 6);
      break;
  }

  const double noise_rad = zeta_noise_deg * std::numbers::pi / 180.0;
  const int n = static_cast<int>(dataset.records.size());
  std::vector<EvalOutcome> outcomes(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      DeformationGoal goal = dataset.records[static_cast<std::size_t>(i)].goal;
      if (noise_rad != 0.0) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        for (int axis = 0; axis < 3; ++axis)
          goal.zeta[static_cast<std::size_t>(axis)] = wrap_angle(
              goal.zeta[static_cast<std::size_t>(axis)] + rng.uniform(-noise_rad, noise_rad));
      }
      EpisodeResult er;
      switch (mode) {
        case EvalMode::MultiAc6: {
          Policy pol_o{agents.actor_o, nullptr};
          Policy pol_p{agents.actor_p, nullptr};
          er = run_episode_multiac6(pol_o, pol_p, goal, params, sim, episode_cfg, false,
                                    RewardKind::Max, nullptr, nullptr, nullptr);
          break;
        }
        case EvalMode::MultiAc6Star: {
          Policy pol{agents.actor_p, nullptr};
          er = run_episode_multiac6_star(pol, goal, params, sim, episode_cfg, false,
                                         RewardKind::Max, nullptr, nullptr);
          break;
        }
        case EvalMode::Ac3: {
          Policy pol{agents.actor_p, nullptr};
          er = run_episode_single_agent(pol, goal, SingleAgentVariant::Ac3, params, sim,
                                        episode_cfg, false, RewardKind::Max, nullptr, nullptr);
          break;
        }
        case EvalMode::Ac6: {
          Policy pol{agents.actor_p, nullptr};
          er = run_episode_single_agent(pol, goal, SingleAgentVariant::Ac6, params, sim,
                                        episode_cfg, false, RewardKind::Max, nullptr, nullptr);
          break;
        }
      }
      outcomes[static_cast<std::size_t>(i)] = {i, er.position.success, er.position.final_error,
                                               er.position.steps_used};
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(i)] = ex.what();
    }
  }

  for (int i = 0; i < n; ++i)
    if (!errors[static_cast<std::size_t>(i)].empty())
      throw std::runtime_error("eval goal " + std::to_string(i) + ": " +
                               errors[static_cast<std::size_t>(i)]);
  return aggregate(outcomes);
}

}  // namespace dlo
