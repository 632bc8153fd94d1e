#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dlo/checkpoint.hpp"
#include "dlo/dataset.hpp"
#include "dlo/errors.hpp"
#include "dlo/hash.hpp"
#include "dlo/run_config.hpp"
#include "dlo/trainer.hpp"

namespace {

using namespace dlo;

// 0 success, 2 usage/config/input problems, 3 runtime failures
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) != nullptr ||
      dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const DimensionError*>(&e) != nullptr)
    return 2;
  return 3;
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

std::string require_path(const std::string& flag_value, const std::string& config_value,
                         const char* what) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw UsageError(std::string("no path given for ") + what +
                   " (pass the flag or set it in the config)");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

DatasetFile open_dataset(const std::string& path, const RunConfig& cfg) {
  DatasetFile dataset = load_dataset(path, sim_param_hash(cfg.dlo, cfg.sim));
  if (dataset.cross_simulator)
    std::fprintf(stderr, "warning: %s\n", dataset.warning.c_str());
  return dataset;
}

struct GenOpts {
  std::string box = "small";
  long long n = 1000;
  unsigned long long seed = 1;
  std::string out;
  std::string config;
};

void cmd_gen_dataset(const GenOpts& o) {
  RunConfig cfg = load_config(o.config);
  const std::string out = require_path(o.out, cfg.paths.dataset, "the dataset output");
  if (o.n < 1) throw UsageError("--n must be at least 1");

  const WorkspaceBox box = workspace_preset(o.box);
  const DatasetFile file =
      generate_dataset(box, static_cast<std::size_t>(o.n), o.seed, cfg.dlo, cfg.sim);
  save_dataset(file, out);

  double residual_sum = 0.0;
  double residual_max = 0.0;
  for (const DeformationRecord& rec : file.records) {
    residual_sum += rec.settle_residual;
    residual_max = std::max(residual_max, rec.settle_residual);
  }
  std::printf("wrote %llu records to %s\n",
              static_cast<unsigned long long>(file.records.size()), out.c_str());
  std::printf("box %s, seed %llu, m %d\n", file.box_name.c_str(),
              static_cast<unsigned long long>(file.seed), file.m);
  std::printf("max deformation %.4f m\n", max_deformation(file, cfg.dlo));
  std::printf("settle residual mean %.3g m/s, max %.3g m/s\n",
              residual_sum / static_cast<double>(file.records.size()), residual_max);
}

struct TrainOpts {
  std::string agent;
  std::string dataset;
  std::string out;
  std::string config;
  std::string reward;
  std::string log;
  std::string losses;
  bool quiet = false;
};

void cmd_train(const TrainOpts& o) {
  RunConfig cfg = load_config(o.config);
  const AgentRole role = parse_agent_role(o.agent);
  const RewardKind kind = parse_reward_kind(o.reward.empty() ? cfg.reward : o.reward);
  const std::string dataset_path = require_path(o.dataset, cfg.paths.dataset, "the dataset");
  const std::string out = require_path(o.out, cfg.paths.checkpoint, "the checkpoint output");

  const DatasetFile dataset = open_dataset(dataset_path, cfg);
  const std::uint64_t dataset_hash = fnv1a(dataset_text(dataset));

  TrainHooks hooks;
  hooks.quiet = o.quiet;
  hooks.on_checkpoint = [&](const DdpgAgent& agent, int episodes_done) {
    save_checkpoint(make_checkpoint(agent, cfg.trainer.hyperparams, role, cfg.trainer.seed,
                                    episodes_done, dataset_hash),
                    out);
  };

  TrainResult res = [&] {
    switch (role) {
      case AgentRole::Orientation:
        return train_agent_o(cfg.trainer, dataset, cfg.episode, cfg.sim.control_dt, hooks);
      case AgentRole::Position:
        return train_agent_p(cfg.trainer, dataset, kind, cfg.dlo, cfg.sim, cfg.episode, hooks);
      case AgentRole::Ac3:
        return train_agent_single(cfg.trainer, dataset, SingleAgentVariant::Ac3, kind, cfg.dlo,
                                  cfg.sim, cfg.episode, hooks);
      case AgentRole::Ac6:
        return train_agent_single(cfg.trainer, dataset, SingleAgentVariant::Ac6, kind, cfg.dlo,
                                  cfg.sim, cfg.episode, hooks);
    }
    throw std::logic_error("unreachable agent role");
  }();

  const std::string log_path = !o.log.empty() ? o.log : cfg.paths.log;
  if (!log_path.empty()) write_text_file(log_path, res.log.csv());
  const std::string losses_path = !o.losses.empty() ? o.losses : cfg.paths.losses;
  if (!losses_path.empty()) write_text_file(losses_path, res.log.loss_csv());

  int successes = 0;
  for (const TrainEpisode& e : res.log.episodes) successes += e.success ? 1 : 0;
  std::printf("trained %s agent: %llu episodes (%d successful), %lld transitions, %llu updates\n",
              agent_role_name(role).c_str(),
              static_cast<unsigned long long>(res.log.episodes.size()), successes,
              static_cast<long long>(res.log.total_transitions()),
              static_cast<unsigned long long>(res.log.critic_loss.size()));
  std::printf("checkpoint %s\n", out.c_str());
}

struct AgentFiles {
  std::optional<DdpgAgent> orientation;
  std::optional<DdpgAgent> position;  // the single agent for star / ac3 / ac6
  EvalAgents agents;
};

// Loads whatever the mode requires and enforces the checkpoint role tags.
AgentFiles load_agents(EvalMode mode, const std::string& ck_flag, const std::string& ck_o_flag,
                       const std::string& ck_p_flag, const RunConfig& cfg) {
  auto role_checked = [](const std::string& path, AgentRole expected) {
    const Checkpoint ck = load_checkpoint(path);
    if (ck.role != expected)
      throw UsageError("checkpoint '" + path + "' has role '" + agent_role_name(ck.role) +
                       "', expected '" + agent_role_name(expected) + "'");
    return restore_agent(ck);
  };

  AgentFiles out;
  if (mode == EvalMode::MultiAc6) {
    const std::string po = require_path(ck_o_flag, cfg.paths.checkpoint_orientation,
                                        "the orientation checkpoint");
    const std::string pp = require_path(!ck_p_flag.empty() ? ck_p_flag : ck_flag,
                                        cfg.paths.checkpoint_position,
                                        "the position checkpoint");
    out.orientation = role_checked(po, AgentRole::Orientation);
    out.position = role_checked(pp, AgentRole::Position);
    out.agents.actor_o = &out.orientation->actor;
    out.agents.actor_p = &out.position->actor;
    return out;
  }

  AgentRole expected = AgentRole::Position;
  if (mode == EvalMode::Ac3) expected = AgentRole::Ac3;
  if (mode == EvalMode::Ac6) expected = AgentRole::Ac6;
  std::string fallback = cfg.paths.checkpoint;
  if (mode == EvalMode::MultiAc6Star && fallback.empty())
    fallback = cfg.paths.checkpoint_position;
  const std::string path = require_path(!ck_flag.empty() ? ck_flag : ck_p_flag, fallback,
                                        "the agent checkpoint");
  out.position = role_checked(path, expected);
  out.agents.actor_p = &out.position->actor;
  return out;
}

struct EvalOpts {
  std::string mode = "multiac6";
  std::string dataset;
  std::string config;
  std::string out;
  std::string checkpoint;
  std::string checkpoint_o;
  std::string checkpoint_p;
  std::vector<double> delta_p_cm = {5.0, 3.0};
  double zeta_noise_deg = 0.0;
  std::vector<double> sweep;
  long long seed = -1;
};

void cmd_eval(const EvalOpts& o) {
  RunConfig cfg = load_config(o.config);
  const EvalMode mode = parse_eval_mode(o.mode);
  if (o.delta_p_cm.empty()) throw UsageError("--delta-p needs at least one threshold");
  const std::string dataset_path = require_path(o.dataset, cfg.paths.dataset, "the dataset");
  const DatasetFile dataset = open_dataset(dataset_path, cfg);
  const AgentFiles loaded = load_agents(mode, o.checkpoint, o.checkpoint_o, o.checkpoint_p, cfg);
  const std::uint64_t seed =
      o.seed < 0 ? cfg.trainer.seed : static_cast<std::uint64_t>(o.seed);

  char label[128];
  std::vector<std::pair<std::string, EvalReport>> rows;
  std::string csv = "mode,delta_p_cm,zeta_noise_deg,sr,ae_m,sigma_m,me_m\n";
  auto add_row = [&](double delta_cm, double noise_deg) {
    EpisodeConfig ecfg = cfg.episode;
    ecfg.delta_p = delta_cm / 100.0;
    const EvalReport rep =
        evaluate(loaded.agents, dataset, mode, noise_deg, cfg.dlo, cfg.sim, ecfg, seed);
    std::snprintf(label, sizeof(label), "%s dp=%gcm noise=%gdeg", eval_mode_name(mode).c_str(),
                  delta_cm, noise_deg);
    rows.emplace_back(label, rep);
    char line[192];
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  eval_mode_name(mode).c_str(), delta_cm, noise_deg, rep.sr, rep.ae, rep.sigma,
                  rep.me);
    csv += line;
  };

  for (double delta_cm : o.delta_p_cm) add_row(delta_cm, o.zeta_noise_deg);
  for (double noise_deg : o.sweep) add_row(o.delta_p_cm.front(), noise_deg);

  std::fputs(render_report_table(rows).c_str(), stdout);
  const std::string out = !o.out.empty() ? o.out : cfg.paths.report;
  if (!out.empty()) {
    write_text_file(out, csv);
    std::printf("report %s\n", out.c_str());
  }
}

struct RolloutOpts {
  std::string mode = "multiac6";
  std::string dataset;
  std::string config;
  std::string out;
  std::string json;
  std::string checkpoint;
  std::string checkpoint_o;
  std::string checkpoint_p;
  long long goal = 0;
};

void cmd_rollout(const RolloutOpts& o) {
  RunConfig cfg = load_config(o.config);
  const EvalMode mode = parse_eval_mode(o.mode);
  const RewardKind kind = parse_reward_kind(cfg.reward);
  const std::string dataset_path = require_path(o.dataset, cfg.paths.dataset, "the dataset");
  const DatasetFile dataset = open_dataset(dataset_path, cfg);
  if (o.goal < 0 || o.goal >= static_cast<long long>(dataset.records.size()))
    throw UsageError("goal index " + std::to_string(o.goal) + " is out of range (dataset has " +
                     std::to_string(dataset.records.size()) + " records)");
  const DeformationGoal& goal = dataset.records[static_cast<std::size_t>(o.goal)].goal;
  const AgentFiles loaded = load_agents(mode, o.checkpoint, o.checkpoint_o, o.checkpoint_p, cfg);
  const std::string out = require_path(o.out, cfg.paths.trace, "the trace output");

  EpisodeTrace trace;
  EpisodeResult res;
  const Policy pol_p{loaded.agents.actor_p, nullptr};
  switch (mode) {
    case EvalMode::MultiAc6: {
      const Policy pol_o{loaded.agents.actor_o, nullptr};
      res = run_episode_multiac6(pol_o, pol_p, goal, cfg.dlo, cfg.sim, cfg.episode, false, kind,
                                 nullptr, nullptr, &trace);
      break;
    }
    case EvalMode::MultiAc6Star:
      res = run_episode_multiac6_star(pol_p, goal, cfg.dlo, cfg.sim, cfg.episode, false, kind,
                                      nullptr, &trace);
      break;
    case EvalMode::Ac3:
      res = run_episode_single_agent(pol_p, goal, SingleAgentVariant::Ac3, cfg.dlo, cfg.sim,
                                     cfg.episode, false, kind, nullptr, &trace);
      break;
    case EvalMode::Ac6:
      res = run_episode_single_agent(pol_p, goal, SingleAgentVariant::Ac6, cfg.dlo, cfg.sim,
                                     cfg.episode, false, kind, nullptr, &trace);
      break;
  }

  write_text_file(out, trace_csv(trace));
  if (!o.json.empty()) write_text_file(o.json, trace_json(trace));

  std::printf("goal %lld, mode %s\n", o.goal, eval_mode_name(mode).c_str());
  std::printf("orientation: %s in %d steps (error %.4f rad)\n",
              res.orientation.success ? "success" : "fail", res.orientation.steps_used,
              res.orientation.final_error);
  std::printf("position: %s in %d steps (error %.4f m)\n",
              res.position.success ? "success" : "fail", res.position.steps_used,
              res.position.final_error);
  if (res.diverged) std::printf("simulation diverged: %s\n", res.diagnostic.c_str());
  std::printf("trace %s (%llu rows)\n", out.c_str(),
              static_cast<unsigned long long>(trace.steps.size()));
}

struct InspectOpts {
  std::string path;
};

void cmd_inspect(const InspectOpts& o) {
  const Checkpoint ck = load_checkpoint(o.path);
  const DdpgAgent agent = restore_agent(ck);
  const Hyperparams& hp = ck.hyperparams;

  std::printf("checkpoint %s\n", o.path.c_str());
  std::printf("version %d, role %s\n", ck.version, agent_role_name(ck.role).c_str());
  std::printf("seed %llu, episodes %lld, dataset_hash %016llx\n",
              static_cast<unsigned long long>(ck.seed),
              static_cast<long long>(ck.episodes_done),
              static_cast<unsigned long long>(ck.dataset_hash));
  auto print_arch = [](const char* name, const std::vector<int>& arch) {
    std::printf("%s", name);
    for (int s : arch) std::printf(" %d", s);
    std::printf("\n");
  };
  print_arch("actor arch", ck.actor_arch);
  print_arch("critic arch", ck.critic_arch);
  std::printf("parameters: actor %llu, critic %llu\n",
              static_cast<unsigned long long>(ck.actor_params.size()),
              static_cast<unsigned long long>(ck.critic_params.size()));
  std::printf("optimizer steps: actor %lld, critic %lld\n",
              static_cast<long long>(ck.actor_opt_steps),
              static_cast<long long>(ck.critic_opt_steps));
  std::printf("hyperparams: layers %d, width %d, actor_lr %g, critic_lr %g, buffer %llu, "
              "batch %d, gamma %g, tau %g, ou(%g, %g, %g)\n",
              hp.hidden_layers, hp.hidden_size, hp.actor_lr, hp.critic_lr,
              static_cast<unsigned long long>(hp.buffer_capacity), hp.batch_size, hp.gamma,
              hp.tau, hp.ou_theta, hp.ou_sigma, hp.ou_dt);
  std::printf("param hashes: actor %016llx, critic %016llx, actor_target %016llx, "
              "critic_target %016llx\n",
              static_cast<unsigned long long>(params_hash(agent.actor)),
              static_cast<unsigned long long>(params_hash(agent.critic)),
              static_cast<unsigned long long>(params_hash(agent.actor_target)),
              static_cast<unsigned long long>(params_hash(agent.critic_target)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DDPG shape control of a simulated deformable linear object"};
  app.require_subcommand(1);

  GenOpts g;
  CLI::App* gen = app.add_subcommand("gen-dataset", "Generate a workspace deformation dataset");
  gen->add_option("--box", g.box, "Workspace preset: small, medium, large")
      ->capture_default_str();
  gen->add_option("--n", g.n, "Number of records")->capture_default_str();
  gen->add_option("--seed", g.seed, "Root seed")->capture_default_str();
  gen->add_option("--out", g.out, "Output dataset path");
  gen->add_option("--config", g.config, "Run configuration file");

  TrainOpts t;
  CLI::App* train = app.add_subcommand("train", "Train an agent");
  train->add_option("--agent", t.agent, "Agent role: orientation, position, ac3, ac6")
      ->required();
  train->add_option("--dataset", t.dataset, "Training dataset path");
  train->add_option("--out", t.out, "Checkpoint output path");
  train->add_option("--config", t.config, "Run configuration file");
  train->add_option("--reward", t.reward, "Position reward: max, mean, dtw");
  train->add_option("--log", t.log, "Episode log CSV path");
  train->add_option("--losses", t.losses, "Update loss CSV path");
  train->add_flag("--quiet", t.quiet, "Suppress per-episode progress lines");

  EvalOpts e;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate agents over a dataset");
  eval->add_option("--mode", e.mode, "multiac6, multiac6_star, ac3, ac6")
      ->capture_default_str();
  eval->add_option("--dataset", e.dataset, "Evaluation dataset path");
  eval->add_option("--config", e.config, "Run configuration file");
  eval->add_option("--out", e.out, "Summary CSV output path");
  eval->add_option("--checkpoint", e.checkpoint, "Agent checkpoint (single-agent modes)");
  eval->add_option("--checkpoint-orientation", e.checkpoint_o, "Orientation agent checkpoint");
  eval->add_option("--checkpoint-position", e.checkpoint_p, "Position agent checkpoint");
  eval->add_option("--delta-p", e.delta_p_cm, "Success thresholds, centimeters")
      ->capture_default_str();
  eval->add_option("--zeta-noise", e.zeta_noise_deg, "Orientation goal noise, degrees")
      ->capture_default_str();
  eval->add_option("--sweep", e.sweep,
                   "Extra noise levels (degrees) evaluated at the first threshold");
  eval->add_option("--seed", e.seed, "Evaluation seed (default: trainer.seed)");

  RolloutOpts r;
  CLI::App* rollout = app.add_subcommand("rollout", "Run one episode and dump its trace");
  rollout->add_option("--mode", r.mode, "multiac6, multiac6_star, ac3, ac6")
      ->capture_default_str();
  rollout->add_option("--dataset", r.dataset, "Dataset path");
  rollout->add_option("--config", r.config, "Run configuration file");
  rollout->add_option("--goal", r.goal, "Goal index within the dataset")->capture_default_str();
  rollout->add_option("--out", r.out, "Trace CSV output path");
  rollout->add_option("--json", r.json, "Optional trace JSON output path");
  rollout->add_option("--checkpoint", r.checkpoint, "Agent checkpoint (single-agent modes)");
  rollout->add_option("--checkpoint-orientation", r.checkpoint_o,
                      "Orientation agent checkpoint");
  rollout->add_option("--checkpoint-position", r.checkpoint_p, "Position agent checkpoint");

  InspectOpts i;
  CLI::App* inspect = app.add_subcommand("inspect-checkpoint", "Describe a checkpoint file");
  inspect->add_option("path", i.path, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe);
    return 2;
  }

  try {
    if (gen->parsed()) cmd_gen_dataset(g);
    else if (train->parsed()) cmd_train(t);
    else if (eval->parsed()) cmd_eval(e);
    else if (rollout->parsed()) cmd_rollout(r);
    else if (inspect->parsed()) cmd_inspect(i);
    return 0;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return exit_code_for(ex);
  }
}
