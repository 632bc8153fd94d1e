#include "dlo/episode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "dlo/errors.hpp"
#include "json.hpp"

namespace dlo {

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "max") return RewardKind::Max;
  if (name == "mean") return RewardKind::Mean;
  if (name == "dtw") return RewardKind::Dtw;
  throw UsageError("unknown reward kind '" + name + "' (expected max, mean, or dtw)");
}

std::string reward_kind_name(RewardKind kind) {
  switch (kind) {
    case RewardKind::Max: return "max";
    case RewardKind::Mean: return "mean";
    case RewardKind::Dtw: return "dtw";
  }
  throw UsageError("unknown reward kind");
}

void EpisodeConfig::validate() const {
  if (max_steps_p < 1 || max_steps_o < 1)
    throw ConfigError("episode step caps must be at least 1");
  if (!(delta_p > 0.0) || !(delta_o > 0.0))
    throw ConfigError("success thresholds must be positive");
  if (!(max_lin_vel > 0.0) || !(max_ang_vel > 0.0))
    throw ConfigError("velocity caps must be positive");
  for (int i = 0; i < 3; ++i)
    if (!(workspace.lo[i] < workspace.hi[i]))
      throw ConfigError("workspace box is empty along an axis");
  if (!workspace.contains(home.position))
    throw ConfigError("home position lies outside the workspace box");
}

static void append_vec3(std::vector<double>& out, const Vec3& v) {
  out.push_back(v[0]);
  out.push_back(v[1]);
  out.push_back(v[2]);
}

static void append_points(std::vector<double>& out, const FeaturePointSet& pts) {
  for (const Vec3& p : pts) append_vec3(out, p);
}

static void check_feature_pair(const FeaturePointSet& f, const FeaturePointSet& f_d) {
  if (f_d.empty()) throw DimensionError("desired feature set is empty");
  if (f.size() != f_d.size())
    throw DimensionError("feature sets disagree on m: " + std::to_string(f.size()) +
                         " vs " + std::to_string(f_d.size()));
}

std::vector<double> build_state_p(const GripperPose& gripper, const Vec3& lin_vel,
                                  const FeaturePointSet& f, const FeaturePointSet& f_d) {
  check_feature_pair(f, f_d);
  std::vector<double> s;
  s.reserve(6 + 6 * f.size());
  append_vec3(s, gripper.position);
  append_vec3(s, lin_vel);
  append_points(s, f);
  append_points(s, f_d);
  return s;
}

std::vector<double> build_state_o(const Vec3& theta, const Vec3& zeta,
                                  const FeaturePointSet& f_d) {
  if (f_d.empty()) throw DimensionError("desired feature set is empty");
  std::vector<double> s;
  s.reserve(6 + 3 * f_d.size());
  append_vec3(s, theta);
  append_vec3(s, zeta);
  append_points(s, f_d);
  return s;
}

std::vector<double> build_state_ac6(const GripperPose& gripper, const Vec3& lin_vel,
                                    const Vec3& zeta, const FeaturePointSet& f,
                                    const FeaturePointSet& f_d) {
  check_feature_pair(f, f_d);
  std::vector<double> s;
  s.reserve(12 + 6 * f.size());
  append_vec3(s, gripper.position);
  append_vec3(s, lin_vel);
  append_vec3(s, gripper.euler);
  append_vec3(s, zeta);
  append_points(s, f);
  append_points(s, f_d);
  return s;
}

GripperPose integrate_action(const GripperPose& pose, std::span<const double> action,
                             ActionKind kind, const EpisodeConfig& cfg,
                             double control_dt) {
  if (action.size() != 3)
    throw DimensionError("integrate_action expects 3 action components, got " +
                         std::to_string(action.size()));
  Vec3 a{std::clamp(action[0], -1.0, 1.0), std::clamp(action[1], -1.0, 1.0),
         std::clamp(action[2], -1.0, 1.0)};
  GripperPose next = pose;
  if (kind == ActionKind::Translation) {
    next.position = cfg.workspace.clamp(pose.position + (cfg.max_lin_vel * control_dt) * a);
  } else {
    next.euler = wrap_euler(pose.euler + (cfg.max_ang_vel * control_dt) * a);
  }
  return next;
}

std::vector<double> policy_act(const Policy& pol, std::span<const double> state,
                               bool explore) {
  if (pol.actor == nullptr) throw UsageError("policy has no actor network");
  std::vector<double> a = forward(*pol.actor, state);
  if (explore && pol.noise != nullptr) {
    const std::vector<double>& n = pol.noise->sample();
    if (n.size() != a.size())
      throw DimensionError("noise dimension does not match the action dimension");
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = std::clamp(a[i] + n[i], -1.0, 1.0);
  }
  return a;
}

PhaseOutcome run_orientation_phase(const Policy& pol, const DeformationGoal& goal,
                                   Vec3& theta, const EpisodeConfig& cfg,
                                   double control_dt, bool explore,
                                   std::vector<Transition>* transitions,
                                   EpisodeTrace* trace) {
  cfg.validate();
  const Vec3 zeta = wrap_euler(goal.zeta);
  theta = wrap_euler(theta);

  PhaseOutcome out;
  out.success = success_orientation(theta, zeta, cfg.delta_o);
  int step_count = 0;
  while (!out.success && step_count < cfg.max_steps_o) {
    std::vector<double> s = build_state_o(theta, zeta, goal.f_d);
    std::vector<double> a = policy_act(pol, s, explore);
    if (a.size() != 3)
      throw DimensionError("orientation actor must output 3 components");
    GripperPose pose{cfg.home.position, theta};
    pose = integrate_action(pose, a, ActionKind::Rotation, cfg, control_dt);
    theta = pose.euler;
    const double r = reward_orientation(theta, zeta);
    out.success = success_orientation(theta, zeta, cfg.delta_o);
    ++step_count;
    if (transitions != nullptr)
      transitions->push_back({std::move(s), a, build_state_o(theta, zeta, goal.f_d), r,
                              out.success});
    if (trace != nullptr)
      trace->steps.push_back({Phase::Orientation, step_count, pose, std::move(a), r, {}, {}});
  }
  out.steps_used = step_count;
  out.final_error = -reward_orientation(theta, zeta);
  return out;
}

static double reward_by_kind(RewardKind kind, const FeaturePointSet& f,
                             const FeaturePointSet& f_d) {
  switch (kind) {
    case RewardKind::Max: return reward_max_error(f, f_d);
    case RewardKind::Mean: return reward_mean_error(f, f_d);
    case RewardKind::Dtw: return reward_dtw(f, f_d);
  }
  throw UsageError("unknown reward kind");
}

namespace {

// Shared control loop for every simulator-coupled episode flavour; the hooks
// pick the state layout and how an action moves the gripper.
struct LoopHooks {
  std::size_t action_dim = 3;
  std::function<std::vector<double>(const GripperPose&, const Vec3&,
                                    const FeaturePointSet&)>
      make_state;
  std::function<GripperPose(const GripperPose&, std::span<const double>)> apply;
};

PhaseOutcome sim_loop(const Policy& pol, const DeformationGoal& goal, DloState& state,
                      const DloParams& dlo, const SimConfig& sim,
                      const EpisodeConfig& cfg, bool explore, RewardKind kind,
                      std::vector<Transition>* transitions, EpisodeTrace* trace,
                      const LoopHooks& hooks) {
  cfg.validate();
  const int m = static_cast<int>(goal.f_d.size());
  if (m == 0) throw DimensionError("desired feature set is empty");

  FeaturePointSet f = feature_points(state, m);
  PhaseOutcome out;
  out.success = success_position(f, goal.f_d, cfg.delta_p);
  Vec3 lin_vel{0.0, 0.0, 0.0};
  int step_count = 0;
  while (!out.success && step_count < cfg.max_steps_p) {
    std::vector<double> s = hooks.make_state(state.gripper, lin_vel, f);
    std::vector<double> a = policy_act(pol, s, explore);
    if (a.size() != hooks.action_dim)
      throw DimensionError("actor output size does not match the episode variant");
    const GripperPose target = hooks.apply(state.gripper, a);
    lin_vel = (1.0 / sim.control_dt) * (target.position - state.gripper.position);
    try {
      step(state, dlo, sim, target);
    } catch (const SimDivergenceError& e) {
      out.diverged = true;
      out.diagnostic = e.what();
      break;
    }
    f = feature_points(state, m);
    const double r = reward_by_kind(kind, f, goal.f_d);
    out.success = success_position(f, goal.f_d, cfg.delta_p);
    ++step_count;
    if (transitions != nullptr)
      transitions->push_back({std::move(s), a, hooks.make_state(state.gripper, lin_vel, f),
                              r, out.success});
    if (trace != nullptr)
      trace->steps.push_back({Phase::Position, step_count, state.gripper, std::move(a), r,
                              f, state.positions});
  }
  out.steps_used = step_count;
  out.final_error = -reward_max_error(f, goal.f_d);  // f is the last intact snapshot
  if (trace != nullptr && out.diverged) {
    trace->result.diverged = true;
    trace->result.diagnostic = out.diagnostic;
  }
  return out;
}

LoopHooks position_hooks(const DeformationGoal& goal, const EpisodeConfig& cfg,
                         const SimConfig& sim) {
  LoopHooks h;
  h.action_dim = 3;
  h.make_state = [&goal](const GripperPose& g, const Vec3& v, const FeaturePointSet& f) {
    return build_state_p(g, v, f, goal.f_d);
  };
  h.apply = [&cfg, &sim](const GripperPose& pose, std::span<const double> a) {
    return integrate_action(pose, a, ActionKind::Translation, cfg, sim.control_dt);
  };
  return h;
}

}  // namespace

PhaseOutcome run_position_phase(const Policy& pol, const DeformationGoal& goal,
                                DloState& state, const DloParams& dlo,
                                const SimConfig& sim, const EpisodeConfig& cfg,
                                bool explore, RewardKind kind,
                                std::vector<Transition>* transitions,
                                EpisodeTrace* trace) {
  return sim_loop(pol, goal, state, dlo, sim, cfg, explore, kind, transitions, trace,
                  position_hooks(goal, cfg, sim));
}

void apply_orientation(DloState& state, const DloParams& dlo, const SimConfig& sim,
                       const EpisodeConfig& cfg, const Vec3& zeta) {
  const Vec3 start = state.gripper.euler;
  const Vec3 target = wrap_euler(zeta);
  Vec3 delta;
  double max_delta = 0.0;
  for (int i = 0; i < 3; ++i) {
    delta[i] = wrap_angle(target[i] - start[i]);
    max_delta = std::max(max_delta, std::abs(delta[i]));
  }
  const double max_step = cfg.max_ang_vel * sim.control_dt;
  const int n_steps = static_cast<int>(std::ceil(max_delta / max_step));
  for (int k = 1; k <= n_steps; ++k) {
    const double alpha = static_cast<double>(k) / n_steps;
    GripperPose cmd{state.gripper.position,
                    wrap_euler(start + alpha * delta)};
    step(state, dlo, sim, cmd);
  }
  // exact landing regardless of the interpolation rounding
  if (n_steps > 0) state.gripper.euler = target;
  settle(state, dlo, sim, 6.0);
}

EpisodeResult run_episode_multiac6(const Policy& pol_o, const Policy& pol_p,
                                   const DeformationGoal& goal, const DloParams& dlo,
                                   const SimConfig& sim, const EpisodeConfig& cfg,
                                   bool explore, RewardKind kind,
                                   std::vector<Transition>* trans_o,
                                   std::vector<Transition>* trans_p,
                                   EpisodeTrace* trace) {
  EpisodeResult res;
  Vec3 theta = cfg.home.euler;
  res.orientation = run_orientation_phase(pol_o, goal, theta, cfg, sim.control_dt,
                                          explore, trans_o, trace);
  DloState state = reset(dlo, sim, cfg.home);
  const int m = static_cast<int>(goal.f_d.size());
  const FeaturePointSet f_before = feature_points(state, m);
  try {
    apply_orientation(state, dlo, sim, cfg, theta);
  } catch (const SimDivergenceError& e) {
    res.diverged = true;
    res.diagnostic = e.what();
    res.position.final_error = -reward_max_error(f_before, goal.f_d);
    if (trace != nullptr) trace->result = res;
    return res;
  }
  res.position = run_position_phase(pol_p, goal, state, dlo, sim, cfg, explore, kind,
                                    trans_p, trace);
  res.diverged = res.position.diverged;
  res.diagnostic = res.position.diagnostic;
  if (trace != nullptr) trace->result = res;
  return res;
}

EpisodeResult run_episode_multiac6_star(const Policy& pol_p, const DeformationGoal& goal,
                                        const DloParams& dlo, const SimConfig& sim,
                                        const EpisodeConfig& cfg, bool explore,
                                        RewardKind kind,
                                        std::vector<Transition>* trans_p,
                                        EpisodeTrace* trace) {
  EpisodeResult res;
  res.orientation.success = true;  // the dataset orientation is applied directly
  DloState state = reset(dlo, sim, cfg.home);
  const int m = static_cast<int>(goal.f_d.size());
  const FeaturePointSet f_before = feature_points(state, m);
  try {
    apply_orientation(state, dlo, sim, cfg, goal.zeta);
  } catch (const SimDivergenceError& e) {
    res.diverged = true;
    res.diagnostic = e.what();
    res.position.final_error = -reward_max_error(f_before, goal.f_d);
    if (trace != nullptr) trace->result = res;
    return res;
  }
  res.position = run_position_phase(pol_p, goal, state, dlo, sim, cfg, explore, kind,
                                    trans_p, trace);
  res.diverged = res.position.diverged;
  res.diagnostic = res.position.diagnostic;
  if (trace != nullptr) trace->result = res;
  return res;
}

EpisodeResult run_episode_single_agent(const Policy& pol, const DeformationGoal& goal,
                                       SingleAgentVariant variant, const DloParams& dlo,
                                       const SimConfig& sim, const EpisodeConfig& cfg,
                                       bool explore, RewardKind kind,
                                       std::vector<Transition>* transitions,
                                       EpisodeTrace* trace) {
  EpisodeResult res;
  DloState state = reset(dlo, sim, cfg.home);
  if (variant == SingleAgentVariant::Ac3) {
    res.position = sim_loop(pol, goal, state, dlo, sim, cfg, explore, kind, transitions,
                            trace, position_hooks(goal, cfg, sim));
  } else {
    LoopHooks h;
    h.action_dim = 6;
    h.make_state = [&goal](const GripperPose& g, const Vec3& v, const FeaturePointSet& f) {
      return build_state_ac6(g, v, wrap_euler(goal.zeta), f, goal.f_d);
    };
    h.apply = [&cfg, &sim](const GripperPose& pose, std::span<const double> a) {
      GripperPose next = integrate_action(pose, a.first(3), ActionKind::Translation, cfg,
                                          sim.control_dt);
      return integrate_action(next, a.subspan(3), ActionKind::Rotation, cfg,
                              sim.control_dt);
    };
    res.position = sim_loop(pol, goal, state, dlo, sim, cfg, explore, kind, transitions,
                            trace, h);
  }
  res.diverged = res.position.diverged;
  res.diagnostic = res.position.diagnostic;
  if (trace != nullptr) trace->result = res;
  return res;
}

static void append_g17(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::string trace_csv(const EpisodeTrace& trace) {
  std::size_t m = 0, particles = 0;
  for (const StepRecord& rec : trace.steps) {
    m = std::max(m, rec.f.size());
    particles = std::max(particles, rec.particles.size());
  }
  std::string out = "phase,step,x,y,z,roll,pitch,yaw,a0,a1,a2,a3,a4,a5,reward";
  for (std::size_t i = 0; i < m; ++i)
    for (const char* axis : {"x", "y", "z"})
      out += ",f" + std::to_string(i) + axis;
  for (std::size_t i = 0; i < particles; ++i)
    for (const char* axis : {"x", "y", "z"})
      out += ",p" + std::to_string(i) + axis;
  out += "\n";
  for (const StepRecord& rec : trace.steps) {
    out += rec.phase == Phase::Orientation ? "orientation" : "position";
    out += "," + std::to_string(rec.step);
    for (int i = 0; i < 3; ++i) {
      out += ",";
      append_g17(out, rec.pose.position[i]);
    }
    for (int i = 0; i < 3; ++i) {
      out += ",";
      append_g17(out, rec.pose.euler[i]);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      out += ",";
      if (i < rec.action.size()) append_g17(out, rec.action[i]);
    }
    out += ",";
    append_g17(out, rec.reward);
    for (std::size_t i = 0; i < m; ++i)
      for (int k = 0; k < 3; ++k) {
        out += ",";
        if (i < rec.f.size()) append_g17(out, rec.f[i][k]);
      }
    for (std::size_t i = 0; i < particles; ++i)
      for (int k = 0; k < 3; ++k) {
        out += ",";
        if (i < rec.particles.size()) append_g17(out, rec.particles[i][k]);
      }
    out += "\n";
  }
  return out;
}

static nlohmann::json outcome_json(const PhaseOutcome& out) {
  return {{"success", out.success},
          {"final_error", out.final_error},
          {"steps_used", out.steps_used}};
}

std::string trace_json(const EpisodeTrace& trace) {
  nlohmann::json j;
  j["version"] = 1;
  j["result"] = {{"orientation", outcome_json(trace.result.orientation)},
                 {"position", outcome_json(trace.result.position)},
                 {"diverged", trace.result.diverged},
                 {"diagnostic", trace.result.diagnostic}};
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRecord& rec : trace.steps) {
    nlohmann::json s;
    s["phase"] = rec.phase == Phase::Orientation ? "orientation" : "position";
    s["step"] = rec.step;
    s["pose"] = {{"position", rec.pose.position}, {"euler", rec.pose.euler}};
    s["action"] = rec.action;
    s["reward"] = rec.reward;
    s["f"] = rec.f;
    s["particles"] = rec.particles;
    steps.push_back(std::move(s));
  }
  j["steps"] = std::move(steps);
  return j.dump(1);
}

}  // namespace dlo
