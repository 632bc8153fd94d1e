#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "dlo/episode.hpp"
#include "dlo/errors.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace dlo;

namespace {

MlpNetwork zero_net(const std::vector<int>& sizes) {
  MlpNetwork net = mlp_init(sizes, Activation::Tanh, 0);
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
  return net;
}

FeaturePointSet far_goal_points() {
  return {{0.2, 0.3, 0.5}, {0.2, 0.3, 0.6}, {0.2, 0.3, 0.7}, {0.2, 0.3, 0.8}};
}

int count_commas(const std::string& line) {
  return static_cast<int>(std::count(line.begin(), line.end(), ','));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

TEST_CASE("reward kind names parse and render") {
  CHECK(parse_reward_kind("max") == RewardKind::Max);
  CHECK(parse_reward_kind("mean") == RewardKind::Mean);
  CHECK(parse_reward_kind("dtw") == RewardKind::Dtw);
  CHECK(reward_kind_name(RewardKind::Dtw) == "dtw");
  CHECK(reward_kind_name(parse_reward_kind("mean")) == "mean");
  CHECK_THROWS_AS(parse_reward_kind("huber"), UsageError&);
}

TEST_CASE("episode config validation") {
  EpisodeConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  EpisodeConfig bad = cfg;
  bad.home.position = {0.0, 0.0, 1.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError&);

  bad = cfg;
  bad.max_lin_vel = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError&);

  bad = cfg;
  bad.max_steps_o = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError&);

  bad = cfg;
  bad.workspace.lo[1] = bad.workspace.hi[1];
  CHECK_THROWS_AS(bad.validate(), ConfigError&);
}

TEST_CASE("state vectors have the documented layout") {
  GripperPose g{{1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}};
  Vec3 v{4.0, 5.0, 6.0};
  FeaturePointSet f = {{10, 11, 12}, {13, 14, 15}, {16, 17, 18}, {19, 20, 21}};
  FeaturePointSet fd = {{30, 31, 32}, {33, 34, 35}, {36, 37, 38}, {39, 40, 41}};

  std::vector<double> sp = build_state_p(g, v, f, fd);
  REQUIRE(sp.size() == 30);
  CHECK(sp[0] == 1.0);
  CHECK(sp[3] == 4.0);
  CHECK(sp[5] == 6.0);
  CHECK(sp[6] == 10.0);
  CHECK(sp[17] == 21.0);
  CHECK(sp[18] == 30.0);
  CHECK(sp[29] == 41.0);

  std::vector<double> so = build_state_o(g.euler, v, fd);
  REQUIRE(so.size() == 18);
  CHECK(so[0] == 0.1);
  CHECK(so[2] == 0.3);
  CHECK(so[3] == 4.0);
  CHECK(so[5] == 6.0);
  CHECK(so[6] == 30.0);
  CHECK(so[17] == 41.0);

  std::vector<double> s6 = build_state_ac6(g, v, {7.0, 8.0, 9.0}, f, fd);
  REQUIRE(s6.size() == 36);
  CHECK(s6[0] == 1.0);
  CHECK(s6[3] == 4.0);
  CHECK(s6[6] == 0.1);
  CHECK(s6[9] == 7.0);
  CHECK(s6[11] == 9.0);
  CHECK(s6[12] == 10.0);
  CHECK(s6[23] == 21.0);
  CHECK(s6[24] == 30.0);
  CHECK(s6[35] == 41.0);

  FeaturePointSet three(f.begin(), f.begin() + 3);
  CHECK_THROWS_AS(build_state_p(g, v, three, fd), DimensionError&);
  CHECK_THROWS_AS(build_state_p(g, v, {}, {}), DimensionError&);
  CHECK_THROWS_AS(build_state_o(g.euler, v, {}), DimensionError&);
  CHECK_THROWS_AS(build_state_ac6(g, v, v, three, fd), DimensionError&);
}

TEST_CASE("integrate_action moves, clamps, and wraps") {
  EpisodeConfig cfg;
  std::vector<double> zero{0.0, 0.0, 0.0};
  GripperPose same = integrate_action(cfg.home, zero, ActionKind::Translation, cfg, 0.06);
  CHECK(same.position == cfg.home.position);
  CHECK(same.euler == cfg.home.euler);
  same = integrate_action(cfg.home, zero, ActionKind::Rotation, cfg, 0.06);
  CHECK(same.position == cfg.home.position);
  CHECK(same.euler == cfg.home.euler);

  // full +x push for one 0.06 s step at 0.10 m/s: exactly 6 mm
  std::vector<double> push{1.0, 0.0, 0.0};
  GripperPose next = integrate_action(cfg.home, push, ActionKind::Translation, cfg, 0.06);
  CHECK(next.position[0] == 0.10 * 0.06);
  CHECK(next.position[1] == 0.0);
  CHECK(next.position[2] == 0.80);
  CHECK(next.euler == cfg.home.euler);

  // workspace face stops the gripper
  GripperPose edge{{0.299, 0.0, 0.80}, {0.0, 0.0, 0.0}};
  next = integrate_action(edge, push, ActionKind::Translation, cfg, 0.06);
  CHECK(next.position[0] == 0.30);

  // overdriven actions are clamped to the unit cube first
  std::vector<double> wild{5.0, 0.0, 0.0};
  GripperPose a = integrate_action(cfg.home, wild, ActionKind::Translation, cfg, 0.06);
  GripperPose b = integrate_action(cfg.home, push, ActionKind::Translation, cfg, 0.06);
  CHECK(a.position == b.position);

  // rotation wraps across the seam
  constexpr double pi = 3.14159265358979323846;
  GripperPose near_seam{{0.0, 0.0, 0.80}, {0.0, 0.0, pi - 0.01}};
  std::vector<double> spin{0.0, 0.0, 1.0};
  next = integrate_action(near_seam, spin, ActionKind::Rotation, cfg, 0.06);
  CHECK(next.euler[2] == doctest::Approx(-pi + 0.02).epsilon(1e-12));
  CHECK(next.position == near_seam.position);

  std::vector<double> two{1.0, 0.0};
  CHECK_THROWS_AS(integrate_action(cfg.home, two, ActionKind::Translation, cfg, 0.06),
                  DimensionError&);
}

TEST_CASE("policy_act is the clamped actor with optional noise") {
  MlpNetwork actor = zero_net({4, 3});
  actor.biases[0] = {0.5, -0.25, 2.0};
  Policy pol{&actor, nullptr};
  std::vector<double> s{0.1, 0.2, 0.3, 0.4};

  std::vector<double> a = policy_act(pol, s, false);
  std::vector<double> direct = forward(actor, s);
  CHECK(a == direct);
  // explore without a noise source stays deterministic
  CHECK(policy_act(pol, s, true) == direct);

  OuNoiseProcess noise(3, 0.15, 3.0, 1.0, 9);
  Policy noisy{&actor, &noise};
  for (int k = 0; k < 50; ++k) {
    std::vector<double> na = policy_act(noisy, s, true);
    REQUIRE(na.size() == 3);
    for (double x : na) {
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
    }
  }

  Policy empty;
  CHECK_THROWS_AS(policy_act(empty, s, false), UsageError&);
}

TEST_CASE("orientation phase succeeds immediately when theta starts at zeta") {
  MlpNetwork actor = zero_net({18, 3});
  Policy pol{&actor, nullptr};
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.2, -0.4, 1.1};
  Vec3 theta{0.2, -0.4, 1.1};
  EpisodeConfig cfg;
  std::vector<Transition> ts;
  EpisodeTrace trace;

  PhaseOutcome out = run_orientation_phase(pol, goal, theta, cfg, 0.06, false, &ts, &trace);
  CHECK(out.success);
  CHECK(out.steps_used == 0);
  CHECK(out.final_error == 0.0);
  CHECK(ts.empty());
  CHECK(trace.steps.empty());
  CHECK(theta == Vec3{0.2, -0.4, 1.1});
}

TEST_CASE("orientation phase converges in a hand-counted number of steps") {
  // constant roll rate tanh(1) * 0.5 rad/s * 0.06 s per step toward 0.3 rad;
  // RMSE dips under 0.0524 rad at exactly step 10
  MlpNetwork actor = zero_net({18, 3});
  actor.biases[0][0] = 1.0;
  Policy pol{&actor, nullptr};
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.3, 0.0, 0.0};
  Vec3 theta{0.0, 0.0, 0.0};
  EpisodeConfig cfg;
  std::vector<Transition> ts;
  EpisodeTrace trace;

  PhaseOutcome out = run_orientation_phase(pol, goal, theta, cfg, 0.06, false, &ts, &trace);
  CHECK(out.success);
  CHECK(out.steps_used == 10);
  const double per_step = std::tanh(1.0) * 0.5 * 0.06;
  CHECK(theta[0] == doctest::Approx(10.0 * per_step).epsilon(1e-12));
  CHECK(out.final_error ==
        doctest::Approx(std::abs(0.3 - 10.0 * per_step) / std::sqrt(3.0)).epsilon(1e-12));

  REQUIRE(ts.size() == 10);
  CHECK(ts.front().state.size() == 18);
  CHECK(ts.front().action.size() == 3);
  CHECK_FALSE(ts.front().terminal);
  CHECK(ts.back().terminal);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) CHECK(ts[k].next_state == ts[k + 1].state);
  for (const Transition& t : ts) CHECK(t.reward < 0.0);

  REQUIRE(trace.steps.size() == 10);
  CHECK(trace.steps.front().phase == Phase::Orientation);
  CHECK(trace.steps.front().step == 1);
  CHECK(trace.steps.back().step == 10);
  CHECK(trace.steps.front().f.empty());
}

TEST_CASE("orientation phase stops at the step cap") {
  MlpNetwork actor = zero_net({18, 3});
  Policy pol{&actor, nullptr};
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.0, 0.0, 0.0};
  Vec3 theta{0.8, 0.0, 0.0};
  EpisodeConfig cfg;
  std::vector<Transition> ts;

  PhaseOutcome out = run_orientation_phase(pol, goal, theta, cfg, 0.06, false, &ts, nullptr);
  CHECK_FALSE(out.success);
  CHECK(out.steps_used == 100);
  CHECK(theta[0] == 0.8);
  CHECK(out.final_error == doctest::Approx(0.8 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(ts.size() == 100);
  for (const Transition& t : ts) CHECK_FALSE(t.terminal);
}

TEST_CASE("orientation phase is deterministic without exploration") {
  MlpNetwork actor = mlp_init({18, 64, 3}, Activation::Tanh, 21);
  Policy pol{&actor, nullptr};
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.4, -0.2, 0.9};

  std::vector<Transition> a, b;
  Vec3 ta{0.0, 0.0, 0.0}, tb{0.0, 0.0, 0.0};
  EpisodeConfig cfg;
  run_orientation_phase(pol, goal, ta, cfg, 0.06, false, &a, nullptr);
  run_orientation_phase(pol, goal, tb, cfg, 0.06, false, &b, nullptr);
  CHECK(ta == tb);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].action == b[k].action);
    CHECK(a[k].reward == b[k].reward);
  }
}

TEST_CASE("position phase succeeds at step zero when the goal is already met") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  DloState state = reset(dlo, sim, cfg.home);
  DeformationGoal goal;
  goal.f_d = feature_points(state, 4);

  MlpNetwork actor = zero_net({30, 3});
  Policy pol{&actor, nullptr};
  std::vector<Transition> ts;
  PhaseOutcome out = run_position_phase(pol, goal, state, dlo, sim, cfg, false,
                                        RewardKind::Max, &ts, nullptr);
  CHECK(out.success);
  CHECK(out.steps_used == 0);
  CHECK(out.final_error == 0.0);
  CHECK(ts.empty());
}

TEST_CASE("position phase wires the chosen reward into every record") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 4;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  MlpNetwork actor = zero_net({30, 3});
  actor.biases[0] = {0.3, -0.2, 0.4};  // constant drift so the poses change
  Policy pol{&actor, nullptr};

  for (RewardKind kind : {RewardKind::Max, RewardKind::Mean, RewardKind::Dtw}) {
    DloState state = reset(dlo, sim, cfg.home);
    std::vector<Transition> ts;
    EpisodeTrace trace;
    PhaseOutcome out =
        run_position_phase(pol, goal, state, dlo, sim, cfg, false, kind, &ts, &trace);
    CHECK_FALSE(out.success);
    CHECK(out.steps_used == 4);
    REQUIRE(trace.steps.size() == 4);
    REQUIRE(ts.size() == 4);
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
      const StepRecord& rec = trace.steps[k];
      REQUIRE(rec.f.size() == 4);
      REQUIRE(rec.particles.size() == 16);
      double expect = 0.0;
      switch (kind) {
        case RewardKind::Max: expect = reward_max_error(rec.f, goal.f_d); break;
        case RewardKind::Mean: expect = reward_mean_error(rec.f, goal.f_d); break;
        case RewardKind::Dtw: expect = reward_dtw(rec.f, goal.f_d); break;
      }
      CHECK(rec.reward == expect);
      CHECK(ts[k].reward == expect);
    }
    CHECK(ts.front().state.size() == 30);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k)
      CHECK(ts[k].next_state == ts[k + 1].state);
  }
}

TEST_CASE("position phase respects the workspace and the step cap") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 30;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  MlpNetwork actor = zero_net({30, 3});
  actor.biases[0] = {0.0, 0.0, 5.0};  // hard upward push, z face is 0.10 m away
  Policy pol{&actor, nullptr};

  DloState state = reset(dlo, sim, cfg.home);
  EpisodeTrace trace;
  PhaseOutcome out = run_position_phase(pol, goal, state, dlo, sim, cfg, false,
                                        RewardKind::Max, nullptr, &trace);
  CHECK_FALSE(out.success);
  CHECK(out.steps_used == 30);
  for (const StepRecord& rec : trace.steps) {
    CHECK(cfg.workspace.contains(rec.pose.position, 1e-12));
    CHECK(rec.pose.position[2] <= 0.90);
  }
  CHECK(trace.steps.back().pose.position[2] == 0.90);
}

TEST_CASE("position phase flags simulator divergence instead of throwing") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  MlpNetwork actor = zero_net({30, 3});
  Policy pol{&actor, nullptr};

  DloState state = reset(dlo, sim, cfg.home);
  state.velocities[8] = {1e9, 0.0, 0.0};
  EpisodeTrace trace;
  PhaseOutcome out = run_position_phase(pol, goal, state, dlo, sim, cfg, false,
                                        RewardKind::Max, nullptr, &trace);
  CHECK(out.diverged);
  CHECK_FALSE(out.success);
  CHECK(out.steps_used == 0);
  CHECK_FALSE(out.diagnostic.empty());
  CHECK(trace.result.diverged);
  CHECK(std::isfinite(out.final_error));
}

TEST_CASE("proportional feature servo reaches a settled goal") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;

  // goal shape: settle after carrying the gripper 12 cm along +x
  DloState gen = reset(dlo, sim, cfg.home);
  GripperPose cmd = gen.gripper;
  for (int k = 0; k < 20; ++k) {
    cmd.position[0] += 0.006;
    step(gen, dlo, sim, cmd);
  }
  settle(gen, dlo, sim, 6.0);
  DeformationGoal goal;
  goal.f_d = feature_points(gen, 4);

  // single tanh layer encoding a = tanh(g * mean(f_d - f)) per axis
  MlpNetwork pnet = zero_net({30, 3});
  const double gain = 5.0 / 4.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int i = 0; i < 4; ++i) {
      pnet.weights[0].at(axis, 6 + 3 * i + axis) = -gain;
      pnet.weights[0].at(axis, 18 + 3 * i + axis) = gain;
    }
  Policy pol{&pnet, nullptr};

  DloState state = reset(dlo, sim, cfg.home);
  PhaseOutcome out = run_position_phase(pol, goal, state, dlo, sim, cfg, false,
                                        RewardKind::Max, nullptr, nullptr);
  CHECK(out.success);
  CHECK(out.steps_used >= 1);
  CHECK(out.steps_used < cfg.max_steps_p);
  CHECK(out.final_error <= cfg.delta_p);
}

TEST_CASE("apply_orientation lands exactly and leaves the chain quiet") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  DloState state = reset(dlo, sim, cfg.home);
  Vec3 zeta{0.4, -0.3, 1.0};
  apply_orientation(state, dlo, sim, cfg, zeta);
  CHECK(state.gripper.euler == zeta);
  CHECK(tip_orientation(state) == zeta);
  CHECK(max_speed(state) < 1e-3);
  CHECK(state.gripper.position == cfg.home.position);
}

TEST_CASE("multiac6 episode with a satisfied goal ends in zero steps") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  DeformationGoal goal;
  goal.f_d = feature_points(reset(dlo, sim, cfg.home), 4);
  goal.zeta = cfg.home.euler;

  MlpNetwork actor_o = zero_net({18, 3});
  MlpNetwork actor_p = zero_net({30, 3});
  Policy pol_o{&actor_o, nullptr};
  Policy pol_p{&actor_p, nullptr};
  std::vector<Transition> to, tp;
  EpisodeTrace trace;
  EpisodeResult res = run_episode_multiac6(pol_o, pol_p, goal, dlo, sim, cfg, false,
                                           RewardKind::Max, &to, &tp, &trace);
  CHECK(res.orientation.success);
  CHECK(res.orientation.steps_used == 0);
  CHECK(res.position.success);
  CHECK(res.position.steps_used == 0);
  CHECK(res.position.final_error < 1e-3);
  CHECK_FALSE(res.diverged);
  CHECK(to.empty());
  CHECK(tp.empty());
  CHECK(trace.steps.empty());
  CHECK(trace.result.position.success);
}

TEST_CASE("multiac6 episode runs orientation strictly before position") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 5;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.3, 0.0, 0.0};

  MlpNetwork actor_o = zero_net({18, 3});
  actor_o.biases[0][0] = 1.0;  // the 10-step constant-rate rotator
  MlpNetwork actor_p = zero_net({30, 3});
  Policy pol_o{&actor_o, nullptr};
  Policy pol_p{&actor_p, nullptr};
  EpisodeTrace trace;
  EpisodeResult res = run_episode_multiac6(pol_o, pol_p, goal, dlo, sim, cfg, false,
                                           RewardKind::Max, nullptr, nullptr, &trace);
  CHECK(res.orientation.success);
  CHECK(res.orientation.steps_used == 10);
  CHECK_FALSE(res.position.success);
  CHECK(res.position.steps_used == 5);

  REQUIRE(trace.steps.size() == 15);
  for (int k = 0; k < 10; ++k) CHECK(trace.steps[k].phase == Phase::Orientation);
  for (int k = 10; k < 15; ++k) CHECK(trace.steps[k].phase == Phase::Position);
  // the physical hand-off applies the achieved tip orientation bit-exactly
  const Vec3 achieved = trace.steps[9].pose.euler;
  for (int k = 10; k < 15; ++k) CHECK(trace.steps[k].pose.euler == achieved);
}

TEST_CASE("star mode skips the orientation agent and applies zeta directly") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 5;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.5, 0.0, 0.0};

  MlpNetwork actor_p = zero_net({30, 3});
  Policy pol_p{&actor_p, nullptr};
  EpisodeTrace trace;
  EpisodeResult res = run_episode_multiac6_star(pol_p, goal, dlo, sim, cfg, false,
                                                RewardKind::Max, nullptr, &trace);
  CHECK(res.orientation.success);
  CHECK(res.orientation.steps_used == 0);
  CHECK(res.position.steps_used == 5);
  REQUIRE(trace.steps.size() == 5);
  for (const StepRecord& rec : trace.steps) {
    CHECK(rec.phase == Phase::Position);
    CHECK(rec.pose.euler == Vec3{0.5, 0.0, 0.0});
  }
}

TEST_CASE("single-agent variants use their own state and action widths") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 3;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.2, 0.1, -0.4};

  MlpNetwork ac3 = zero_net({30, 3});
  Policy pol3{&ac3, nullptr};
  std::vector<Transition> t3;
  EpisodeResult r3 = run_episode_single_agent(pol3, goal, SingleAgentVariant::Ac3, dlo,
                                              sim, cfg, false, RewardKind::Max, &t3, nullptr);
  CHECK_FALSE(r3.position.success);
  CHECK(r3.position.steps_used == 3);
  REQUIRE(t3.size() == 3);
  CHECK(t3.front().state.size() == 30);
  CHECK(t3.front().action.size() == 3);

  MlpNetwork ac6 = zero_net({36, 6});
  Policy pol6{&ac6, nullptr};
  std::vector<Transition> t6;
  EpisodeTrace trace6;
  EpisodeResult r6 = run_episode_single_agent(pol6, goal, SingleAgentVariant::Ac6, dlo,
                                              sim, cfg, false, RewardKind::Max, &t6, &trace6);
  CHECK(r6.position.steps_used == 3);
  REQUIRE(t6.size() == 3);
  CHECK(t6.front().state.size() == 36);
  CHECK(t6.front().action.size() == 6);
  // zeta occupies slots 9..11 of the six-dof state
  CHECK(t6.front().state[9] == 0.2);
  CHECK(t6.front().state[10] == 0.1);
  CHECK(t6.front().state[11] == -0.4);

  // mismatched actor width is rejected, not silently truncated
  std::vector<Transition> bad;
  CHECK_THROWS_AS(run_episode_single_agent(pol3, goal, SingleAgentVariant::Ac6, dlo, sim,
                                           cfg, false, RewardKind::Max, &bad, nullptr),
                  DimensionError&);
}

TEST_CASE("single-agent episode succeeds immediately on a met goal") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  DeformationGoal goal;
  goal.f_d = feature_points(reset(dlo, sim, cfg.home), 4);

  MlpNetwork ac3 = zero_net({30, 3});
  Policy pol{&ac3, nullptr};
  EpisodeResult res = run_episode_single_agent(pol, goal, SingleAgentVariant::Ac3, dlo,
                                               sim, cfg, false, RewardKind::Max, nullptr,
                                               nullptr);
  CHECK(res.position.success);
  CHECK(res.position.steps_used == 0);
}

TEST_CASE("trace csv carries the documented columns") {
  DloParams dlo;
  SimConfig sim;
  EpisodeConfig cfg;
  cfg.max_steps_p = 5;
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.3, 0.0, 0.0};
  MlpNetwork actor_o = zero_net({18, 3});
  actor_o.biases[0][0] = 1.0;
  MlpNetwork actor_p = zero_net({30, 3});
  Policy pol_o{&actor_o, nullptr};
  Policy pol_p{&actor_p, nullptr};
  EpisodeTrace trace;
  run_episode_multiac6(pol_o, pol_p, goal, dlo, sim, cfg, false, RewardKind::Max, nullptr,
                       nullptr, &trace);

  std::string csv = trace_csv(trace);
  std::vector<std::string> lines = split_lines(csv);
  REQUIRE(lines.size() == 16);  // header + 10 orientation + 5 position
  // 15 fixed columns, then 3*4 feature and 3*16 particle columns
  const int cols = 15 + 12 + 48;
  for (const std::string& line : lines) CHECK(count_commas(line) == cols - 1);
  CHECK(lines[0].substr(0, 11) == "phase,step,");
  CHECK(lines[1].substr(0, 14) == "orientation,1,");
  CHECK(lines[11].substr(0, 11) == "position,1,");

  // %.17g round-trips the stored reward bit-exactly
  std::size_t field = 0, pos = 0;
  for (int comma = 0; comma < 14; ++comma) pos = lines[1].find(',', pos) + 1;
  field = lines[1].find(',', pos);
  const double parsed = std::strtod(lines[1].substr(pos, field - pos).c_str(), nullptr);
  CHECK(parsed == trace.steps[0].reward);

  std::string json_text = trace_json(trace);
  nlohmann::json j = nlohmann::json::parse(json_text);
  CHECK(j["version"] == 1);
  CHECK(j["steps"].size() == 15);
  CHECK(j["steps"][0]["phase"] == "orientation");
  CHECK(j["steps"][14]["phase"] == "position");
  CHECK(j["result"]["orientation"]["steps_used"] == 10);
  CHECK(j["result"]["diverged"] == false);
  CHECK(j["steps"][12]["particles"].size() == 16);
}

TEST_CASE("orientation-only trace csv omits feature and particle columns") {
  MlpNetwork actor = zero_net({18, 3});
  actor.biases[0][0] = 1.0;
  Policy pol{&actor, nullptr};
  DeformationGoal goal;
  goal.f_d = far_goal_points();
  goal.zeta = {0.3, 0.0, 0.0};
  Vec3 theta{0.0, 0.0, 0.0};
  EpisodeConfig cfg;
  EpisodeTrace trace;
  run_orientation_phase(pol, goal, theta, cfg, 0.06, false, nullptr, &trace);

  std::vector<std::string> lines = split_lines(trace_csv(trace));
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "phase,step,x,y,z,roll,pitch,yaw,a0,a1,a2,a3,a4,a5,reward");
  for (const std::string& line : lines) CHECK(count_commas(line) == 14);
}
