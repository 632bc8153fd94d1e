#pragma once

#include <span>
#include <string>
#include <vector>

#include "dlo/ddpg.hpp"
#include "dlo/dlo_sim.hpp"
#include "dlo/geometry.hpp"
#include "dlo/rewards.hpp"

namespace dlo {

struct DeformationGoal {
  FeaturePointSet f_d;  // desired feature points, base to tip
  Vec3 zeta{0.0, 0.0, 0.0};  // desired tip orientation, wrapped
};

enum class RewardKind { Max, Mean, Dtw };
RewardKind parse_reward_kind(const std::string& name);  // "max" | "mean" | "dtw"
std::string reward_kind_name(RewardKind kind);

struct EpisodeConfig {
  int max_steps_p = 300;
  int max_steps_o = 100;
  double delta_p = 0.05;    // meters
  double delta_o = 0.0524;  // radians (3 degrees)
  double max_lin_vel = 0.10;  // m/s
  double max_ang_vel = 0.5;   // rad/s
  Box3 workspace{{-0.30, -0.40, 0.40}, {0.30, 0.40, 0.90}};
  GripperPose home{{0.0, 0.0, 0.80}, {0.0, 0.0, 0.0}};

  void validate() const;  // throws ConfigError
};

// Flat state layouts. m is taken from the feature sets.
//   position agent:  [X(3), Xdot(3), F(3m), F_d(3m)]          -> 6 + 6m
//   orientation agent:[theta(3), zeta(3), F_d(3m)]             -> 6 + 3m
//   six-dof baseline: [X(3), Xdot(3), theta(3), zeta(3), F(3m), F_d(3m)] -> 12 + 6m
std::vector<double> build_state_p(const GripperPose& gripper, const Vec3& lin_vel,
                                  const FeaturePointSet& f, const FeaturePointSet& f_d);
std::vector<double> build_state_o(const Vec3& theta, const Vec3& zeta,
                                  const FeaturePointSet& f_d);
std::vector<double> build_state_ac6(const GripperPose& gripper, const Vec3& lin_vel,
                                    const Vec3& zeta, const FeaturePointSet& f,
                                    const FeaturePointSet& f_d);

enum class ActionKind { Translation, Rotation };

// Scales the action by the velocity cap, advances the pose over control_dt,
// clamps translations to the workspace, wraps rotations. Action components
// outside [-1,1] are clamped first.
GripperPose integrate_action(const GripperPose& pose, std::span<const double> action,
                             ActionKind kind, const EpisodeConfig& cfg,
                             double control_dt);

// Actor snapshot plus optional exploration noise; noise == nullptr or
// explore == false gives the deterministic policy.
struct Policy {
  const MlpNetwork* actor = nullptr;
  OuNoiseProcess* noise = nullptr;
};

std::vector<double> policy_act(const Policy& pol, std::span<const double> state,
                               bool explore);

struct PhaseOutcome {
  bool success = false;
  double final_error = 0.0;  // radians (orientation) or meters (position)
  int steps_used = 0;
  bool diverged = false;     // simulator blow-up cut the phase short
  std::string diagnostic;
};

struct EpisodeResult {
  PhaseOutcome orientation;
  PhaseOutcome position;
  bool diverged = false;
  std::string diagnostic;
};

enum class Phase { Orientation, Position };

struct StepRecord {
  Phase phase = Phase::Orientation;
  int step = 0;  // 1-based within its phase
  GripperPose pose;
  std::vector<double> action;
  double reward = 0.0;
  FeaturePointSet f;           // empty during the orientation phase
  std::vector<Vec3> particles;  // full chain, empty during the orientation phase
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  EpisodeResult result;
};

// Kinematic orientation loop (no simulator): theta is advanced in place.
// transitions / trace may be null.
PhaseOutcome run_orientation_phase(const Policy& pol, const DeformationGoal& goal,
                                   Vec3& theta, const EpisodeConfig& cfg,
                                   double control_dt, bool explore,
                                   std::vector<Transition>* transitions,
                                   EpisodeTrace* trace);

// Translation loop on the simulator; orientation is held at the state's last
// commanded value. Simulator divergence fails the episode (flagged in trace
// and outcome) instead of propagating.
PhaseOutcome run_position_phase(const Policy& pol, const DeformationGoal& goal,
                                DloState& state, const DloParams& dlo,
                                const SimConfig& sim, const EpisodeConfig& cfg,
                                bool explore, RewardKind kind,
                                std::vector<Transition>* transitions,
                                EpisodeTrace* trace);

// Rotates the held gripper from its current orientation to zeta at the
// angular-velocity cap, then settles to quiescence. Realizes the hand-applied
// tip orientation of the star mode and the phase hand-off.
void apply_orientation(DloState& state, const DloParams& dlo, const SimConfig& sim,
                       const EpisodeConfig& cfg, const Vec3& zeta);

// Orientation phase, physical reorientation, then position phase.
EpisodeResult run_episode_multiac6(const Policy& pol_o, const Policy& pol_p,
                                   const DeformationGoal& goal, const DloParams& dlo,
                                   const SimConfig& sim, const EpisodeConfig& cfg,
                                   bool explore, RewardKind kind,
                                   std::vector<Transition>* trans_o,
                                   std::vector<Transition>* trans_p,
                                   EpisodeTrace* trace);

// Star mode: the dataset zeta is applied directly, no orientation agent.
EpisodeResult run_episode_multiac6_star(const Policy& pol_p, const DeformationGoal& goal,
                                        const DloParams& dlo, const SimConfig& sim,
                                        const EpisodeConfig& cfg, bool explore,
                                        RewardKind kind,
                                        std::vector<Transition>* trans_p,
                                        EpisodeTrace* trace);

enum class SingleAgentVariant { Ac3, Ac6 };

// AC3: 3-output actor, translation only, 6+6m state. AC6: 6-output actor,
// translation and rotation together, 12+6m state. Same reward and
// termination as the position phase.
EpisodeResult run_episode_single_agent(const Policy& pol, const DeformationGoal& goal,
                                       SingleAgentVariant variant, const DloParams& dlo,
                                       const SimConfig& sim, const EpisodeConfig& cfg,
                                       bool explore, RewardKind kind,
                                       std::vector<Transition>* transitions,
                                       EpisodeTrace* trace);

// phase,step,pose(6),action(6 cols, unused blank),reward,f(3m cols, blank in
// the orientation phase),particles(3P cols, blank in the orientation phase)
std::string trace_csv(const EpisodeTrace& trace);
std::string trace_json(const EpisodeTrace& trace);

}  // namespace dlo
