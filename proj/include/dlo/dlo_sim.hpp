#pragma once

#include <string>
#include <vector>

#include "dlo/geometry.hpp"
#include "dlo/rewards.hpp"

namespace dlo {

// Mass-spring chain: particle 0 pinned to ground_anchor, the last particle is
// the gripper grasp point and the one before it is held on the gripper axis at
// rest-segment distance (rigid tip). Interior particles carry stretch springs
// with axial dashpots, discrete-Laplacian bending resistance, gravity, and an
// ambient drag that brings the chain to rest between commands.
struct DloParams {
  int num_particles = 16;
  double total_length = 1.03;      // meters
  double total_mass = 0.2;         // kilograms, whole chain
  double stretch_stiffness = 500;  // N/m per segment spring
  double bend_stiffness = 0.02;    // N*m, discrete-Laplacian coefficient
  double damping_ratio = 0.01;     // axial dashpot, fraction of critical
  double drag_rate = 4.0;          // 1/s ambient viscous decay
  Vec3 gravity{0.0, 0.0, -9.81};
  Vec3 ground_anchor{0.0, 0.0, 0.0};

  double segment_length() const { return total_length / (num_particles - 1); }
  double particle_mass() const { return total_mass / num_particles; }
  void validate() const;  // throws ConfigError
};

struct SimConfig {
  double control_dt = 0.06;   // seconds per control step
  int physics_substeps = 20;  // integrator substeps per control step
  double settle_time = 8.0;   // reset relaxation duration, seconds

  double substep_dt() const { return control_dt / physics_substeps; }
  void validate() const;  // throws ConfigError
};

// Explicit-integrator stability bound: substep_dt * omega_max <= 1, with
// omega_max^2 = (stretch_stiffness + 16 * bend_stiffness / seg^2) / m_p.
// Throws ConfigError when violated; called by reset and step.
void check_stability(const DloParams& params, const SimConfig& config);

struct DloState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  double time = 0.0;
  GripperPose gripper;  // last commanded pose, Euler angles wrapped
};

// Places the chain on the straight anchor->grasp line, then relaxes it under
// gravity for settle_time with the gripper held. Unreachable pose (distance
// beyond total_length) -> ConfigError.
DloState reset(const DloParams& params, const SimConfig& config,
               const GripperPose& initial_gripper);

// Advances one control step; the command is interpolated linearly across the
// substeps (orientation along the shortest arc). Throws SimDivergenceError
// with the offending substep if any coordinate leaves [-1e3, 1e3] or turns
// non-finite.
void step(DloState& state, const DloParams& params, const SimConfig& config,
          const GripperPose& command);

// Holds the gripper for the given duration. Returns the maximum particle
// displacement observed during the final `window` seconds (a quiescence
// residual); stops early once every particle has been slower than speed_tol
// for a full window.
double settle(DloState& state, const DloParams& params, const SimConfig& config,
              double duration, double speed_tol = 1e-3, double window = 0.5);

// Evenly spaced particle indices from just above the anchor to the tip:
// round(k*(P-1)/m) for k=1..m; m = num_particles degenerates to all indices.
std::vector<int> feature_indices(int num_particles, int m);

FeaturePointSet feature_points(const DloState& state, int m);

// Orientation of the gripper-held tip segment = last commanded Euler angles.
Vec3 tip_orientation(const DloState& state);

// chord(anchor, tip) / arc length along the chain, in [0, 1]; 1 = straight.
double straightness_measure(const DloState& state);

double kinetic_energy(const DloState& state, const DloParams& params);

// Fastest particle, used for quiescence checks.
double max_speed(const DloState& state);

// time, gripper pose (6), then x,y,z per particle.
std::string trajectory_csv_header(int num_particles);
void append_trajectory_row(std::string& out, const DloState& state);

}  // namespace dlo
