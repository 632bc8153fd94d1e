#include "dlo/dlo_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dlo/errors.hpp"

namespace dlo {

void DloParams::validate() const {
  if (num_particles < 4) throw ConfigError("dlo params: need at least 4 particles");
  if (total_length <= 0.0) throw ConfigError("dlo params: total_length must be positive");
  if (total_mass <= 0.0) throw ConfigError("dlo params: total_mass must be positive");
  if (stretch_stiffness <= 0.0)
    throw ConfigError("dlo params: stretch_stiffness must be positive");
  if (bend_stiffness <= 0.0)
    throw ConfigError("dlo params: bend_stiffness must be positive");
  if (damping_ratio < 0.0) throw ConfigError("dlo params: damping_ratio must be >= 0");
  if (drag_rate < 0.0) throw ConfigError("dlo params: drag_rate must be >= 0");
}

void SimConfig::validate() const {
  if (control_dt <= 0.0) throw ConfigError("sim config: control_dt must be positive");
  if (physics_substeps < 1)
    throw ConfigError("sim config: physics_substeps must be positive");
  if (settle_time < 0.0) throw ConfigError("sim config: settle_time must be >= 0");
}

void check_stability(const DloParams& params, const SimConfig& config) {
  params.validate();
  config.validate();
  const double seg = params.segment_length();
  const double omega_sq =
      (params.stretch_stiffness + 16.0 * params.bend_stiffness / (seg * seg)) /
      params.particle_mass();
  const double h = config.substep_dt();
  if (h * std::sqrt(omega_sq) > 1.0)
    throw ConfigError("sim config: substep_dt " + std::to_string(h) +
                      " exceeds the stability bound 1/omega_max = " +
                      std::to_string(1.0 / std::sqrt(omega_sq)) +
                      "; increase physics_substeps");
  if (h * params.drag_rate >= 1.0)
    throw ConfigError("sim config: substep_dt too large for drag_rate");
}

namespace {

void check_finite(const DloState& state, int substep) {
  for (const Vec3& p : state.positions)
    for (double c : p)
      if (!std::isfinite(c) || std::abs(c) > 1e3)
        throw SimDivergenceError("simulation diverged at substep " +
                                     std::to_string(substep),
                                 substep);
}

// Advances `substeps` integrator substeps while moving the gripper linearly
// from `from` to `to` (orientation interpolated on the shortest arc).
void advance(DloState& state, const DloParams& params, const SimConfig& config,
             const GripperPose& from, const GripperPose& to, int substeps) {
  const int n = params.num_particles;
  const double h = config.substep_dt();
  const double seg = params.segment_length();
  const double m_p = params.particle_mass();
  const double kb2 = params.bend_stiffness / (seg * seg);
  const double c_ax =
      params.damping_ratio * 2.0 * std::sqrt(params.stretch_stiffness * m_p);

  Vec3 euler_delta;
  for (int i = 0; i < 3; ++i)
    euler_delta[i] = wrap_angle(to.euler[i] - from.euler[i]);

  std::vector<Vec3> force(n);
  for (int k = 1; k <= substeps; ++k) {
    const double a = static_cast<double>(k) / substeps;
    const Vec3 pose_pos = from.position + a * (to.position - from.position);
    Vec3 pose_euler;
    for (int i = 0; i < 3; ++i)
      pose_euler[i] = wrap_angle(from.euler[i] + a * euler_delta[i]);

    for (int i = 0; i < n; ++i) force[i] = m_p * params.gravity;
    for (int i = 0; i < n; ++i) force[i] -= params.drag_rate * m_p * state.velocities[i];

    // stretch springs + axial dashpots between neighbors
    for (int i = 0; i + 1 < n; ++i) {
      const Vec3 d = state.positions[i + 1] - state.positions[i];
      const double len = norm(d);
      if (len < 1e-12) continue;
      const Vec3 dir = (1.0 / len) * d;
      const double axial_rate =
          dot(state.velocities[i + 1] - state.velocities[i], dir);
      const Vec3 f = (params.stretch_stiffness * (len - seg) + c_ax * axial_rate) * dir;
      force[i] += f;
      force[i + 1] -= f;
    }

    // discrete-Laplacian bending: E = sum kb2/2 |p_{j-1} - 2 p_j + p_{j+1}|^2
    for (int j = 1; j + 1 < n; ++j) {
      const Vec3 lap = state.positions[j - 1] - 2.0 * state.positions[j] +
                       state.positions[j + 1];
      const Vec3 f = kb2 * lap;
      force[j - 1] -= f;
      force[j] += 2.0 * f;
      force[j + 1] -= f;
    }

    // semi-implicit Euler on the free interior particles
    for (int i = 1; i <= n - 3; ++i) {
      state.velocities[i] += (h / m_p) * force[i];
      state.positions[i] += h * state.velocities[i];
    }

    // kinematic boundary: anchor pinned, tip pair follows the commanded pose
    state.positions[0] = params.ground_anchor;
    state.velocities[0] = {0.0, 0.0, 0.0};
    const Vec3 grasp = pose_pos;
    const Vec3 tip2 = grasp - seg * tip_axis(pose_euler);
    state.velocities[n - 1] = (1.0 / h) * (grasp - state.positions[n - 1]);
    state.velocities[n - 2] = (1.0 / h) * (tip2 - state.positions[n - 2]);
    state.positions[n - 1] = grasp;
    state.positions[n - 2] = tip2;

    state.time += h;
    check_finite(state, k - 1);
  }
  state.gripper.position = to.position;
  state.gripper.euler = wrap_euler(to.euler);
}

}  // namespace

DloState reset(const DloParams& params, const SimConfig& config,
               const GripperPose& initial_gripper) {
  check_stability(params, config);
  const Vec3 grasp = initial_gripper.position;
  const double dist = distance(grasp, params.ground_anchor);
  if (dist > params.total_length)
    throw ConfigError("reset: gripper at distance " + std::to_string(dist) +
                      " m exceeds the chain length " +
                      std::to_string(params.total_length) + " m");
  if (dist < 1e-9)
    throw ConfigError("reset: gripper coincides with the ground anchor");

  const int n = params.num_particles;
  DloState state;
  state.positions.resize(n);
  state.velocities.assign(n, Vec3{0.0, 0.0, 0.0});
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / (n - 1);
    state.positions[i] = params.ground_anchor + a * (grasp - params.ground_anchor);
  }
  state.gripper.position = grasp;
  state.gripper.euler = wrap_euler(initial_gripper.euler);

  // deep quiescence so a held gripper is a fixed point to ~1e-6 m per step
  settle(state, params, config, config.settle_time, 3e-6);
  state.time = 0.0;
  return state;
}

void step(DloState& state, const DloParams& params, const SimConfig& config,
          const GripperPose& command) {
  check_stability(params, config);
  if (static_cast<int>(state.positions.size()) != params.num_particles ||
      state.positions.size() != state.velocities.size())
    throw DimensionError("step: state does not match num_particles");
  for (double c : command.position)
    if (!std::isfinite(c)) throw ConfigError("step: non-finite command position");
  for (double c : command.euler)
    if (!std::isfinite(c)) throw ConfigError("step: non-finite command orientation");
  advance(state, params, config, state.gripper, command, config.physics_substeps);
}

double settle(DloState& state, const DloParams& params, const SimConfig& config,
              double duration, double speed_tol, double window) {
  const GripperPose hold = state.gripper;
  const long steps = std::lround(duration / config.control_dt);
  const long window_steps = std::max(1L, std::lround(window / config.control_dt));

  std::vector<Vec3> window_start = state.positions;
  double residual = 0.0;
  long quiet = 0;
  for (long s = 0; s < steps; ++s) {
    if (s % window_steps == 0) {
      window_start = state.positions;
      residual = 0.0;
    }
    advance(state, params, config, hold, hold, config.physics_substeps);
    for (std::size_t i = 0; i < state.positions.size(); ++i)
      residual = std::max(residual, distance(state.positions[i], window_start[i]));
    quiet = max_speed(state) < speed_tol ? quiet + 1 : 0;
    if (quiet >= window_steps) break;
  }
  return residual;
}

std::vector<int> feature_indices(int num_particles, int m) {
  if (m < 1) throw UsageError("feature_indices: m must be positive");
  if (m > num_particles)
    throw UsageError("feature_indices: m exceeds the particle count");
  std::vector<int> idx(m);
  if (m == num_particles) {
    for (int i = 0; i < m; ++i) idx[i] = i;
    return idx;
  }
  for (int k = 1; k <= m; ++k)
    idx[k - 1] = static_cast<int>(
        std::lround(static_cast<double>(k) * (num_particles - 1) / m));
  return idx;
}

FeaturePointSet feature_points(const DloState& state, int m) {
  const int n = static_cast<int>(state.positions.size());
  FeaturePointSet pts;
  pts.reserve(m);
  for (int i : feature_indices(n, m)) pts.push_back(state.positions[i]);
  return pts;
}

Vec3 tip_orientation(const DloState& state) { return wrap_euler(state.gripper.euler); }

double straightness_measure(const DloState& state) {
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < state.positions.size(); ++i)
    arc += distance(state.positions[i + 1], state.positions[i]);
  if (arc < 1e-12) return 1.0;
  return distance(state.positions.back(), state.positions.front()) / arc;
}

double kinetic_energy(const DloState& state, const DloParams& params) {
  double e = 0.0;
  for (const Vec3& v : state.velocities) e += dot(v, v);
  return 0.5 * params.particle_mass() * e;
}

double max_speed(const DloState& state) {
  double s = 0.0;
  for (const Vec3& v : state.velocities) s = std::max(s, norm(v));
  return s;
}

std::string trajectory_csv_header(int num_particles) {
  std::string h = "time,gx,gy,gz,groll,gpitch,gyaw";
  for (int i = 0; i < num_particles; ++i) {
    h += ",p" + std::to_string(i) + "x";
    h += ",p" + std::to_string(i) + "y";
    h += ",p" + std::to_string(i) + "z";
  }
  h += "\n";
  return h;
}

void append_trajectory_row(std::string& out, const DloState& state) {
  char buf[32];
  auto put = [&](double v, bool lead_comma) {
    if (lead_comma) out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
  };
  put(state.time, false);
  for (int i = 0; i < 3; ++i) put(state.gripper.position[i], true);
  for (int i = 0; i < 3; ++i) put(state.gripper.euler[i], true);
  for (const Vec3& p : state.positions)
    for (double c : p) put(c, true);
  out += '\n';
}

}  // namespace dlo
