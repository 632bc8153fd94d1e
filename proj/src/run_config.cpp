#include "dlo/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "dlo/errors.hpp"

namespace dlo {

void RunConfig::validate() const {
  trainer.validate();
  episode.validate();
  dlo.validate();
  sim.validate();
  try {
    parse_reward_kind(reward);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("bad value for '" + key + "': '" + value + "'");
}

double to_real(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + value.size()) bad_value(key, value);
  return v;
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used, 10);
    if (used != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used, 10);
    if (used != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

Vec3 to_vec3(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  std::string a, b, c, extra;
  if (!(in >> a >> b >> c) || (in >> extra)) bad_value(key, value);
  return {to_real(key, a), to_real(key, b), to_real(key, c)};
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  Hyperparams& hp = cfg.trainer.hyperparams;
  TrainerConfig& tr = cfg.trainer;
  EpisodeConfig& ep = cfg.episode;
  DloParams& dlo = cfg.dlo;
  SimConfig& sim = cfg.sim;

  if (key == "ddpg.hidden_layers") hp.hidden_layers = static_cast<int>(to_int(key, value));
  else if (key == "ddpg.hidden_size") hp.hidden_size = static_cast<int>(to_int(key, value));
  else if (key == "ddpg.actor_lr") hp.actor_lr = to_real(key, value);
  else if (key == "ddpg.critic_lr") hp.critic_lr = to_real(key, value);
  else if (key == "ddpg.buffer_capacity")
    hp.buffer_capacity = static_cast<std::size_t>(to_u64(key, value));
  else if (key == "ddpg.batch_size") hp.batch_size = static_cast<int>(to_int(key, value));
  else if (key == "ddpg.gamma") hp.gamma = to_real(key, value);
  else if (key == "ddpg.tau") hp.tau = to_real(key, value);
  else if (key == "ddpg.ou_theta") hp.ou_theta = to_real(key, value);
  else if (key == "ddpg.ou_sigma") hp.ou_sigma = to_real(key, value);
  else if (key == "ddpg.ou_dt") hp.ou_dt = to_real(key, value);
  else if (key == "trainer.num_workers") tr.num_workers = static_cast<int>(to_int(key, value));
  else if (key == "trainer.episodes_p") tr.episodes_p = static_cast<int>(to_int(key, value));
  else if (key == "trainer.steps_p") tr.steps_p = static_cast<int>(to_int(key, value));
  else if (key == "trainer.episodes_o") tr.episodes_o = static_cast<int>(to_int(key, value));
  else if (key == "trainer.steps_o") tr.steps_o = static_cast<int>(to_int(key, value));
  else if (key == "trainer.eval_every") tr.eval_every = static_cast<int>(to_int(key, value));
  else if (key == "trainer.seed") tr.seed = to_u64(key, value);
  else if (key == "trainer.kernel_chunks")
    tr.kernel_chunks = static_cast<int>(to_int(key, value));
  else if (key == "episode.max_steps_p") ep.max_steps_p = static_cast<int>(to_int(key, value));
  else if (key == "episode.max_steps_o") ep.max_steps_o = static_cast<int>(to_int(key, value));
  else if (key == "episode.delta_p") ep.delta_p = to_real(key, value);
  else if (key == "episode.delta_o") ep.delta_o = to_real(key, value);
  else if (key == "episode.max_lin_vel") ep.max_lin_vel = to_real(key, value);
  else if (key == "episode.max_ang_vel") ep.max_ang_vel = to_real(key, value);
  else if (key == "episode.workspace_lo") ep.workspace.lo = to_vec3(key, value);
  else if (key == "episode.workspace_hi") ep.workspace.hi = to_vec3(key, value);
  else if (key == "episode.home_position") ep.home.position = to_vec3(key, value);
  else if (key == "episode.home_euler") ep.home.euler = to_vec3(key, value);
  else if (key == "dlo.num_particles") dlo.num_particles = static_cast<int>(to_int(key, value));
  else if (key == "dlo.total_length") dlo.total_length = to_real(key, value);
  else if (key == "dlo.total_mass") dlo.total_mass = to_real(key, value);
  else if (key == "dlo.stretch_stiffness") dlo.stretch_stiffness = to_real(key, value);
  else if (key == "dlo.bend_stiffness") dlo.bend_stiffness = to_real(key, value);
  else if (key == "dlo.damping_ratio") dlo.damping_ratio = to_real(key, value);
  else if (key == "dlo.drag_rate") dlo.drag_rate = to_real(key, value);
  else if (key == "dlo.gravity") dlo.gravity = to_vec3(key, value);
  else if (key == "dlo.ground_anchor") dlo.ground_anchor = to_vec3(key, value);
  else if (key == "sim.control_dt") sim.control_dt = to_real(key, value);
  else if (key == "sim.physics_substeps")
    sim.physics_substeps = static_cast<int>(to_int(key, value));
  else if (key == "sim.settle_time") sim.settle_time = to_real(key, value);
  else if (key == "reward") cfg.reward = value;
  else if (key == "paths.dataset") cfg.paths.dataset = value;
  else if (key == "paths.checkpoint") cfg.paths.checkpoint = value;
  else if (key == "paths.checkpoint_orientation") cfg.paths.checkpoint_orientation = value;
  else if (key == "paths.checkpoint_position") cfg.paths.checkpoint_position = value;
  else if (key == "paths.log") cfg.paths.log = value;
  else if (key == "paths.losses") cfg.paths.losses = value;
  else if (key == "paths.report") cfg.paths.report = value;
  else if (key == "paths.trace") cfg.paths.trace = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto split = line.find_first_of(" \t");
    if (split == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + line +
                        "' is missing a value");
    const std::string key = line.substr(0, split);
    const std::string value = trim(line.substr(split + 1));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    try {
      apply_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void apply_env_overrides(RunConfig& cfg) {
  const std::pair<const char*, std::string*> vars[] = {
      {"DLOSHAPE_DATASET", &cfg.paths.dataset},
      {"DLOSHAPE_CHECKPOINT", &cfg.paths.checkpoint},
      {"DLOSHAPE_CHECKPOINT_ORIENTATION", &cfg.paths.checkpoint_orientation},
      {"DLOSHAPE_CHECKPOINT_POSITION", &cfg.paths.checkpoint_position},
      {"DLOSHAPE_LOG", &cfg.paths.log},
      {"DLOSHAPE_LOSSES", &cfg.paths.losses},
      {"DLOSHAPE_REPORT", &cfg.paths.report},
      {"DLOSHAPE_TRACE", &cfg.paths.trace}};
  for (const auto& [name, field] : vars)
    if (const char* v = std::getenv(name); v != nullptr && *v != '\0') *field = v;
}

namespace {

void kv_int(std::string& out, const char* key, long long v) {
  out += key;
  out += ' ';
  out += std::to_string(v);
  out += '\n';
}

void kv_real(std::string& out, const char* key, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += key;
  out += ' ';
  out += buf;
  out += '\n';
}

void kv_vec3(std::string& out, const char* key, const Vec3& v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", v[0], v[1], v[2]);
  out += key;
  out += ' ';
  out += buf;
  out += '\n';
}

void kv_str(std::string& out, const char* key, const std::string& v) {
  if (v.empty()) return;  // empty values are unrepresentable; omit the key
  out += key;
  out += ' ';
  out += v;
  out += '\n';
}

}  // namespace

std::string run_config_text(const RunConfig& cfg) {
  const Hyperparams& hp = cfg.trainer.hyperparams;
  std::string out = "# dloshape run configuration\n";
  kv_int(out, "ddpg.hidden_layers", hp.hidden_layers);
  kv_int(out, "ddpg.hidden_size", hp.hidden_size);
  kv_real(out, "ddpg.actor_lr", hp.actor_lr);
  kv_real(out, "ddpg.critic_lr", hp.critic_lr);
  kv_int(out, "ddpg.buffer_capacity", static_cast<long long>(hp.buffer_capacity));
  kv_int(out, "ddpg.batch_size", hp.batch_size);
  kv_real(out, "ddpg.gamma", hp.gamma);
  kv_real(out, "ddpg.tau", hp.tau);
  kv_real(out, "ddpg.ou_theta", hp.ou_theta);
  kv_real(out, "ddpg.ou_sigma", hp.ou_sigma);
  kv_real(out, "ddpg.ou_dt", hp.ou_dt);
  kv_int(out, "trainer.num_workers", cfg.trainer.num_workers);
  kv_int(out, "trainer.episodes_p", cfg.trainer.episodes_p);
  kv_int(out, "trainer.steps_p", cfg.trainer.steps_p);
  kv_int(out, "trainer.episodes_o", cfg.trainer.episodes_o);
  kv_int(out, "trainer.steps_o", cfg.trainer.steps_o);
  kv_int(out, "trainer.eval_every", cfg.trainer.eval_every);
  kv_int(out, "trainer.seed", static_cast<long long>(cfg.trainer.seed));
  kv_int(out, "trainer.kernel_chunks", cfg.trainer.kernel_chunks);
  kv_int(out, "episode.max_steps_p", cfg.episode.max_steps_p);
  kv_int(out, "episode.max_steps_o", cfg.episode.max_steps_o);
  kv_real(out, "episode.delta_p", cfg.episode.delta_p);
  kv_real(out, "episode.delta_o", cfg.episode.delta_o);
  kv_real(out, "episode.max_lin_vel", cfg.episode.max_lin_vel);
  kv_real(out, "episode.max_ang_vel", cfg.episode.max_ang_vel);
  kv_vec3(out, "episode.workspace_lo", cfg.episode.workspace.lo);
  kv_vec3(out, "episode.workspace_hi", cfg.episode.workspace.hi);
  kv_vec3(out, "episode.home_position", cfg.episode.home.position);
  kv_vec3(out, "episode.home_euler", cfg.episode.home.euler);
  kv_int(out, "dlo.num_particles", cfg.dlo.num_particles);
  kv_real(out, "dlo.total_length", cfg.dlo.total_length);
  kv_real(out, "dlo.total_mass", cfg.dlo.total_mass);
  kv_real(out, "dlo.stretch_stiffness", cfg.dlo.stretch_stiffness);
  kv_real(out, "dlo.bend_stiffness", cfg.dlo.bend_stiffness);
  kv_real(out, "dlo.damping_ratio", cfg.dlo.damping_ratio);
  kv_real(out, "dlo.drag_rate", cfg.dlo.drag_rate);
  kv_vec3(out, "dlo.gravity", cfg.dlo.gravity);
  kv_vec3(out, "dlo.ground_anchor", cfg.dlo.ground_anchor);
  kv_real(out, "sim.control_dt", cfg.sim.control_dt);
  kv_int(out, "sim.physics_substeps", cfg.sim.physics_substeps);
  kv_real(out, "sim.settle_time", cfg.sim.settle_time);
  kv_str(out, "reward", cfg.reward);
  kv_str(out, "paths.dataset", cfg.paths.dataset);
  kv_str(out, "paths.checkpoint", cfg.paths.checkpoint);
  kv_str(out, "paths.checkpoint_orientation", cfg.paths.checkpoint_orientation);
  kv_str(out, "paths.checkpoint_position", cfg.paths.checkpoint_position);
  kv_str(out, "paths.log", cfg.paths.log);
  kv_str(out, "paths.losses", cfg.paths.losses);
  kv_str(out, "paths.report", cfg.paths.report);
  kv_str(out, "paths.trace", cfg.paths.trace);
  return out;
}

}  // namespace dlo
