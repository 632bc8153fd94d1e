#include "dlo/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "dlo/errors.hpp"
#include "dlo/nn.hpp"
#include "dlo/rng.hpp"

namespace dlo {

AgentRole parse_agent_role(const std::string& name) {
  if (name == "position") return AgentRole::Position;
  if (name == "orientation") return AgentRole::Orientation;
  if (name == "ac3") return AgentRole::Ac3;
  if (name == "ac6") return AgentRole::Ac6;
  throw UsageError("unknown agent role: " + name +
                   " (expected position, orientation, ac3, or ac6)");
}

std::string agent_role_name(AgentRole role) {
  switch (role) {
    case AgentRole::Position: return "position";
    case AgentRole::Orientation: return "orientation";
    case AgentRole::Ac3: return "ac3";
    case AgentRole::Ac6: return "ac6";
  }
  throw std::logic_error("unreachable agent role");
}

namespace {

std::size_t param_count(const std::vector<int>& arch) {
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < arch.size(); ++k)
    total += static_cast<std::size_t>(arch[k]) * static_cast<std::size_t>(arch[k + 1]) +
             static_cast<std::size_t>(arch[k + 1]);
  return total;
}

void check_finite(const std::vector<double>& values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v))
      throw IntegrityError(std::string(what) + " contain a non-finite value");
}

}  // namespace

void Checkpoint::validate() const {
  if (version != 1) throw IntegrityError("unexpected in-memory checkpoint version");
  hyperparams.validate();
  for (const std::vector<int>* arch : {&actor_arch, &critic_arch}) {
    if (arch->size() < 2)
      throw IntegrityError("architecture descriptor needs at least two layers");
    for (int s : *arch)
      if (s < 1) throw IntegrityError("architecture layer sizes must be positive");
  }
  if (critic_arch.front() != actor_arch.front() + actor_arch.back())
    throw IntegrityError("critic input size must equal state size plus action size");
  if (critic_arch.back() != 1) throw IntegrityError("critic must have a single output");
  if (episodes_done < 0 || actor_opt_steps < 0 || critic_opt_steps < 0)
    throw IntegrityError("progress counters must be non-negative");

  const std::size_t na = param_count(actor_arch);
  const std::size_t nc = param_count(critic_arch);
  if (actor_params.size() != na || actor_target_params.size() != na)
    throw IntegrityError("actor parameter length disagrees with the architecture");
  if (critic_params.size() != nc || critic_target_params.size() != nc)
    throw IntegrityError("critic parameter length disagrees with the architecture");
  if (actor_moments.size() != 2 * na)
    throw IntegrityError("actor optimizer moment length disagrees with the architecture");
  if (critic_moments.size() != 2 * nc)
    throw IntegrityError("critic optimizer moment length disagrees with the architecture");

  check_finite(actor_params, "actor parameters");
  check_finite(critic_params, "critic parameters");
  check_finite(actor_target_params, "actor target parameters");
  check_finite(critic_target_params, "critic target parameters");
  check_finite(actor_moments, "actor optimizer moments");
  check_finite(critic_moments, "critic optimizer moments");
}

Checkpoint make_checkpoint(const DdpgAgent& agent, const Hyperparams& hp, AgentRole role,
                           std::uint64_t seed, std::int64_t episodes_done,
                           std::uint64_t dataset_hash) {
  Checkpoint ck;
  ck.role = role;
  ck.hyperparams = hp;
  ck.seed = seed;
  ck.episodes_done = episodes_done;
  ck.dataset_hash = dataset_hash;
  ck.actor_arch = agent.actor.layer_sizes;
  ck.critic_arch = agent.critic.layer_sizes;
  ck.actor_params = flatten_params(agent.actor);
  ck.critic_params = flatten_params(agent.critic);
  ck.actor_target_params = flatten_params(agent.actor_target);
  ck.critic_target_params = flatten_params(agent.critic_target);
  ck.actor_moments = flatten_adam_moments(agent.actor_opt);
  ck.critic_moments = flatten_adam_moments(agent.critic_opt);
  ck.actor_opt_steps = agent.actor_opt.step_count;
  ck.critic_opt_steps = agent.critic_opt.step_count;
  ck.validate();
  return ck;
}

DdpgAgent restore_agent(const Checkpoint& ck) {
  ck.validate();
  const Hyperparams& hp = ck.hyperparams;

  MlpNetwork actor = mlp_init(ck.actor_arch, Activation::Tanh, 0);
  MlpNetwork critic = mlp_init(ck.critic_arch, Activation::Identity, 0);
  MlpNetwork actor_target = mlp_init(ck.actor_arch, Activation::Tanh, 0);
  MlpNetwork critic_target = mlp_init(ck.critic_arch, Activation::Identity, 0);
  load_params(actor, ck.actor_params);
  load_params(critic, ck.critic_params);
  load_params(actor_target, ck.actor_target_params);
  load_params(critic_target, ck.critic_target_params);

  AdamState actor_opt = make_adam(actor, hp.actor_lr);
  AdamState critic_opt = make_adam(critic, hp.critic_lr);
  load_adam_moments(actor_opt, ck.actor_moments);
  load_adam_moments(critic_opt, ck.critic_moments);
  actor_opt.step_count = static_cast<long>(ck.actor_opt_steps);
  critic_opt.step_count = static_cast<long>(ck.critic_opt_steps);

  const int action_dim = ck.actor_arch.back();
  return DdpgAgent{std::move(actor),
                   std::move(critic),
                   std::move(actor_target),
                   std::move(critic_target),
                   std::move(actor_opt),
                   std::move(critic_opt),
                   hp.gamma,
                   hp.batch_size,
                   hp.tau,
                   OuNoiseProcess(action_dim, hp.ou_theta, hp.ou_sigma, hp.ou_dt,
                                  mix_seed(ck.seed, 3))};
}

namespace {

void append_hex(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  out += buf;
}

void append_hex_line(std::string& out, const char* key, double v) {
  out += key;
  out += ' ';
  append_hex(out, v);
  out += '\n';
}

void append_array(std::string& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i % 8 == 0) ? '\n' : ' ';
    append_hex(out, values[i]);
  }
  out += '\n';
}

void append_arch(std::string& out, const char* key, const std::vector<int>& arch) {
  out += key;
  out += ' ';
  out += std::to_string(arch.size());
  for (int s : arch) {
    out += ' ';
    out += std::to_string(s);
  }
  out += '\n';
}

}  // namespace

std::string checkpoint_text(const Checkpoint& ck) {
  const Hyperparams& hp = ck.hyperparams;
  std::string out;
  out.reserve(24 * (ck.actor_params.size() + ck.critic_params.size() +
                    ck.actor_target_params.size() + ck.critic_target_params.size() +
                    ck.actor_moments.size() + ck.critic_moments.size()) +
              4096);
  out += "dloshape checkpoint " + std::to_string(ck.version) + "\n";
  out += "role " + agent_role_name(ck.role) + "\n";
  out += "seed " + std::to_string(ck.seed) + "\n";
  out += "episodes " + std::to_string(ck.episodes_done) + "\n";
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(ck.dataset_hash));
  out += std::string("dataset_hash ") + hex + "\n";
  out += "hidden_layers " + std::to_string(hp.hidden_layers) + "\n";
  out += "hidden_size " + std::to_string(hp.hidden_size) + "\n";
  append_hex_line(out, "actor_lr", hp.actor_lr);
  append_hex_line(out, "critic_lr", hp.critic_lr);
  out += "buffer_capacity " + std::to_string(hp.buffer_capacity) + "\n";
  out += "batch_size " + std::to_string(hp.batch_size) + "\n";
  append_hex_line(out, "gamma", hp.gamma);
  append_hex_line(out, "tau", hp.tau);
  append_hex_line(out, "ou_theta", hp.ou_theta);
  append_hex_line(out, "ou_sigma", hp.ou_sigma);
  append_hex_line(out, "ou_dt", hp.ou_dt);
  append_arch(out, "actor_arch", ck.actor_arch);
  append_arch(out, "critic_arch", ck.critic_arch);

  const std::pair<const char*, const std::vector<double>*> sections[] = {
      {"actor", &ck.actor_params},
      {"critic", &ck.critic_params},
      {"actor_target", &ck.actor_target_params},
      {"critic_target", &ck.critic_target_params}};
  for (const auto& [name, values] : sections) {
    out += std::string("params ") + name + " " + std::to_string(values->size());
    append_array(out, *values);
  }
  out += "adam actor " + std::to_string(ck.actor_opt_steps) + " " +
         std::to_string(ck.actor_moments.size());
  append_array(out, ck.actor_moments);
  out += "adam critic " + std::to_string(ck.critic_opt_steps) + " " +
         std::to_string(ck.critic_moments.size());
  append_array(out, ck.critic_moments);
  out += "end\n";
  return out;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  ck.validate();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    const std::string text = checkpoint_text(ck);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move '" + tmp + "' over '" + path + "'");
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(const std::string& text) : in_(text) {}

  std::string next(const char* what) {
    std::string tok;
    if (!(in_ >> tok)) throw IoError(std::string("checkpoint truncated before ") + what);
    return tok;
  }

  void expect(const char* literal) {
    const std::string tok = next(literal);
    if (tok != literal)
      throw IoError("expected '" + std::string(literal) + "', got '" + tok + "'");
  }

  bool at_end() {
    std::string tok;
    return !(in_ >> tok);
  }

 private:
  std::istringstream in_;
};

std::uint64_t parse_u64(const std::string& s, int base, const char* what) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(s, &used, base);
    if (used != s.size()) throw IoError("");
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("malformed ") + what + " field");
  }
}

std::int64_t parse_i64(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(s, &used, 10);
    if (used != s.size()) throw IoError("");
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("malformed ") + what + " field");
  }
}

double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) throw IoError("malformed numeric field '" + s + "'");
  return v;
}

std::int64_t read_i64(TokenReader& r, const char* key) {
  r.expect(key);
  return parse_i64(r.next(key), key);
}

double read_double(TokenReader& r, const char* key) {
  r.expect(key);
  return parse_double(r.next(key));
}

std::vector<int> read_arch(TokenReader& r, const char* key) {
  r.expect(key);
  const std::int64_t n = parse_i64(r.next(key), key);
  if (n < 2 || n > 64) throw IoError(std::string("implausible layer count in ") + key);
  std::vector<int> arch;
  arch.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t s = parse_i64(r.next(key), key);
    if (s < 1 || s > 1000000) throw IoError(std::string("implausible layer size in ") + key);
    arch.push_back(static_cast<int>(s));
  }
  return arch;
}

std::vector<double> read_array(TokenReader& r, const char* what) {
  const std::int64_t n = parse_i64(r.next(what), what);
  if (n < 0 || n > 100000000) throw IoError(std::string("implausible array length for ") + what);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) values.push_back(parse_double(r.next(what)));
  return values;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  TokenReader r(text);
  r.expect("dloshape");
  r.expect("checkpoint");
  const std::string version = r.next("version");
  if (version != "1") throw VersionError("unsupported checkpoint version " + version);

  Checkpoint ck;
  r.expect("role");
  try {
    ck.role = parse_agent_role(r.next("role"));
  } catch (const UsageError& e) {
    throw IoError(e.what());
  }
  r.expect("seed");
  ck.seed = parse_u64(r.next("seed"), 10, "seed");
  ck.episodes_done = read_i64(r, "episodes");
  r.expect("dataset_hash");
  ck.dataset_hash = parse_u64(r.next("dataset_hash"), 16, "dataset_hash");

  Hyperparams& hp = ck.hyperparams;
  hp.hidden_layers = static_cast<int>(read_i64(r, "hidden_layers"));
  hp.hidden_size = static_cast<int>(read_i64(r, "hidden_size"));
  hp.actor_lr = read_double(r, "actor_lr");
  hp.critic_lr = read_double(r, "critic_lr");
  hp.buffer_capacity = static_cast<std::size_t>(parse_u64(
      (r.expect("buffer_capacity"), r.next("buffer_capacity")), 10, "buffer_capacity"));
  hp.batch_size = static_cast<int>(read_i64(r, "batch_size"));
  hp.gamma = read_double(r, "gamma");
  hp.tau = read_double(r, "tau");
  hp.ou_theta = read_double(r, "ou_theta");
  hp.ou_sigma = read_double(r, "ou_sigma");
  hp.ou_dt = read_double(r, "ou_dt");

  ck.actor_arch = read_arch(r, "actor_arch");
  ck.critic_arch = read_arch(r, "critic_arch");

  const std::pair<const char*, std::vector<double>*> sections[] = {
      {"actor", &ck.actor_params},
      {"critic", &ck.critic_params},
      {"actor_target", &ck.actor_target_params},
      {"critic_target", &ck.critic_target_params}};
  for (const auto& [name, values] : sections) {
    r.expect("params");
    r.expect(name);
    *values = read_array(r, name);
  }
  r.expect("adam");
  r.expect("actor");
  ck.actor_opt_steps = parse_i64(r.next("adam actor steps"), "adam actor steps");
  ck.actor_moments = read_array(r, "adam actor moments");
  r.expect("adam");
  r.expect("critic");
  ck.critic_opt_steps = parse_i64(r.next("adam critic steps"), "adam critic steps");
  ck.critic_moments = read_array(r, "adam critic moments");
  r.expect("end");
  if (!r.at_end()) throw IoError("trailing content after the end marker");

  ck.validate();
  return ck;
}

}  // namespace dlo
