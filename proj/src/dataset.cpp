#include "dlo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dlo/errors.hpp"
#include "dlo/hash.hpp"
#include "dlo/rng.hpp"

namespace dlo {

void WorkspaceBox::validate() const {
  for (int i = 0; i < 3; ++i)
    if (!(extents[i] > 0.0))
      throw ConfigError("workspace box '" + name + "' needs positive extents");
}

Box3 WorkspaceBox::world(const Vec3& anchor) const {
  const Vec3 base = anchor + offset;
  return {{base[0] - 0.5 * extents[0], base[1] - 0.5 * extents[1], base[2]},
          {base[0] + 0.5 * extents[0], base[1] + 0.5 * extents[1], base[2] + extents[2]}};
}

WorkspaceBox workspace_preset(const std::string& name) {
  if (name == "small") return {name, {0.15, 0.40, 0.25}, {0.0, 0.0, 0.55}};
  if (name == "medium") return {name, {0.20, 0.50, 0.25}, {0.0, 0.0, 0.55}};
  if (name == "large") return {name, {0.20, 0.65, 0.30}, {0.0, 0.0, 0.55}};
  throw UsageError("unknown workspace preset '" + name +
                   "' (expected small, medium, or large)");
}

void GenerationSettings::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(roll_pitch_range > 0.0) || !(yaw_range > 0.0))
    throw ConfigError("orientation sampling ranges must be positive");
  if (!(max_lin_vel > 0.0) || !(max_ang_vel > 0.0))
    throw ConfigError("travel velocity caps must be positive");
  if (!(quiescence_tol > 0.0) || !(quiescence_window > 0.0))
    throw ConfigError("quiescence tolerance and window must be positive");
  if (!(settle_budget >= quiescence_window))
    throw ConfigError("settle budget must cover at least one quiescence window");
  if (!(straightness_limit > 0.0 && straightness_limit <= 1.0))
    throw ConfigError("straightness limit must lie in (0, 1]");
  if (max_attempts < 1) throw ConfigError("resample budget must be at least 1");
}

std::uint64_t sim_param_hash(const DloParams& params, const SimConfig& config) {
  char buf[64];
  std::string text = "P " + std::to_string(params.num_particles);
  const double values[] = {params.total_length,    params.total_mass,
                           params.stretch_stiffness, params.bend_stiffness,
                           params.damping_ratio,   params.drag_rate,
                           params.gravity[0],      params.gravity[1],
                           params.gravity[2],      params.ground_anchor[0],
                           params.ground_anchor[1],       params.ground_anchor[2],
                           config.control_dt};
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), " %a", v);
    text += buf;
  }
  text += " K " + std::to_string(config.physics_substeps);
  return fnv1a(text);
}

// pose-to-pose transfer at the velocity caps, command interpolated per step
static void travel(DloState& state, const DloParams& params, const SimConfig& config,
                   const GripperPose& target, double lin_cap, double ang_cap) {
  const GripperPose start = state.gripper;
  const Vec3 dp = target.position - start.position;
  Vec3 de;
  double ang = 0.0;
  for (int i = 0; i < 3; ++i) {
    de[i] = wrap_angle(target.euler[i] - start.euler[i]);
    ang = std::max(ang, std::abs(de[i]));
  }
  const double duration = std::max(norm(dp) / lin_cap, ang / ang_cap);
  const int n_steps = std::max(1, static_cast<int>(std::ceil(duration / config.control_dt)));
  for (int k = 1; k <= n_steps; ++k) {
    const double a = static_cast<double>(k) / n_steps;
    const GripperPose cmd{start.position + a * dp, wrap_euler(start.euler + a * de)};
    step(state, params, config, cmd);
  }
  state.gripper = {target.position, wrap_euler(target.euler)};
}

static DeformationRecord make_record(const Box3& world, const GenerationSettings& gs,
                                     const DloParams& params, const SimConfig& config,
                                     std::uint64_t record_seed) {
  Rng rng(record_seed);
  for (int attempt = 0; attempt < gs.max_attempts; ++attempt) {
    GripperPose target;
    for (int i = 0; i < 3; ++i) target.position[i] = rng.uniform(world.lo[i], world.hi[i]);
    target.euler = wrap_euler({rng.uniform(-gs.roll_pitch_range, gs.roll_pitch_range),
                               rng.uniform(-gs.roll_pitch_range, gs.roll_pitch_range),
                               rng.uniform(-gs.yaw_range, gs.yaw_range)});
    try {
      DloState state = reset(params, config, gs.home);
      travel(state, params, config, target, gs.max_lin_vel, gs.max_ang_vel);
      const double residual = settle(state, params, config, gs.settle_budget,
                                     gs.quiescence_tol, gs.quiescence_window);
      if (residual > gs.quiescence_tol) continue;
      if (straightness_measure(state) > gs.straightness_limit) continue;
      DeformationRecord rec;
      rec.goal.f_d = feature_points(state, gs.m);
      rec.goal.zeta = tip_orientation(state);
      rec.generating_pose = state.gripper;
      rec.settle_residual = residual;
      return rec;
    } catch (const SimDivergenceError&) {
      continue;
    }
  }
  throw GenerationError("resample budget exhausted (" + std::to_string(gs.max_attempts) +
                        " attempts)");
}

DatasetFile generate_dataset(const WorkspaceBox& box, int n, std::uint64_t seed,
                             const DloParams& params, const SimConfig& config,
                             const GenerationSettings& settings) {
  if (n < 1) throw UsageError("record count must be at least 1");
  box.validate();
  settings.validate();
  params.validate();
  config.validate();
  check_stability(params, config);

  const Box3 world = box.world(params.ground_anchor);
  double far_corner = 0.0;
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy)
      for (int cz = 0; cz < 2; ++cz) {
        const Vec3 c{cx ? world.hi[0] : world.lo[0], cy ? world.hi[1] : world.lo[1],
                     cz ? world.hi[2] : world.lo[2]};
        far_corner = std::max(far_corner, distance(c, params.ground_anchor));
      }
  if (far_corner > params.total_length)
    throw ConfigError("workspace box '" + box.name + "' reaches " +
                      std::to_string(far_corner) + " m from the anchor, beyond the chain");

  DatasetFile file;
  file.box_name = box.name;
  file.seed = seed;
  file.m = settings.m;
  file.sim_hash = sim_param_hash(params, config);
  file.records.resize(n);
  std::vector<std::string> failures(n);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      file.records[i] = make_record(world, settings, params, config,
                                    mix_seed(seed, static_cast<std::uint64_t>(i)));
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!failures[i].empty())
      throw GenerationError("record " + std::to_string(i) + ": " + failures[i]);
  return file;
}

std::pair<DatasetFile, DatasetFile> split_seen(const DatasetFile& dataset, double fraction,
                                               std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw UsageError("split fraction must lie strictly between 0 and 1");
  const std::size_t n = dataset.records.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k == 0 || k >= n)
    throw UsageError("split fraction leaves one side empty");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < k; ++i) in_train[order[i]] = true;

  DatasetFile train = dataset;
  DatasetFile test = dataset;
  train.records.clear();
  test.records.clear();
  for (std::size_t i = 0; i < n; ++i)
    (in_train[i] ? train : test).records.push_back(dataset.records[i]);
  return {std::move(train), std::move(test)};
}

static void append_hex(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), " %a", v);
  out += buf;
}

std::string dataset_text(const DatasetFile& file) {
  std::string out = "dloshape dataset " + std::to_string(file.version) + "\n";
  out += "box " + file.box_name + "\n";
  out += "seed " + std::to_string(file.seed) + "\n";
  out += "m " + std::to_string(file.m) + "\n";
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(file.sim_hash));
  out += std::string("sim_hash ") + hex + "\n";
  out += "count " + std::to_string(file.records.size()) + "\n";
  for (const DeformationRecord& rec : file.records) {
    if (static_cast<int>(rec.goal.f_d.size()) != file.m)
      throw DimensionError("record feature count disagrees with the header m");
    out += "record";
    for (const Vec3& p : rec.goal.f_d)
      for (double v : p) append_hex(out, v);
    for (double v : rec.goal.zeta) append_hex(out, v);
    for (double v : rec.generating_pose.position) append_hex(out, v);
    for (double v : rec.generating_pose.euler) append_hex(out, v);
    append_hex(out, rec.settle_residual);
    out += "\n";
  }
  return out;
}

void save_dataset(const DatasetFile& file, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::string text = dataset_text(file);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

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

double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) throw IoError("malformed numeric field '" + s + "'");
  return v;
}

std::string expect_kv(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("truncated header: missing '" + key + "'");
  const std::vector<std::string> tokens = tokenize(line);
  if (tokens.size() != 2 || tokens[0] != key)
    throw IoError("expected '" + key + " <value>', got '" + line + "'");
  return tokens[1];
}

}  // namespace

DatasetFile load_dataset(const std::string& path, std::uint64_t expected_sim_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file");
  std::vector<std::string> tokens = tokenize(line);
  if (tokens.size() != 3 || tokens[0] != "dloshape" || tokens[1] != "dataset")
    throw IoError("'" + path + "' is not a dataset file");
  const auto version = static_cast<int>(parse_u64(tokens[2], 10, "version"));
  if (version != 1)
    throw VersionError("dataset version " + tokens[2] + " is not supported (expected 1)");

  DatasetFile file;
  file.version = version;
  file.box_name = expect_kv(in, "box");
  file.seed = parse_u64(expect_kv(in, "seed"), 10, "seed");
  file.m = static_cast<int>(parse_u64(expect_kv(in, "m"), 10, "m"));
  if (file.m < 1 || file.m > 1024) throw IoError("header m out of range");
  file.sim_hash = parse_u64(expect_kv(in, "sim_hash"), 16, "sim_hash");
  const auto count = parse_u64(expect_kv(in, "count"), 10, "count");
  if (count > 10'000'000) throw IoError("header count out of range");

  const std::size_t fields = 3 * static_cast<std::size_t>(file.m) + 10;
  file.records.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    if (!std::getline(in, line))
      throw IoError("truncated dataset: " + std::to_string(r) + " of " +
                    std::to_string(count) + " records");
    tokens = tokenize(line);
    if (tokens.size() != fields + 1 || tokens[0] != "record")
      throw IoError("record " + std::to_string(r) + " is malformed");
    DeformationRecord rec;
    std::size_t t = 1;
    rec.goal.f_d.resize(file.m);
    for (Vec3& p : rec.goal.f_d)
      for (double& v : p) v = parse_double(tokens[t++]);
    for (double& v : rec.goal.zeta) v = parse_double(tokens[t++]);
    for (double& v : rec.generating_pose.position) v = parse_double(tokens[t++]);
    for (double& v : rec.generating_pose.euler) v = parse_double(tokens[t++]);
    rec.settle_residual = parse_double(tokens[t++]);
    file.records.push_back(std::move(rec));
  }
  while (std::getline(in, line))
    if (!tokenize(line).empty()) throw IoError("trailing content after the last record");

  if (file.sim_hash != expected_sim_hash) {
    file.cross_simulator = true;
    file.warning = "dataset was generated under different simulator parameters";
  }
  return file;
}

FeaturePointSet straight_reference(const DloParams& params, const GripperPose& pose,
                                   int m) {
  const std::vector<int> idx = feature_indices(params.num_particles, m);
  const Vec3 span = pose.position - params.ground_anchor;
  FeaturePointSet pts;
  pts.reserve(idx.size());
  for (int k : idx) {
    const double a = static_cast<double>(k) / (params.num_particles - 1);
    pts.push_back(params.ground_anchor + a * span);
  }
  return pts;
}

double max_deformation(const DatasetFile& file, const DloParams& params) {
  double worst = 0.0;
  for (const DeformationRecord& rec : file.records) {
    const FeaturePointSet ref = straight_reference(params, rec.generating_pose, file.m);
    for (std::size_t k = 0; k < ref.size(); ++k)
      worst = std::max(worst, distance(rec.goal.f_d[k], ref[k]));
  }
  return worst;
}

}  // namespace dlo
