#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlo/dlo_sim.hpp"
#include "dlo/episode.hpp"
#include "dlo/geometry.hpp"

namespace dlo {

// Axis-aligned sampling volume, positioned relative to the anchor: centered
// laterally, base at offset height.
struct WorkspaceBox {
  std::string name;
  Vec3 extents{0.0, 0.0, 0.0};  // meters
  Vec3 offset{0.0, 0.0, 0.0};   // base-center displacement from the anchor

  void validate() const;  // throws ConfigError on non-positive extents
  Box3 world(const Vec3& anchor) const;
};

// small: 15x40x25 cm, medium: 20x50x25 cm, large: 20x65x30 cm, all with their
// base 0.55 m above the anchor. Unknown name -> UsageError.
WorkspaceBox workspace_preset(const std::string& name);

struct DeformationRecord {
  DeformationGoal goal;
  GripperPose generating_pose;
  double settle_residual = 0.0;  // max particle motion in the final window, meters
};

struct DatasetFile {
  int version = 1;
  std::string box_name;
  std::uint64_t seed = 0;
  int m = 4;
  std::uint64_t sim_hash = 0;
  std::vector<DeformationRecord> records;

  // set by load_dataset when the file's sim_hash differs from the caller's:
  // the goals stay usable but came from a different simulator configuration
  bool cross_simulator = false;
  std::string warning;
};

struct GenerationSettings {
  int m = 4;
  double roll_pitch_range = 1.0471975511965976;  // +-60 degrees
  double yaw_range = 3.14159265358979323846;     // +-180 degrees
  double max_lin_vel = 0.10;   // travel speed cap, m/s
  double max_ang_vel = 0.5;    // rad/s
  double quiescence_tol = 1e-3;     // m/s
  double quiescence_window = 0.5;   // seconds
  double settle_budget = 20.0;      // seconds of simulated settling per attempt
  double straightness_limit = 0.995;  // singular configurations are resampled
  int max_attempts = 64;  // per record, then GenerationError
  GripperPose home{{0.0, 0.0, 0.80}, {0.0, 0.0, 0.0}};

  void validate() const;
};

// Stable digest of every numeric simulator parameter; records which physics
// produced a dataset.
std::uint64_t sim_param_hash(const DloParams& params, const SimConfig& config);

// n independent records: sample a pose uniformly in the box (Euler angles
// uniform in the configured ranges), travel there from the home pose at the
// velocity caps, settle to quiescence, record F_d / zeta / pose / residual.
// Non-quiescent, divergent, or near-straight outcomes are resampled.
// Content is a pure function of (box, n, seed) for fixed physics.
DatasetFile generate_dataset(const WorkspaceBox& box, int n, std::uint64_t seed,
                             const DloParams& params, const SimConfig& config,
                             const GenerationSettings& settings = {});

// Disjoint random partition; fraction of the records (rounded) goes to train.
// A fraction outside (0,1) or one that leaves a side empty -> UsageError.
std::pair<DatasetFile, DatasetFile> split_seen(const DatasetFile& dataset,
                                               double fraction, std::uint64_t seed);

// Text serialization: header block, then one record per line, every double in
// hexfloat so round-trips are bit-exact.
std::string dataset_text(const DatasetFile& file);
void save_dataset(const DatasetFile& file, const std::string& path);

// expected_sim_hash is the caller's sim_param_hash; a mismatch flags the
// loaded file as cross-simulator instead of failing. Unknown version ->
// VersionError; malformed or truncated content -> IoError.
DatasetFile load_dataset(const std::string& path, std::uint64_t expected_sim_hash);

// Feature points of the straight anchor->grasp line (reset's initial
// placement), the undeformed reference for deformation magnitudes.
FeaturePointSet straight_reference(const DloParams& params, const GripperPose& pose,
                                   int m);

// max over records of the max feature distance to the straight reference
double max_deformation(const DatasetFile& file, const DloParams& params);

}  // namespace dlo
