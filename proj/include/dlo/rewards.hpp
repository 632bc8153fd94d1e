#pragma once

#include <string>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo {

// Ordered feature points along the DLO, base to tip.
using FeaturePointSet = std::vector<Vec3>;

// Component-wise Euclidean distances between paired points.
std::vector<double> pairwise_distances(const FeaturePointSet& f,
                                       const FeaturePointSet& fd);

// r^p_1: negative maximum pairwise distance.
double reward_max_error(const FeaturePointSet& f, const FeaturePointSet& fd);

// r^p_2: negative mean pairwise distance.
double reward_mean_error(const FeaturePointSet& f, const FeaturePointSet& fd);

// r^p_3: negative sum of pairwise distances (the paired-point DTW form).
double reward_dtw(const FeaturePointSet& f, const FeaturePointSet& fd);

// r^o: negative RMSE over shortest-arc angular differences.
double reward_orientation(const Vec3& theta, const Vec3& zeta);

// max pairwise distance <= delta_p (boundary inclusive)
bool success_position(const FeaturePointSet& f, const FeaturePointSet& fd,
                      double delta_p);

// angular RMSE <= delta_o (boundary inclusive)
bool success_orientation(const Vec3& theta, const Vec3& zeta, double delta_o);

struct EvalOutcome {
  int goal_id = 0;
  bool success = false;
  double final_error = 0.0;  // meters, max feature distance at episode end
  int steps_used = 0;
};

struct EvalReport {
  double sr = 0.0;     // success fraction
  double ae = 0.0;     // mean final error, meters
  double sigma = 0.0;  // population standard deviation of final errors
  double me = 0.0;     // minimum final error
  std::vector<EvalOutcome> per_goal;
};

EvalReport aggregate(const std::vector<EvalOutcome>& outcomes);

// Plain-text table with SR / AE +- sigma / ME columns, errors in cm.
std::string render_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

// goal_id,success,final_error_m,steps_used rows.
std::string report_csv(const EvalReport& report);

}  // namespace dlo
