#include "dlo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dlo/errors.hpp"

namespace dlo {

std::vector<double> pairwise_distances(const FeaturePointSet& f,
                                       const FeaturePointSet& fd) {
  if (f.size() != fd.size())
    throw DimensionError("pairwise_distances: point sets differ in length");
  std::vector<double> d(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) d[i] = distance(f[i], fd[i]);
  return d;
}

double reward_max_error(const FeaturePointSet& f, const FeaturePointSet& fd) {
  const auto d = pairwise_distances(f, fd);
  return -*std::max_element(d.begin(), d.end());
}

double reward_mean_error(const FeaturePointSet& f, const FeaturePointSet& fd) {
  const auto d = pairwise_distances(f, fd);
  return -std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

double reward_dtw(const FeaturePointSet& f, const FeaturePointSet& fd) {
  // written as m * mean rather than the raw sum so the scale identity between
  // the two rewards holds bit-exactly, not merely to rounding
  return static_cast<double>(f.size()) * reward_mean_error(f, fd);
}

double reward_orientation(const Vec3& theta, const Vec3& zeta) {
  double sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = wrap_angle(theta[i] - zeta[i]);
    sq += e * e;
  }
  return -std::sqrt(sq / 3.0);
}

bool success_position(const FeaturePointSet& f, const FeaturePointSet& fd,
                      double delta_p) {
  return reward_max_error(f, fd) >= -delta_p;
}

bool success_orientation(const Vec3& theta, const Vec3& zeta, double delta_o) {
  return reward_orientation(theta, zeta) >= -delta_o;
}

EvalReport aggregate(const std::vector<EvalOutcome>& outcomes) {
  if (outcomes.empty()) throw UsageError("aggregate: no outcomes");
  EvalReport r;
  r.per_goal = outcomes;
  const double n = static_cast<double>(outcomes.size());
  double sum = 0.0;
  int successes = 0;
  double best = outcomes.front().final_error;
  for (const auto& o : outcomes) {
    sum += o.final_error;
    successes += o.success ? 1 : 0;
    best = std::min(best, o.final_error);
  }
  r.sr = static_cast<double>(successes) / n;
  r.ae = sum / n;
  r.me = best;
  double sq = 0.0;
  for (const auto& o : outcomes) {
    const double d = o.final_error - r.ae;
    sq += d * d;
  }
  r.sigma = std::sqrt(sq / n);
  return r;
}

std::string render_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %8s %18s %8s\n", "Dataset", "SR^",
                "AE(cm)v +- sigma", "ME(cm)v");
  out += buf;
  out += std::string(64, '-') + "\n";
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-28s %8.2f %10.2f +- %5.2f %8.2f\n",
                  name.c_str(), r.sr, r.ae * 100.0, r.sigma * 100.0, r.me * 100.0);
    out += buf;
  }
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "goal_id,success,final_error_m,steps_used\n";
  char buf[96];
  for (const auto& o : report.per_goal) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%d\n", o.goal_id, o.success ? 1 : 0,
                  o.final_error, o.steps_used);
    out += buf;
  }
  return out;
}

}  // namespace dlo
