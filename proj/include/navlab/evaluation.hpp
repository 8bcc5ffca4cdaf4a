#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "navlab/parallel.hpp"
#include "navlab/rng.hpp"
#include "navlab/simulation.hpp"

namespace navlab {

// Fraction of vehicles (pooled across logs) that ended inside both thresholds
// with no collision involvement.
inline double success_to_goal_rate(const std::vector<TrajectoryLog>& logs) {
  std::size_t total = 0, reached = 0;
  for (const TrajectoryLog& log : logs) {
    total += log.reached.size();
    for (std::uint8_t r : log.reached) reached += r ? 1 : 0;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(reached) / static_cast<double>(total);
}

// Pooled events over pooled distance (not the mean of per-log rates).
// Distances are summed in sorted order so the result is independent of log
// ordering.
inline double collision_rate(const std::vector<TrajectoryLog>& logs) {
  double events = 0.0;
  std::vector<double> distances;
  distances.reserve(logs.size());
  for (const TrajectoryLog& log : logs) {
    events += static_cast<double>(log.events.size());
    distances.push_back(log.distance_traveled);
  }
  std::sort(distances.begin(), distances.end());
  double distance = 0.0;
  for (double d : distances) distance += d;
  if (distance <= 0.0) {
    return events > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return events / distance;
}

struct NoiseConfig {
  double alpha_noise = 0.0;     // scales |phi| (degrees) inside the variance
  double beta_noise_deg = 2.0;  // variance bias, degrees^2 worth
  std::uint64_t seed = 0;
};

constexpr double kDegPerRad = 180.0 / kPi;

// Steering disturbance: delta_phi ~ N(0, alpha*|phi_deg| + beta_deg), the
// second argument read as a variance in degrees^2. Pedal is untouched; the
// perturbed steering is clamped back into the box.
inline double perturb_steering(double steering, const NoiseConfig& noise,
                               const KinematicParams& kin, Rng& rng) {
  const double variance_deg2 =
      noise.alpha_noise * std::fabs(steering * kDegPerRad) + noise.beta_noise_deg;
  const double sd_rad = std::sqrt(std::max(0.0, variance_deg2)) / kDegPerRad;
  const double out = steering + rng.normal() * sd_rad;
  return std::clamp(out, -kin.phi_max, kin.phi_max);
}

// Wrap a controller so every emitted steering angle is perturbed.
// Deterministic under the config seed.
inline Controller noisy_controller(Controller inner, const NoiseConfig& noise,
                                   const KinematicParams& kin) {
  if (noise.alpha_noise == 0.0 && noise.beta_noise_deg == 0.0) return inner;
  auto rng = std::make_shared<Rng>(noise.seed);
  return [inner = std::move(inner), noise, kin, rng](const Scenario& sc,
                                                     const StateRow& states) {
    ControlRow u = inner(sc, states);
    for (Control& c : u) {
      c.steering = perturb_steering(c.steering, noise, kin, *rng);
    }
    return u;
  };
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double density = 0.0;
};

struct RateHistogram {
  std::vector<HistogramBin> bins;
  int trajectories = 0;  // trajectories with at least one collision
  bool empty = true;
};

// Normalized density of per-trajectory collision rates; collision-free
// trajectories are excluded, matching how the distribution is reported.
inline RateHistogram rate_histogram(const std::vector<TrajectoryLog>& logs,
                                    int n_bins) {
  if (n_bins <= 0) throw std::invalid_argument("rate_histogram: n_bins must be > 0");
  std::vector<double> rates;
  for (const TrajectoryLog& log : logs) {
    if (log.events.empty()) continue;
    if (log.distance_traveled <= 0.0) continue;  // no finite rate to bin
    rates.push_back(static_cast<double>(log.events.size()) /
                    log.distance_traveled);
  }
  RateHistogram hist;
  hist.trajectories = static_cast<int>(rates.size());
  if (rates.empty()) return hist;
  hist.empty = false;

  double lo = *std::min_element(rates.begin(), rates.end());
  double hi = *std::max_element(rates.begin(), rates.end());
  if (hi == lo) {
    lo -= 0.5 / static_cast<double>(n_bins);
    hi += 0.5 / static_cast<double>(n_bins);
  }
  const double width = (hi - lo) / n_bins;
  hist.bins.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    hist.bins[b].lo = lo + b * width;
    hist.bins[b].hi = lo + (b + 1) * width;
  }
  for (double r : rates) {
    int b = static_cast<int>((r - lo) / width);
    b = std::clamp(b, 0, n_bins - 1);
    ++hist.bins[b].count;
  }
  for (HistogramBin& bin : hist.bins) {
    bin.density = static_cast<double>(bin.count) /
                  (static_cast<double>(rates.size()) * width);
  }
  return hist;
}

struct EvalReport {
  int n_vehicles = 0;
  int n_obstacles = 0;
  int episodes = 0;
  double success_to_goal = 0.0;
  double collision_rate = 0.0;
  RateHistogram histogram;
};

// Run one episode per scenario and reduce to the metric pair.
inline EvalReport evaluate_batch(const ControllerFactory& make_controller,
                                 const std::vector<Scenario>& scenarios,
                                 const SimConfig& cfg, const KinematicParams& kin,
                                 int jobs = 1, int histogram_bins = 20,
                                 std::vector<TrajectoryLog>* out_logs = nullptr) {
  std::vector<TrajectoryLog> logs(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
    Controller c = make_controller();
    logs[i] = run_closed_loop(c, scenarios[i], cfg, kin);
  });
  EvalReport report;
  report.episodes = static_cast<int>(scenarios.size());
  if (!scenarios.empty()) {
    report.n_vehicles = static_cast<int>(scenarios.front().vehicles.size());
    report.n_obstacles = static_cast<int>(scenarios.front().obstacles.size());
  }
  report.success_to_goal = success_to_goal_rate(logs);
  report.collision_rate = collision_rate(logs);
  report.histogram = rate_histogram(logs, histogram_bins);
  if (out_logs) *out_logs = std::move(logs);
  return report;
}

struct NoiseSweepResult {
  std::vector<double> alphas;
  std::vector<EvalReport> reports;
  std::vector<double> relative_success;  // normalized so alpha[0] maps to 1.0
};

// Evaluate the same scenario batch under increasing steering-noise intensity.
// Each alpha uses an independent noise stream derived from the base seed.
inline NoiseSweepResult noise_sweep(const ControllerFactory& make_controller,
                                    const std::vector<Scenario>& scenarios,
                                    const std::vector<double>& alphas,
                                    double beta_noise_deg, std::uint64_t seed,
                                    const SimConfig& cfg,
                                    const KinematicParams& kin, int jobs = 1) {
  NoiseSweepResult sweep;
  sweep.alphas = alphas;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    std::vector<TrajectoryLog> logs(scenarios.size());
    parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
      NoiseConfig noise{alphas[a], beta_noise_deg, mix_seed(seed, a * 1000003 + i)};
      Controller c = noisy_controller(make_controller(), noise, kin);
      logs[i] = run_closed_loop(c, scenarios[i], cfg, kin);
    });
    EvalReport report;
    report.episodes = static_cast<int>(scenarios.size());
    if (!scenarios.empty()) {
      report.n_vehicles = static_cast<int>(scenarios.front().vehicles.size());
      report.n_obstacles = static_cast<int>(scenarios.front().obstacles.size());
    }
    report.success_to_goal = success_to_goal_rate(logs);
    report.collision_rate = collision_rate(logs);
    report.histogram = rate_histogram(logs, 20);
    sweep.reports.push_back(std::move(report));
  }
  sweep.relative_success.resize(sweep.reports.size());
  const double base =
      sweep.reports.empty() ? 1.0 : sweep.reports.front().success_to_goal;
  for (std::size_t a = 0; a < sweep.reports.size(); ++a) {
    sweep.relative_success[a] =
        base > 0.0 ? sweep.reports[a].success_to_goal / base : 0.0;
  }
  return sweep;
}

}  // namespace navlab
