#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "navlab/costs.hpp"
#include "navlab/kinematics.hpp"
#include "navlab/scenario.hpp"

namespace navlab {

enum class WarmStartKind { zeros, shifted_previous, policy_prediction };

struct WarmStart {
  WarmStartKind kind = WarmStartKind::zeros;
  ControlSeq controls;  // previous solution or policy plan; empty for zeros

  static WarmStart from_zeros() { return {WarmStartKind::zeros, {}}; }
  static WarmStart from_previous(ControlSeq previous) {
    return {WarmStartKind::shifted_previous, std::move(previous)};
  }
  static WarmStart from_policy(ControlSeq plan) {
    return {WarmStartKind::policy_prediction, std::move(plan)};
  }
};

struct OptimizerConfig {
  double g_tol = 1e-3;   // projected-gradient infinity norm
  double f_tol = 1e-6;   // relative cost decrease per iteration
  int max_iter = 200;
  int lbfgs_memory = 10;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_ls_steps = 40;
};

// Everything a single planning solve needs besides the scenario itself.
struct SolverSetup {
  KinematicParams kin;
  CostWeights weights;
  Margins margins;
  OptimizerConfig opt;
  int horizon = 20;
};

struct OptResult {
  ControlSeq controls;
  double final_cost = 0.0;
  int iterations = 0;
  double wall_time = 0.0;  // seconds
  bool converged = false;
  bool clamp_flag = false;
};

// Drop the first control row and repeat the last one; the standard
// receding-horizon initialization from the previous solution.
inline ControlSeq shift_warm_start(const ControlSeq& previous) {
  if (previous.empty()) return previous;
  ControlSeq shifted;
  shifted.reserve(previous.size());
  for (std::size_t t = 1; t < previous.size(); ++t) shifted.push_back(previous[t]);
  shifted.push_back(previous.back());
  return shifted;
}

namespace detail {

inline std::vector<double> flatten(const ControlSeq& c) {
  std::vector<double> x;
  x.reserve(c.size() * (c.empty() ? 0 : c[0].size()) * 2);
  for (const ControlRow& row : c) {
    for (const Control& u : row) {
      x.push_back(u.pedal);
      x.push_back(u.steering);
    }
  }
  return x;
}

inline ControlSeq unflatten(const std::vector<double>& x, std::size_t horizon,
                            std::size_t n) {
  ControlSeq c(horizon, ControlRow(n));
  std::size_t k = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      c[t][i].pedal = x[k++];
      c[t][i].steering = x[k++];
    }
  }
  return c;
}

inline void project_box(std::vector<double>& x, const KinematicParams& kin) {
  for (std::size_t k = 0; k < x.size(); k += 2) {
    x[k] = std::clamp(x[k], -kin.pedal_max, kin.pedal_max);
    x[k + 1] = std::clamp(x[k + 1], -kin.phi_max, kin.phi_max);
  }
}

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct LbfgsPair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion; returns -H*g. With no curvature pairs yet, falls back
// to steepest descent scaled so the first trial step is a modest fraction of
// the box rather than a raw-gradient leap.
inline std::vector<double> lbfgs_direction(const std::deque<LbfgsPair>& mem,
                                           const std::vector<double>& g) {
  std::vector<double> q = g;
  if (mem.empty()) {
    const double scale = 0.1 / std::max(1e-12, inf_norm(g));
    for (double& qi : q) qi *= -scale;
    return q;
  }
  std::vector<double> alpha(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alpha[k] = mem[k].rho * dot(mem[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * mem[k].y[i];
  }
  {
    const LbfgsPair& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& qi : q) qi *= gamma;
  }
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * dot(mem[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] += (alpha[k] - beta) * mem[k].s[i];
    }
  }
  for (double& qi : q) qi = -qi;
  return q;
}

}  // namespace detail

// Minimize total_cost over the H x N control sequence inside the actuation
// box. Projected quasi-Newton: L-BFGS direction, projection onto the box,
// Armijo backtracking on the projected point. Deterministic.
inline OptResult optimize(const Scenario& sc, const StateRow& current,
                          const WarmStart& init, const SolverSetup& setup) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t horizon = static_cast<std::size_t>(setup.horizon);
  const std::size_t n = current.size();
  const std::size_t dim = horizon * n * 2;

  ControlSeq init_controls;
  switch (init.kind) {
    case WarmStartKind::zeros:
      init_controls = zero_controls(setup.horizon, n);
      break;
    case WarmStartKind::shifted_previous:
      init_controls = shift_warm_start(init.controls);
      break;
    case WarmStartKind::policy_prediction:
      init_controls = init.controls;
      break;
  }
  if (init_controls.size() != horizon) {
    throw std::invalid_argument("optimize: warm start horizon mismatch");
  }

  std::vector<double> x = detail::flatten(init_controls);
  detail::project_box(x, setup.kin);

  auto eval_cost = [&](const std::vector<double>& xv, CostDiagnostics* d) {
    return total_cost(detail::unflatten(xv, horizon, n), sc, current, setup.kin,
                      setup.weights, setup.margins, d);
  };
  auto eval_grad = [&](const std::vector<double>& xv) {
    return detail::flatten(total_cost_gradient(detail::unflatten(xv, horizon, n),
                                               sc, current, setup.kin,
                                               setup.weights, setup.margins));
  };

  double f = eval_cost(x, nullptr);
  if (!std::isfinite(f)) {
    throw std::runtime_error("optimize: non-finite cost at the initial point");
  }
  std::vector<double> g = eval_grad(x);

  std::deque<detail::LbfgsPair> memory;
  OptResult res;
  res.iterations = 0;
  bool converged = false;

  for (int iter = 0; iter < setup.opt.max_iter; ++iter) {
    // projected-gradient stationarity check
    std::vector<double> pg(dim);
    {
      std::vector<double> xs = x;
      for (std::size_t k = 0; k < dim; ++k) xs[k] -= g[k];
      detail::project_box(xs, setup.kin);
      for (std::size_t k = 0; k < dim; ++k) pg[k] = x[k] - xs[k];
    }
    if (detail::inf_norm(pg) < setup.opt.g_tol) {
      converged = true;
      break;
    }

    std::vector<double> dir = detail::lbfgs_direction(memory, g);
    if (detail::dot(dir, g) >= 0.0) {
      // curvature info went stale; restart from scaled steepest descent
      memory.clear();
      dir = detail::lbfgs_direction(memory, g);
    }
    bool accepted = false;
    std::vector<double> x_new, g_new;
    double f_new = f;

    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;  // already tried scaled steepest descent
        memory.clear();
        dir = detail::lbfgs_direction(memory, g);
      }
      double alpha = 1.0;
      for (int ls = 0; ls < setup.opt.max_ls_steps; ++ls) {
        std::vector<double> xc = x;
        for (std::size_t k = 0; k < dim; ++k) xc[k] += alpha * dir[k];
        detail::project_box(xc, setup.kin);
        double fc = eval_cost(xc, nullptr);
        if (std::isfinite(fc)) {
          double slope = 0.0;
          for (std::size_t k = 0; k < dim; ++k) slope += g[k] * (xc[k] - x[k]);
          const double threshold =
              f + setup.opt.armijo_c * std::min(slope, 0.0);
          if (fc <= threshold && fc < f) {
            x_new = std::move(xc);
            f_new = fc;
            accepted = true;
            break;
          }
        }
        alpha *= setup.opt.backtrack;
      }
    }

    if (!accepted) break;  // stalled; keep the best point found so far

    g_new = eval_grad(x_new);
    detail::LbfgsPair pair;
    pair.s.resize(dim);
    pair.y.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      pair.s[k] = x_new[k] - x[k];
      pair.y[k] = g_new[k] - g[k];
    }
    const double sy = detail::dot(pair.s, pair.y);
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > setup.opt.lbfgs_memory) {
        memory.pop_front();
      }
    }

    const double decrease = f - f_new;
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    ++res.iterations;

    // relative decrease test: tight when the cost is already small, loose on
    // the large-cost plateau where progress per iteration is slow anyway
    if (decrease < setup.opt.f_tol * std::max(1.0, std::fabs(f))) {
      converged = true;
      break;
    }
  }

  CostDiagnostics diag;
  res.final_cost = eval_cost(x, &diag);
  res.clamp_flag = diag.clamped;
  res.converged = converged && !diag.clamped;
  res.controls = detail::unflatten(x, horizon, n);
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return res;
}

struct BenchmarkResult {
  double mean_time_a = 0.0;
  double mean_time_b = 0.0;
  double mean_iterations_a = 0.0;
  double mean_iterations_b = 0.0;
  double time_ratio = 0.0;  // time_b / time_a
};

// Solve the identical instance with both warm starts, `repeats` times each.
inline BenchmarkResult benchmark_step(const Scenario& sc, const StateRow& states,
                                      const WarmStart& init_a,
                                      const WarmStart& init_b,
                                      const SolverSetup& setup, int repeats) {
  BenchmarkResult out;
  for (int r = 0; r < repeats; ++r) {
    const OptResult a = optimize(sc, states, init_a, setup);
    const OptResult b = optimize(sc, states, init_b, setup);
    out.mean_time_a += a.wall_time;
    out.mean_time_b += b.wall_time;
    out.mean_iterations_a += a.iterations;
    out.mean_iterations_b += b.iterations;
  }
  out.mean_time_a /= repeats;
  out.mean_time_b /= repeats;
  out.mean_iterations_a /= repeats;
  out.mean_iterations_b /= repeats;
  out.time_ratio = out.mean_time_b / out.mean_time_a;
  return out;
}

}  // namespace navlab
