// navlab: multi-vehicle navigation lab
//
// Pipeline subcommands: gen -> label -> train -> mine -> select -> label ->
// train -> eval, plus bench-opt and noise-sweep for the runtime and
// robustness studies.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navlab/navlab.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitMissingFile = 2;
constexpr int kExitBadFormat = 3;

// report cells; data files keep the full round-trip precision
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct CliConfig {
  SolverSetup solver;
  SimConfig sim;
  GnnConfig gnn;
  double taint_threshold = 0.1;
  int jobs = 1;
};

// Flags shared by every subcommand, all overridable from the config file.
void add_common_options(CLI::App& app, CliConfig& cfg) {
  app.add_option("--horizon", cfg.solver.horizon, "planning horizon H");
  app.add_option("--dt", cfg.solver.kin.dt, "timestep, s");
  app.add_option("--beta-decay", cfg.solver.kin.beta_decay, "velocity retention");
  app.add_option("--gamma-steer", cfg.solver.kin.gamma_steer, "steering gain");
  app.add_option("--pedal-max", cfg.solver.kin.pedal_max, "pedal bound, m/s^2");
  app.add_option("--w-pos", cfg.solver.weights.w_pos, "target position weight");
  app.add_option("--w-orient", cfg.solver.weights.w_orient, "target orientation weight");
  app.add_option("--w-col-veh", cfg.solver.weights.w_col_veh, "vehicle collision weight");
  app.add_option("--w-col-obs", cfg.solver.weights.w_col_obs, "obstacle collision weight");
  app.add_option("--w-vel", cfg.solver.weights.w_vel, "velocity weight");
  app.add_option("--r-mar-veh", cfg.solver.margins.r_mar_veh, "vehicle margin, m");
  app.add_option("--r-mar-obs", cfg.solver.margins.r_mar_obs, "obstacle margin, m");
  app.add_option("--v-mar", cfg.solver.margins.v_mar, "speed margin, m/s");
  app.add_option("--g-tol", cfg.solver.opt.g_tol, "gradient tolerance");
  app.add_option("--f-tol", cfg.solver.opt.f_tol, "cost decrease tolerance");
  app.add_option("--max-iter", cfg.solver.opt.max_iter, "solver iteration cap");
  app.add_option("--steps", cfg.sim.max_steps, "episode length T");
  app.add_option("--pos-threshold", cfg.sim.pos_threshold, "success radius, m");
  app.add_option("--orient-threshold", cfg.sim.orient_threshold, "success angle, rad");
  app.add_option("--vehicle-radius", cfg.sim.vehicle_radius, "contact radius, m");
  app.add_option("--taint-threshold", cfg.taint_threshold,
                 "clamped-step fraction that disqualifies a trajectory");
  app.add_option("--layers", cfg.gnn.layers, "gnn layer count");
  app.add_option("--hidden", cfg.gnn.hidden, "gnn hidden width");
  app.add_flag("!--no-recenter", cfg.gnn.recenter, "disable per-graph recentering");
  app.add_option("--jobs", cfg.jobs, "worker threads");
}

WorldBounds auto_bounds(int n_vehicles, double half_extent) {
  const double h = half_extent > 0.0 ? half_extent : 10.0 + n_vehicles;
  return {-h, h, -h, h};
}

LabelingConfig labeling_config(const CliConfig& cfg) {
  LabelingConfig lc;
  lc.solver = cfg.solver;
  lc.sim = cfg.sim;
  lc.taint_threshold = cfg.taint_threshold;
  return lc;
}

std::vector<Scenario> generate_pool(int count, int vehicles, int obstacles,
                                    double half_extent, std::uint64_t seed) {
  std::vector<Scenario> pool;
  pool.reserve(count);
  for (int k = 0; k < count; ++k) {
    Rng rng(mix_seed(seed, k));
    pool.push_back(generate_scenario(vehicles, obstacles,
                                     auto_bounds(vehicles, half_extent), rng));
  }
  return pool;
}

int cmd_gen(const CliConfig&, int vehicles, int obstacles, int count,
            std::uint64_t seed, double half_extent, const std::string& out) {
  const std::vector<Scenario> pool =
      generate_pool(count, vehicles, obstacles, half_extent, seed);
  save_scenarios(out, pool, seed);
  std::printf("gen: wrote %d scenarios (%d vehicles, %d obstacles) to %s\n",
              count, vehicles, obstacles, out.c_str());
  return 0;
}

int cmd_label(const CliConfig& cfg, const std::string& scenarios_file,
              const std::string& warm, const std::string& model_file,
              const std::string& out, const std::string& telemetry_file,
              std::uint64_t seed) {
  const std::vector<Scenario> scenarios = load_scenarios(scenarios_file);
  const WarmSource source =
      warm == "policy" ? WarmSource::policy : WarmSource::shifted;
  std::optional<GnnModel> model;
  if (source == WarmSource::policy) {
    if (model_file.empty()) {
      std::fprintf(stderr, "label: --warm policy requires --model\n");
      return kExitRuntime;
    }
    model = load_model(model_file);
  }

  const LabelingConfig lc = labeling_config(cfg);
  std::vector<TrajectoryTelemetry> telemetry;
  Dataset ds = build_dataset(scenarios, source, model ? &*model : nullptr, lc,
                             cfg.jobs, &telemetry);
  ds.seed = seed;
  ds.config_hash = hash_labeling_config(lc);
  save_dataset(out, ds, warm);

  {
    nlohmann::json manifest;
    manifest["format"] = "navlab-dataset-manifest";
    manifest["version"] = kFormatVersion;
    manifest["warm_source"] = warm;
    manifest["seed"] = seed;
    manifest["config_hash"] = ds.config_hash;
    manifest["scenarios_file"] = scenarios_file;
    manifest["trajectories"] = nlohmann::json::array();
    for (const auto& t : telemetry) {
      manifest["trajectories"].push_back(
          {{"id", t.scenario_id},
           {"tainted", t.tainted},
           {"steps", t.steps.size()}});
    }
    write_file_atomic(out + ".manifest.json", manifest.dump(1) + "\n");
  }

  if (!telemetry_file.empty()) {
    CsvBuilder csv({"scenario", "step", "wall_time", "iterations", "clamped"});
    for (const auto& t : telemetry) {
      for (std::size_t s = 0; s < t.steps.size(); ++s) {
        csv.append_row({std::to_string(t.scenario_id), std::to_string(s),
                        num(t.steps[s].wall_time),
                        std::to_string(t.steps[s].iterations),
                        t.steps[s].clamped ? "1" : "0"});
      }
    }
    csv.save(telemetry_file);
  }
  std::printf("label: %zu samples from %d trajectories (%d tainted) -> %s\n",
              ds.samples.size(), ds.trajectories, ds.tainted_trajectories,
              out.c_str());
  return 0;
}

int cmd_train(const CliConfig& cfg, const std::string& dataset_file,
              const std::string& init_model, int epochs, double lr,
              std::uint64_t seed, double val_split, const std::string& out_model,
              const std::string& curve_file) {
  const Dataset ds = load_dataset(dataset_file);
  if (ds.samples.empty()) {
    std::fprintf(stderr, "train: dataset %s is empty\n", dataset_file.c_str());
    return kExitRuntime;
  }
  GnnModel model = init_model.empty() ? GnnModel(cfg.gnn, seed)
                                      : load_model(init_model);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.lr = lr;
  tc.seed = seed;
  tc.val_split = val_split;
  const TrainReport report = train(model, ds.samples, tc);
  save_model(out_model, model);

  if (!curve_file.empty()) {
    CsvBuilder csv({"epoch", "train_mse", "val_mse"});
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
      csv.append_row({std::to_string(e), num(report.train_loss[e]),
                      num(report.val_loss[e])});
    }
    csv.save(curve_file);
  }
  std::printf("train: %zu samples, best epoch %d, val mse %.6g -> %s\n",
              ds.samples.size(), report.best_epoch, report.best_val_loss,
              out_model.c_str());
  return 0;
}

int cmd_mine(const CliConfig& cfg, const std::string& model_file,
             const std::string& pool_file, const std::string& out_ranking) {
  const GnnModel model = load_model(model_file);
  const std::vector<Scenario> pool = load_scenarios(pool_file);
  const auto ranked = mine(make_policy_controller_factory(model), pool, cfg.sim,
                           cfg.solver.kin, cfg.jobs);
  save_ranking(out_ranking, ranked, pool);
  const int with_events =
      static_cast<int>(std::count_if(ranked.begin(), ranked.end(),
                                     [](const auto& s) { return s.difficulty > 0; }));
  std::printf("mine: ranked %zu scenarios, %d with collisions -> %s\n",
              ranked.size(), with_events, out_ranking.c_str());
  return 0;
}

int cmd_select(const std::string& ranking_file, double fraction,
               const std::string& out) {
  const RankingManifest manifest = load_ranking(ranking_file);
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(manifest.entries.size())));
  std::vector<Scenario> selected;
  for (std::size_t i = 0; i < std::min(k, manifest.entries.size()); ++i) {
    selected.push_back(manifest.pool[manifest.entries[i].id]);
  }
  save_scenarios(out, selected, manifest.seed);
  std::printf("select: kept top %zu of %zu scenarios -> %s\n", selected.size(),
              manifest.entries.size(), out.c_str());
  return 0;
}

void write_eval_report(const std::string& report_file, const EvalReport& report) {
  CsvBuilder csv({"vehicles", "obstacles", "episodes", "success_to_goal",
                  "collision_rate"});
  csv.append_row({std::to_string(report.n_vehicles),
                  std::to_string(report.n_obstacles),
                  std::to_string(report.episodes),
                  num(report.success_to_goal),
                  num(report.collision_rate)});
  csv.save(report_file);

  CsvBuilder hist({"bin_lo", "bin_hi", "count", "density"});
  for (const HistogramBin& b : report.histogram.bins) {
    hist.append_row({num(b.lo), num(b.hi),
                     std::to_string(b.count), num(b.density)});
  }
  hist.save(report_file + ".hist.csv");

  std::vector<SvgBar> bars;
  for (const HistogramBin& b : report.histogram.bins) {
    bars.push_back({b.lo, b.hi, b.density});
  }
  write_file_atomic(report_file + ".hist.svg",
                    render_histogram(bars, "collision-rate density",
                                     "collision rate (1/m)", "density"));
}

int cmd_eval(const CliConfig& cfg, const std::string& model_file, int vehicles,
             int obstacles, int episodes, std::uint64_t seed,
             double half_extent, const std::string& report_file,
             const std::string& logs_file) {
  const GnnModel model = load_model(model_file);
  const std::vector<Scenario> scenarios =
      generate_pool(episodes, vehicles, obstacles, half_extent, seed);
  std::vector<TrajectoryLog> logs;
  EvalReport report =
      evaluate_batch(make_policy_controller_factory(model), scenarios, cfg.sim,
                     cfg.solver.kin, cfg.jobs, 20, &logs);
  report.n_vehicles = vehicles;
  report.n_obstacles = obstacles;
  write_eval_report(report_file, report);
  if (!logs_file.empty()) save_trajectory_logs(logs_file, logs);
  std::printf("eval: %d episodes of %dv/%do: success %.4f, collision rate %.6g\n",
              episodes, vehicles, obstacles, report.success_to_goal,
              report.collision_rate);
  return 0;
}

int cmd_bench_opt(const CliConfig& cfg, const std::string& model_file,
                  int vehicles, int obstacles, int repeats, std::uint64_t seed,
                  double half_extent, const std::string& report_file) {
  const GnnModel model = load_model(model_file);
  double time_shifted = 0.0, time_policy = 0.0;
  double iters_shifted = 0.0, iters_policy = 0.0;
  int steps_done = 0;

  for (int episode = 0; steps_done < repeats; ++episode) {
    Rng rng(mix_seed(seed, episode));
    const Scenario sc = generate_scenario(
        vehicles, obstacles, auto_bounds(vehicles, half_extent), rng);
    StateRow states = start_states(sc);
    ControlSeq previous;
    for (int t = 0; t < cfg.sim.max_steps && steps_done < repeats; ++t) {
      const WarmStart shifted = previous.empty()
                                    ? WarmStart::from_zeros()
                                    : WarmStart::from_previous(previous);
      const WarmStart policy = WarmStart::from_policy(predict_plan(
          model, sc, states, cfg.solver.horizon, cfg.solver.kin));
      const OptResult rs = optimize(sc, states, shifted, cfg.solver);
      const OptResult rp = optimize(sc, states, policy, cfg.solver);
      time_shifted += rs.wall_time;
      time_policy += rp.wall_time;
      iters_shifted += rs.iterations;
      iters_policy += rp.iterations;
      ++steps_done;
      // the baseline trajectory advances with the shifted-init solution
      previous = rs.controls;
      for (std::size_t i = 0; i < states.size(); ++i) {
        states[i] = step(states[i], rs.controls.front()[i], cfg.solver.kin);
      }
    }
  }

  const double ratio = time_policy > 0.0 ? time_shifted / time_policy : 0.0;
  CsvBuilder csv({"vehicles", "obstacles", "steps", "mean_time_shifted",
                  "mean_time_policy", "mean_iters_shifted", "mean_iters_policy",
                  "time_ratio_shifted_over_policy"});
  csv.append_row({std::to_string(vehicles), std::to_string(obstacles),
                  std::to_string(steps_done),
                  num(time_shifted / steps_done),
                  num(time_policy / steps_done),
                  num(iters_shifted / steps_done),
                  num(iters_policy / steps_done),
                  num(ratio)});
  csv.save(report_file);
  std::printf(
      "bench-opt: %d steps of %dv/%do: shifted %.4fs/step, policy %.4fs/step, "
      "ratio %.3f\n",
      steps_done, vehicles, obstacles, time_shifted / steps_done,
      time_policy / steps_done, ratio);
  return 0;
}

int cmd_noise_sweep(const CliConfig& cfg, const std::string& model_file,
                    const std::vector<double>& alphas, double beta, int episodes,
                    int vehicles, int obstacles, std::uint64_t seed,
                    double half_extent, const std::string& report_file) {
  const GnnModel model = load_model(model_file);
  const std::vector<Scenario> scenarios =
      generate_pool(episodes, vehicles, obstacles, half_extent, seed);
  const NoiseSweepResult sweep =
      noise_sweep(make_policy_controller_factory(model), scenarios, alphas, beta,
                  seed, cfg.sim, cfg.solver.kin, cfg.jobs);

  CsvBuilder csv({"alpha", "success_to_goal", "collision_rate",
                  "relative_success"});
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    csv.append_row({num(alphas[a]),
                    num(sweep.reports[a].success_to_goal),
                    num(sweep.reports[a].collision_rate),
                    num(sweep.relative_success[a])});
  }
  csv.save(report_file);

  SvgSeries abs_series{"success-to-goal", "#1f77b4", alphas, {}};
  SvgSeries rel_series{"relative to alpha=0", "#d62728", alphas, {}};
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    abs_series.y.push_back(sweep.reports[a].success_to_goal);
    rel_series.y.push_back(sweep.relative_success[a]);
  }
  write_file_atomic(report_file + ".svg",
                    render_line_chart({abs_series, rel_series},
                                      "steering-noise robustness", "alpha",
                                      "success-to-goal"));
  std::printf("noise-sweep: %zu alphas on %d episodes of %dv/%do -> %s\n",
              alphas.size(), episodes, vehicles, obstacles, report_file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-vehicle navigation lab"};
  app.set_config("--config", "", "config file with long-option defaults");
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  add_common_options(app, cfg);

  // gen
  int vehicles = 2, obstacles = 0, count = 10, episodes = 100, repeats = 100;
  int epochs = 100;
  double lr = 1e-3, val_split = 0.1, fraction = 0.1, half_extent = 0.0;
  double beta = 2.0;
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3};
  std::string out, scenarios_file, warm = "shifted", model_file, telemetry_file;
  std::string dataset_file, init_model, out_model, curve_file, pool_file;
  std::string ranking_file, report_file, logs_file;

  CLI::App* gen = app.add_subcommand("gen", "generate random scenarios");
  gen->add_option("--vehicles", vehicles)->required();
  gen->add_option("--obstacles", obstacles);
  gen->add_option("--count", count)->required();
  gen->add_option("--seed", seed);
  gen->add_option("--bounds", half_extent, "world half-extent, 0 = auto");
  gen->add_option("--out", out)->required();

  CLI::App* label = app.add_subcommand("label", "optimize ground-truth labels");
  label->add_option("--scenarios", scenarios_file)->required();
  label->add_option("--warm", warm)->check(CLI::IsMember({"shifted", "policy"}));
  label->add_option("--model", model_file);
  label->add_option("--seed", seed);
  label->add_option("--out", out)->required();
  label->add_option("--telemetry", telemetry_file);

  CLI::App* train_cmd = app.add_subcommand("train", "imitation-train the gnn");
  train_cmd->add_option("--dataset", dataset_file)->required();
  train_cmd->add_option("--init-model", init_model,
                        "continue from an existing model");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--val-split", val_split);
  train_cmd->add_option("--out-model", out_model)->required();
  train_cmd->add_option("--curve", curve_file, "loss curve csv");

  CLI::App* mine_cmd = app.add_subcommand("mine", "rank scenarios by difficulty");
  mine_cmd->add_option("--model", model_file)->required();
  mine_cmd->add_option("--pool", pool_file)->required();
  mine_cmd->add_option("--out-ranking", ranking_file)->required();

  CLI::App* select = app.add_subcommand("select", "take the hardest fraction");
  select->add_option("--ranking", ranking_file)->required();
  select->add_option("--fraction", fraction)->required();
  select->add_option("--out", out)->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "closed-loop policy metrics");
  eval_cmd->add_option("--model", model_file)->required();
  eval_cmd->add_option("--vehicles", vehicles)->required();
  eval_cmd->add_option("--obstacles", obstacles);
  eval_cmd->add_option("--episodes", episodes);
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--bounds", half_extent);
  eval_cmd->add_option("--report", report_file)->required();
  eval_cmd->add_option("--logs", logs_file, "save trajectory logs");

  CLI::App* bench = app.add_subcommand("bench-opt", "warm-start runtime benchmark");
  bench->add_option("--model", model_file)->required();
  bench->add_option("--vehicles", vehicles)->required();
  bench->add_option("--obstacles", obstacles);
  bench->add_option("--repeats", repeats, "matched optimization steps");
  bench->add_option("--seed", seed);
  bench->add_option("--bounds", half_extent);
  bench->add_option("--report", report_file)->required();

  CLI::App* sweep = app.add_subcommand("noise-sweep", "steering-noise robustness");
  sweep->add_option("--model", model_file)->required();
  sweep->add_option("--alphas", alphas)->delimiter(',');
  sweep->add_option("--beta", beta, "variance bias, degrees");
  sweep->add_option("--episodes", episodes);
  sweep->add_option("--vehicles", vehicles);
  sweep->add_option("--obstacles", obstacles);
  sweep->add_option("--seed", seed);
  sweep->add_option("--bounds", half_extent);
  sweep->add_option("--report", report_file)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen(cfg, vehicles, obstacles, count, seed, half_extent, out);
    }
    if (label->parsed()) {
      return cmd_label(cfg, scenarios_file, warm, model_file, out,
                       telemetry_file, seed);
    }
    if (train_cmd->parsed()) {
      return cmd_train(cfg, dataset_file, init_model, epochs, lr, seed,
                       val_split, out_model, curve_file);
    }
    if (mine_cmd->parsed()) {
      return cmd_mine(cfg, model_file, pool_file, ranking_file);
    }
    if (select->parsed()) {
      return cmd_select(ranking_file, fraction, out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(cfg, model_file, vehicles, obstacles, episodes, seed,
                      half_extent, report_file, logs_file);
    }
    if (bench->parsed()) {
      return cmd_bench_opt(cfg, model_file, vehicles, obstacles, repeats, seed,
                           half_extent, report_file);
    }
    if (sweep->parsed()) {
      return cmd_noise_sweep(cfg, model_file, alphas, beta, episodes, vehicles,
                             obstacles, seed, half_extent, report_file);
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const StorageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadFormat;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
