#include "commands.hpp"

#include "gfrbess/day_ahead.hpp"
#include "gfrbess/errors.hpp"
#include "gfrbess/metrics.hpp"
#include "gfrbess/pipeline.hpp"
#include "gfrbess/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <ostream>

namespace gfrbess::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kBounds = "bounds.csv";
constexpr const char* kScenarios = "scenarios.csv";
constexpr const char* kForecastJson = "forecast.json";
constexpr const char* kPlan = "plan.csv";
constexpr const char* kSchedule = "schedule.json";
constexpr const char* kLog = "log.csv";
constexpr const char* kMpcLog = "mpc.jsonl";
constexpr const char* kManifest = "manifest.json";
constexpr const char* kReport = "report.json";
constexpr const char* kCdf = "rrocof_cdf.csv";
constexpr int kSchemaVersion = 1;  // bump with any change to the files in docs/file-formats.md

// Runs `body`, mapping library exceptions onto exit codes. Input problems
// keep code 2 except where the stage owns its own failure class.
template <typename F>
int guarded(std::ostream& err, const char* stage, int stage_code, F&& body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    err << stage << ": " << e.what() << "\n";
    return stage_code;
  } catch (const InfeasibleOperatingPoint& e) {
    err << stage << ": " << e.what() << "\n";
    return stage_code;
  } catch (const NumericFailure& e) {
    err << stage << ": numeric failure: " << e.what() << "\n";
    return stage_code;
  } catch (const InvariantViolation& e) {
    err << stage << ": internal invariant violated: " << e.what() << "\n";
    return kUnexpected;
  } catch (const std::exception& e) {
    err << stage << ": " << e.what() << "\n";
    return kUnexpected;
  }
}

pipeline::RunConfig config_of(const CommandOptions& o) {
  if (o.config.empty()) throw InvalidArgument("--config is required");
  return pipeline::load_run_config(o.config);
}

double sigma_from_schedule(const fs::path& out) {
  const auto j = nlohmann::json::parse(pipeline::read_file(out / kSchedule));
  return j.at("sigma_f_kw_per_hz").get<double>();
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

int cmd_synth_history(const CommandOptions& o, std::ostream& err) {
  return guarded(err, "synth-history", kInputError, [&] {
    sim::SynthHistoryConfig hc;
    hc.seed = o.seed;
    hc.days = o.days;
    if (!o.config.empty()) {
      const auto cfg = config_of(o);
      hc.plant = cfg.forecast.plant;
      hc.freq_sigma_hz = cfg.freq_sigma_hz;
      // History ends the day before the target.
      hc.start = forecast::Date{std::chrono::sys_days{cfg.target_date} - std::chrono::days{o.days}};
    }
    pipeline::write_file(o.out / "history.csv", pipeline::history_to_csv(sim::synth_history(hc)));
    return int{kOk};
  });
}

int cmd_forecast(const CommandOptions& o, std::ostream& err) {
  return guarded(err, "forecast", kInputError, [&] {
    const auto cfg = config_of(o);
    if (cfg.history.empty()) throw InvalidArgument("config: 'history' is required for the forecast stage");
    const auto history = pipeline::load_history_csv(pipeline::read_file(cfg.history), cfg.forecast.holidays);
    const auto weather = pipeline::default_weather(history, cfg.target_date, cfg.forecast);
    const auto r = pipeline::run_forecast(history, cfg.target_date, weather, cfg.forecast, o.seed);
    pipeline::write_file(o.out / kBounds, pipeline::bounds_to_csv(r.bounds, r.wf));
    pipeline::write_file(o.out / kScenarios, pipeline::scenarios_to_csv(r.scenarios));
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["target_date"] = pipeline::format_date(r.target);
    j["category"] = forecast::to_string(r.category);
    j["history_days_used"] = r.history_days_used;
    j["scenarios"] = static_cast<int>(r.scenarios.size());
    j["seed"] = o.seed;
    j["wf_ar_coefficients"] = std::vector<double>(r.wf.coefficients.data(), r.wf.coefficients.data() + r.wf.coefficients.size());
    pipeline::write_file(o.out / kForecastJson, json_text(j));
    return int{kOk};
  });
}

int cmd_schedule(const CommandOptions& o, std::ostream& err) {
  return guarded(err, "schedule", kInputError, [&] {
    const auto cfg = config_of(o);
    forecast::ProsumptionBounds bounds;
    forecast::WfForecast wf;
    pipeline::load_bounds_csv(pipeline::read_file(o.out / kBounds), bounds, wf);
    // Initial SOE outside the window is an infeasible schedule, not bad input.
    dayahead::DayAheadProblem problem = dayahead::build_problem(bounds, wf, cfg.limits, cfg.soc_0, cfg.delta_f_max);
    problem.objective = cfg.objective;
    const auto sol = dayahead::solve_day_ahead(problem);
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["status"] = dayahead::to_string(sol.status);
    j["sigma_f_kw_per_hz"] = sol.sigma_f;
    j["soe_0"] = cfg.soc_0;
    j["delta_f_max_hz"] = cfg.delta_f_max;
    if (sol.status != dayahead::SolveStatus::Optimal) {
      j["diagnostic"] = sol.diagnostic;
      pipeline::write_file(o.out / kSchedule, json_text(j));
      err << "schedule: infeasible: " << sol.diagnostic << "\n";
      return int{kInfeasible};
    }
    pipeline::write_file(o.out / kPlan, pipeline::plan_to_csv(sol));
    pipeline::write_file(o.out / kSchedule, json_text(j));
    return int{kOk};
  });
}

int cmd_simulate(const CommandOptions& o, std::ostream& err) {
  return guarded(err, "simulate", kSimulationError, [&] {
    auto cfg = config_of(o);
    if (o.droop_lag_s) cfg.droop_lag_s = *o.droop_lag_s;
    if (o.track_dispatch) cfg.track_dispatch = *o.track_dispatch;
    const std::string plan_text = pipeline::read_file(o.out / kPlan);
    const std::string schedule_text = pipeline::read_file(o.out / kSchedule);
    const std::string bounds_text = pipeline::read_file(o.out / kBounds);
    forecast::ProsumptionBounds bounds;
    forecast::WfForecast wf;
    pipeline::load_bounds_csv(bounds_text, bounds, wf);
    const Eigen::VectorXd plan = pipeline::load_plan_csv(plan_text);
    const double sigma = sigma_from_schedule(o.out);

    const sim::ScenarioSpec spec = pipeline::make_scenario(cfg, bounds, plan, sigma, o.seed);
    const sim::SimulationLog log = sim::run_day(spec);
    const std::string log_csv = sim::log_to_csv(log);
    const std::string mpc_lines = sim::mpc_events_jsonl(log);
    pipeline::write_file(o.out / kLog, log_csv);
    pipeline::write_file(o.out / kMpcLog, mpc_lines);

    unsigned any = 0;
    int protection = 0;
    for (const auto& r : log.records) {
      any |= r.flags;
      protection += (r.flags & sim::kFlagProtection) != 0;
    }
    ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["seed"] = o.seed;
    m["sigma_f_kw_per_hz"] = sigma;
    m["droop_lag_s"] = cfg.droop_lag_s;
    m["track_dispatch"] = cfg.track_dispatch;
    m["config_sha256"] = sim::sha256_hex(cfg.raw_json);
    m["inputs"] = {{kPlan, sim::sha256_hex(plan_text)},
                   {kSchedule, sim::sha256_hex(schedule_text)},
                   {kBounds, sim::sha256_hex(bounds_text)}};
    m["outputs"] = {{kLog, sim::sha256_hex(log_csv)}, {kMpcLog, sim::sha256_hex(mpc_lines)}};
    m["protection_seconds"] = protection;
    m["flags_seen"] = any;
    pipeline::write_file(o.out / kManifest, json_text(m));
    return int{kOk};
  });
}

int cmd_evaluate(const CommandOptions& o, std::ostream& err) {
  return guarded(err, "evaluate", kEvaluationError, [&] {
    const double sigma = sigma_from_schedule(o.out);
    const Eigen::VectorXd plan = pipeline::load_plan_csv(pipeline::read_file(o.out / kPlan));
    const sim::SimulationLog log = sim::log_from_csv(pipeline::read_file(o.out / kLog), sigma);
    const metrics::TrackingReport report = metrics::tracking_errors(log, plan, sigma);

    std::vector<double> f, p;
    f.reserve(log.records.size());
    p.reserve(log.records.size());
    for (const auto& r : log.records) {
      f.push_back(r.f_hz);
      p.push_back(r.p_bess_kw);
    }
    const metrics::RrocofSeries rr = metrics::rrocof(f, p, 1.0);
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j.update(ordered_json::parse(metrics::report_to_json(report)));
    j["rrocof_samples"] = rr.values.size();
    j["rrocof_excluded"] = rr.excluded;
    pipeline::write_file(o.out / kReport, json_text(j));
    pipeline::write_file(o.out / kCdf, rr.values.empty() ? std::string("rrocof_hz_per_s_per_kw,fraction\n")
                                                         : metrics::cdf_to_csv(metrics::cdf(rr.values)));
    return int{kOk};
  });
}

int cmd_run(const CommandOptions& o, std::ostream& err) {
  for (auto* stage : {&cmd_forecast, &cmd_schedule, &cmd_simulate, &cmd_evaluate})
    if (const int rc = stage(o, err); rc != kOk) return rc;
  return kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid-forming BESS dispatch pipeline: forecast -> schedule -> simulate -> evaluate"};
  app.footer(
      "Exit codes: 0 ok, 1 unexpected error, 2 invalid input, 3 infeasible schedule, 4 simulation failure, "
      "5 evaluation failure.");
  app.require_subcommand(1);
  CommandOptions o;
  std::string config, outdir = ".";
  double lag = -1.0;
  bool no_dispatch = false;

  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config, "Run configuration (JSON, see docs/config.md)");
    if (needs_config) c->required();
    sub->add_option("--seed", o.seed, "Random seed (u64)");
    sub->add_option("--out", outdir, "Directory for stage inputs and outputs");
  };
  auto* synth = app.add_subcommand("synth-history", "Write a synthetic 5-minute feeder history");
  common(synth, false);
  synth->add_option("--days", o.days, "Number of days")->check(CLI::Range(1, 3650));
  auto* fc = app.add_subcommand("forecast", "Prosumption and W_f bounds for the target day");
  common(fc, true);
  auto* sc = app.add_subcommand("schedule", "Robust day-ahead dispatch plan and droop");
  common(sc, true);
  auto* si = app.add_subcommand("simulate", "Closed-loop day simulation");
  common(si, true);
  si->add_option("--droop-lag", lag, "First-order lag of the droop response in s (grid-following baseline)");
  si->add_flag("--no-dispatch", no_dispatch, "Keep the power set-point at zero");
  auto* ev = app.add_subcommand("evaluate", "Tracking statistics and rRoCoF CDF");
  common(ev, false);
  auto* run = app.add_subcommand("run", "All stages in sequence");
  common(run, true);
  run->add_option("--droop-lag", lag, "First-order lag of the droop response in s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }
  o.config = config;
  o.out = outdir;
  if (lag >= 0) o.droop_lag_s = lag;
  if (no_dispatch) o.track_dispatch = false;

  if (synth->parsed()) return cmd_synth_history(o, err);
  if (fc->parsed()) return cmd_forecast(o, err);
  if (sc->parsed()) return cmd_schedule(o, err);
  if (si->parsed()) return cmd_simulate(o, err);
  if (ev->parsed()) return cmd_evaluate(o, err);
  return cmd_run(o, err);
}

}  // namespace gfrbess::cli
