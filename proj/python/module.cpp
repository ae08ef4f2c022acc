#include "gfrbess/battery_model.hpp"
#include "gfrbess/day_ahead.hpp"
#include "gfrbess/errors.hpp"
#include "gfrbess/intraday_mpc.hpp"
#include "gfrbess/metrics.hpp"
#include "gfrbess/pipeline.hpp"
#include "gfrbess/realtime.hpp"
#include "gfrbess/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace gfrbess;

namespace {

pybind11::array_t<double> column(const std::vector<sim::LogRecord>& records, double sim::LogRecord::*field) {
  py::array_t<double> out(static_cast<py::ssize_t>(records.size()));
  auto v = out.mutable_unchecked<1>();
  for (std::size_t k = 0; k < records.size(); ++k) v(k) = records[k].*field;
  return out;
}

std::vector<forecast::HistoricalDay> history_from(const pipeline::RunConfig& config, const std::string& csv) {
  return pipeline::load_history_csv(csv, config.forecast.holidays);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  // battery_model
  py::class_<battery::TtcParams>(m, "TtcParams")
      .def_static("synthetic_default", &battery::TtcParams::synthetic_default)
      .def_static("from_json", &battery::load_ttc_params);

  py::class_<battery::BatteryState>(m, "BatteryState")
      .def_static("at_rest", &battery::BatteryState::at_rest, py::arg("soc"), py::arg("params"),
                  py::arg("timestamp") = 0.0)
      .def_readwrite("soc", &battery::BatteryState::soc)
      .def_readwrite("x", &battery::BatteryState::x)
      .def_readwrite("v_dc", &battery::BatteryState::v_dc)
      .def_readwrite("timestamp", &battery::BatteryState::timestamp);

  py::class_<battery::BatteryLimits>(m, "BatteryLimits")
      .def(py::init<>())
      .def_readwrite("i_min", &battery::BatteryLimits::i_min)
      .def_readwrite("i_max", &battery::BatteryLimits::i_max)
      .def_readwrite("di_min", &battery::BatteryLimits::di_min)
      .def_readwrite("di_max", &battery::BatteryLimits::di_max)
      .def_readwrite("v_min", &battery::BatteryLimits::v_min)
      .def_readwrite("v_max", &battery::BatteryLimits::v_max)
      .def_readwrite("soc_min", &battery::BatteryLimits::soc_min)
      .def_readwrite("soc_max", &battery::BatteryLimits::soc_max)
      .def_readwrite("c_nom", &battery::BatteryLimits::c_nom)
      .def_readwrite("e_nom", &battery::BatteryLimits::e_nom)
      .def_readwrite("p_min", &battery::BatteryLimits::p_min)
      .def_readwrite("p_max", &battery::BatteryLimits::p_max)
      .def_readwrite("s_nom", &battery::BatteryLimits::s_nom)
      .def("validate", &battery::BatteryLimits::validate);

  m.def("ttc_step", &battery::ttc_step, py::arg("state"), py::arg("i_dc"), py::arg("dt_s"), py::arg("params"));
  m.def("soc_step", &battery::soc_step, py::arg("soc"), py::arg("current_a"), py::arg("dt_s"), py::arg("c_nom_ah"));

  // configuration and forecasting
  py::class_<pipeline::RunConfig>(m, "RunConfig")
      .def_readwrite("soc_0", &pipeline::RunConfig::soc_0)
      .def_readwrite("limits", &pipeline::RunConfig::limits)
      .def_readwrite("delta_f_max", &pipeline::RunConfig::delta_f_max)
      .def_readwrite("droop_lag_s", &pipeline::RunConfig::droop_lag_s)
      .def_readwrite("track_dispatch", &pipeline::RunConfig::track_dispatch)
      .def_readonly("history", &pipeline::RunConfig::history)
      .def_property_readonly("target_date",
                             [](const pipeline::RunConfig& c) { return pipeline::format_date(c.target_date); });
  m.def("parse_config", &pipeline::parse_run_config, py::arg("json_text"), py::arg("base_dir") = std::filesystem::path{});
  m.def("load_config", &pipeline::load_run_config, py::arg("path"));

  m.def(
      "history_csv",
      [](const pipeline::RunConfig& config, int days, std::uint64_t seed) {
        sim::SynthHistoryConfig hc;
        hc.days = days;
        hc.seed = seed;
        hc.plant = config.forecast.plant;
        hc.start = forecast::Date{std::chrono::sys_days{config.target_date} - std::chrono::days{days}};
        return pipeline::history_to_csv(sim::synth_history(hc));
      },
      py::arg("config"), py::arg("days") = 56, py::arg("seed") = 7,
      "Synthetic history CSV ending the day before the target date.");

  py::class_<pipeline::ForecastResult>(m, "ForecastResult")
      .def_property_readonly("l_up", [](const pipeline::ForecastResult& r) { return r.bounds.l_up; })
      .def_property_readonly("l_down", [](const pipeline::ForecastResult& r) { return r.bounds.l_down; })
      .def_property_readonly("wf_inc_up", [](const pipeline::ForecastResult& r) { return r.wf.inc_up; })
      .def_property_readonly("wf_inc_down", [](const pipeline::ForecastResult& r) { return r.wf.inc_down; })
      .def_readonly("scenarios", &pipeline::ForecastResult::scenarios)
      .def_readonly("history_days_used", &pipeline::ForecastResult::history_days_used)
      .def("bounds_csv", [](const pipeline::ForecastResult& r) { return pipeline::bounds_to_csv(r.bounds, r.wf); });

  m.def(
      "run_forecast",
      [](const pipeline::RunConfig& config, const std::string& history_csv, std::uint64_t seed) {
        const auto history = history_from(config, history_csv);
        const auto weather = pipeline::default_weather(history, config.target_date, config.forecast);
        return pipeline::run_forecast(history, config.target_date, weather, config.forecast, seed);
      },
      py::arg("config"), py::arg("history_csv"), py::arg("seed") = 7);

  m.def(
      "load_bounds_csv",
      [](const std::string& text) {
        forecast::ProsumptionBounds b;
        forecast::WfForecast wf;
        pipeline::load_bounds_csv(text, b, wf);
        return py::dict(py::arg("l_up") = b.l_up, py::arg("l_down") = b.l_down, py::arg("wf_inc_up") = wf.inc_up,
                        py::arg("wf_inc_down") = wf.inc_down);
      },
      py::arg("text"));

  // day_ahead
  py::class_<dayahead::DayAheadSolution>(m, "DayAheadSolution")
      .def_readonly("sigma_f", &dayahead::DayAheadSolution::sigma_f)
      .def_readonly("f_offset", &dayahead::DayAheadSolution::f_offset)
      .def_readonly("dispatch_plan", &dayahead::DayAheadSolution::dispatch_plan)
      .def_readonly("diagnostic", &dayahead::DayAheadSolution::diagnostic)
      .def_property_readonly("status", [](const dayahead::DayAheadSolution& s) { return dayahead::to_string(s.status); })
      .def("plan_csv", [](const dayahead::DayAheadSolution& s) { return pipeline::plan_to_csv(s); });

  m.def(
      "solve_day_ahead",
      [](const pipeline::RunConfig& config, const pipeline::ForecastResult& fc) {
        auto problem = dayahead::build_problem(fc.bounds, fc.wf, config.limits, config.soc_0, config.delta_f_max);
        problem.objective = config.objective;
        return dayahead::solve_day_ahead(problem);
      },
      py::arg("config"), py::arg("forecast"));

  // intraday_mpc
  py::class_<mpc::MpcResult>(m, "MpcResult")
      .def_readonly("i_traj", &mpc::MpcResult::i_traj)
      .def_readonly("v_traj", &mpc::MpcResult::v_traj)
      .def_readonly("p_setpoint", &mpc::MpcResult::p_setpoint)
      .def_readonly("e_k", &mpc::MpcResult::e_k)
      .def_property_readonly("status", [](const mpc::MpcResult& r) { return mpc::to_string(r.diagnostics.status); })
      .def_property_readonly("iterations", [](const mpc::MpcResult& r) { return r.diagnostics.iterations; });

  m.def(
      "solve_mpc",
      [](double e_k, const battery::BatteryState& state, const battery::BatteryLimits& limits,
         const battery::TtcParams& params, double i_prev, int horizon) {
        return mpc::solve_mpc(e_k, state, limits, params, i_prev, horizon);
      },
      py::arg("e_k"), py::arg("state"), py::arg("limits"), py::arg("params"), py::arg("i_prev"), py::arg("horizon"));

  // realtime
  py::class_<realtime::Region>(m, "Region")
      .def_static("disc_slab", &realtime::Region::disc_slab, py::arg("radius"), py::arg("p_lo"), py::arg("p_hi"),
                  py::arg("scale"))
      .def("margin", &realtime::Region::margin, py::arg("p"), py::arg("q"))
      .def("project", &realtime::Region::project, py::arg("p0"), py::arg("q0"), py::arg("lambda_p") = 1.0,
           py::arg("lambda_q") = 0.01);

  py::class_<realtime::CapabilityModel>(m, "CapabilityModel")
      .def(py::init<>())
      .def_readwrite("s_nom", &realtime::CapabilityModel::s_nom)
      .def_readwrite("i_ac_max", &realtime::CapabilityModel::i_ac_max)
      .def_readwrite("i_dc_max", &realtime::CapabilityModel::i_dc_max)
      .def_readwrite("eta", &realtime::CapabilityModel::eta)
      .def("region", &realtime::CapabilityModel::region, py::arg("v_dc"), py::arg("v_ac"), py::arg("soc"))
      .def("margin", &realtime::CapabilityModel::margin, py::arg("p"), py::arg("q"), py::arg("v_dc"),
           py::arg("v_ac"), py::arg("soc"));

  // simulator
  py::class_<sim::ScenarioSpec>(m, "ScenarioSpec")
      .def_readwrite("sigma_f", &sim::ScenarioSpec::sigma_f)
      .def_readwrite("droop_lag_s", &sim::ScenarioSpec::droop_lag_s)
      .def_readwrite("track_dispatch", &sim::ScenarioSpec::track_dispatch)
      .def_readonly("dispatch_plan", &sim::ScenarioSpec::dispatch_plan)
      .def_property(
          "frequency", [](const sim::ScenarioSpec& s) { return s.frequency.values; },
          [](sim::ScenarioSpec& s, std::vector<double> v) { s.frequency.values = std::move(v); })
      .def_property(
          "prosumption", [](const sim::ScenarioSpec& s) { return s.prosumption.values; },
          [](sim::ScenarioSpec& s, std::vector<double> v) { s.prosumption.values = std::move(v); });

  m.def(
      "make_scenario",
      [](const pipeline::RunConfig& config, const pipeline::ForecastResult& fc,
         const dayahead::DayAheadSolution& solution, std::uint64_t seed) {
        return pipeline::make_scenario(config, fc.bounds, solution.dispatch_plan, solution.sigma_f, seed);
      },
      py::arg("config"), py::arg("forecast"), py::arg("solution"), py::arg("seed") = 7);

  py::class_<sim::SimulationLog>(m, "SimulationLog")
      .def_readonly("sigma_f", &sim::SimulationLog::sigma_f)
      .def("__len__", [](const sim::SimulationLog& l) { return l.records.size(); })
      .def_property_readonly("f_hz", [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::f_hz); })
      .def_property_readonly("l_kw", [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::l_kw); })
      .def_property_readonly("p_bess_kw",
                             [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::p_bess_kw); })
      .def_property_readonly("g_pcc_kw",
                             [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::g_pcc_kw); })
      .def_property_readonly("soc", [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::soc); })
      .def_property_readonly("v_dc", [](const sim::SimulationLog& l) { return column(l.records, &sim::LogRecord::v_dc); })
      .def_property_readonly("mpc_events", [](const sim::SimulationLog& l) { return l.mpc_events.size(); })
      .def("csv", &sim::log_to_csv);

  m.def("run_day", &sim::run_day, py::arg("spec"), py::call_guard<py::gil_scoped_release>());
  m.def("sha256_hex", &sim::sha256_hex, py::arg("data"));

  // metrics
  py::class_<metrics::ErrorStats>(m, "ErrorStats")
      .def_readonly("me", &metrics::ErrorStats::me)
      .def_readonly("mae", &metrics::ErrorStats::mae)
      .def_readonly("rmse", &metrics::ErrorStats::rmse)
      .def("__repr__", [](const metrics::ErrorStats& s) {
        return "ErrorStats(me=" + std::to_string(s.me) + ", mae=" + std::to_string(s.mae) +
               ", rmse=" + std::to_string(s.rmse) + ")";
      });

  py::class_<metrics::TrackingReport>(m, "TrackingReport")
      .def_readonly("no_dispatch", &metrics::TrackingReport::no_dispatch)
      .def_readonly("dispatch", &metrics::TrackingReport::dispatch)
      .def_readonly("dispatch_plus_fcr", &metrics::TrackingReport::dispatch_plus_fcr)
      .def("json", &metrics::report_to_json);

  m.def("error_stats", &metrics::error_stats, py::arg("errors"));
  m.def(
      "tracking_errors",
      [](const sim::SimulationLog& log, const Eigen::VectorXd& plan, double sigma_f) {
        return metrics::tracking_errors(log, plan, sigma_f);
      },
      py::arg("log"), py::arg("plan"), py::arg("sigma_f"));
  m.def(
      "rrocof",
      [](const std::vector<double>& f, const std::vector<double>& p, double dt) {
        return metrics::rrocof(f, p, dt).values;
      },
      py::arg("f_hz"), py::arg("p_kw"), py::arg("dt") = 1.0);
  m.def(
      "cdf",
      [](const std::vector<double>& values) {
        std::vector<std::pair<double, double>> out;
        for (const auto& c : metrics::cdf(values)) out.emplace_back(c.value, c.fraction);
        return out;
      },
      py::arg("values"));
}
