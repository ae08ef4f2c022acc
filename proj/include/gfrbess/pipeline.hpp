#pragma once

// File formats and stage glue shared by the command-line tool, the Python
// bindings and the acceptance runs.

#include "gfrbess/battery_model.hpp"
#include "gfrbess/day_ahead.hpp"
#include "gfrbess/forecasting.hpp"
#include "gfrbess/realtime.hpp"
#include "gfrbess/simulator.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gfrbess::pipeline {

// History CSV: timestamp,g_kw,p_kw,ghi_wm2,temp_c[,wf_hzs], one row per
// 5-minute slot, timestamps "YYYY-MM-DDTHH:MM" at slot start, whole days.
std::vector<forecast::HistoricalDay> load_history_csv(std::string_view text, const std::set<forecast::Date>& holidays);
std::string history_to_csv(const std::vector<forecast::HistoricalDay>& days);

forecast::Date parse_date(std::string_view text);
std::string format_date(forecast::Date date);

struct ForecastOptions {
  forecast::PvPlant plant;
  int scenarios = 10;  ///< S
  double lambda_forget = 0.98;
  int ar_order = 4;
  double ghi_band = 0.05;  ///< relative half-width of the GHI forecast band
  std::set<forecast::Date> holidays;
};

struct WeatherForecast {
  Eigen::VectorXd ghi_up;
  Eigen::VectorXd ghi_down;
  Eigen::VectorXd temp;
};

/// Clear-sky GHI band and the most recent temperature profile.
WeatherForecast default_weather(const std::vector<forecast::HistoricalDay>& history, forecast::Date target,
                                const ForecastOptions& options);

struct ForecastResult {
  forecast::Date target;
  forecast::DayCategory category = forecast::DayCategory::B;
  int history_days_used = 0;
  forecast::CategoryStats stats;
  std::vector<Eigen::VectorXd> scenarios;
  forecast::Envelope consumption;
  forecast::PvBounds pv;
  forecast::ProsumptionBounds bounds;
  forecast::WfForecast wf;
};

/// Consumption statistics from same-category days, scenario envelope, PV
/// bounds and the W_f autoregression.
ForecastResult run_forecast(const std::vector<forecast::HistoricalDay>& history, forecast::Date target,
                            const WeatherForecast& weather, const ForecastOptions& options, std::uint64_t seed);

// bounds.csv: slot,l_up,l_down,w_up,w_down (W_f cumulative at slot start, Hz*s)
std::string bounds_to_csv(const forecast::ProsumptionBounds& bounds, const forecast::WfForecast& wf);
void load_bounds_csv(std::string_view text, forecast::ProsumptionBounds& bounds, forecast::WfForecast& wf);

std::string scenarios_to_csv(const std::vector<Eigen::VectorXd>& scenarios);

// plan.csv: slot,g_hat_kw,f_offset_kw
std::string plan_to_csv(const dayahead::DayAheadSolution& solution);
/// Returns the dispatch plan column.
Eigen::VectorXd load_plan_csv(std::string_view text);

/// Everything a run needs besides data files.
struct RunConfig {
  std::filesystem::path base_dir;  ///< relative paths resolve against this
  std::filesystem::path history;
  forecast::Date target_date{std::chrono::year{2024}, std::chrono::month{4}, std::chrono::day{30}};
  ForecastOptions forecast;
  battery::TtcParams ttc = battery::TtcParams::synthetic_default();
  battery::BatteryLimits limits;
  double soc_0 = 0.5;
  realtime::ConverterConfig converter;
  std::vector<realtime::PolygonOverride> polygons;
  double delta_f_max = 0.2;
  dayahead::Objective objective = dayahead::Objective::MaximizeDroop;
  // Simulation inputs: empty path selects the synthetic generator.
  std::filesystem::path prosumption_trace;
  std::filesystem::path frequency_trace;
  double roughness = 0.3;
  bool spikes = false;
  double freq_sigma_hz = 0.02;
  double freq_theta = 1.0 / 60.0;
  double droop_lag_s = 0.0;
  bool track_dispatch = true;
  std::string raw_json;  ///< verbatim config text, hashed into manifests
};

/// Parses the JSON schema documented in docs/config.md.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

realtime::CapabilityModel capability_for(const RunConfig& config);

/// Scenario for `run_day` with traces read from disk or synthesised from
/// the seed.
sim::ScenarioSpec make_scenario(const RunConfig& config, const forecast::ProsumptionBounds& bounds,
                                const Eigen::VectorXd& plan, double sigma_f, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace gfrbess::pipeline
