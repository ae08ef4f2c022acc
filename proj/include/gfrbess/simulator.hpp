#pragma once

// Closed-loop day simulation at 1 s: real-time references every second,
// MPC set-points every 10 s, battery integrated through the TTC model.

#include "gfrbess/battery_model.hpp"
#include "gfrbess/forecasting.hpp"
#include "gfrbess/intraday_mpc.hpp"
#include "gfrbess/realtime.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gfrbess::sim {

inline constexpr int kSecondsPerDay = 86400;

enum class Unit { kW, Hz, V, degC };

std::string to_string(Unit u);

struct Trace {
  double dt = 1.0;  ///< s
  Unit unit = Unit::kW;
  std::vector<double> values;

  /// Uniform day-long trace of the expected unit.
  void validate(Unit expected, double duration_s = kSecondsPerDay) const;
};

/// Ornstein-Uhlenbeck frequency around 50 Hz with stationary standard
/// deviation `sigma_hz`, sampled at 1 s and clipped to [49.8, 50.2].
Trace synth_frequency(std::uint64_t seed, double sigma_hz, double theta = 1.0 / 60.0);

/// 1-s prosumption whose 5-minute averages sit inside the bounds. Slot
/// means wander between the bounds with `roughness` in [0, 1]; in-slot
/// noise has zero slot mean. `spikes` adds short inrush-like bursts.
Trace synth_prosumption(const forecast::ProsumptionBounds& bounds, std::uint64_t seed, double roughness,
                        bool spikes = false);

/// CSV with header `t_s,value`.
Trace load_trace_csv(std::string_view text, Unit unit);
std::string trace_to_csv(const Trace& trace);

struct SynthHistoryConfig {
  int days = 56;
  forecast::Date start{std::chrono::year{2024}, std::chrono::month{3}, std::chrono::day{4}};
  std::uint64_t seed = 1;
  double base_load_kw = 140.0;
  double load_noise_kw = 1.0;  ///< day-to-day standard deviation of the load shape
  double cloudiness = 0.03;    ///< relative GHI variation around clear sky
  double freq_sigma_hz = 0.02;
  forecast::PvPlant plant;
};

/// Synthetic 5-minute feeder history with the BESS idle.
std::vector<forecast::HistoricalDay> synth_history(const SynthHistoryConfig& config);

/// Clear-sky GHI profile (W/m^2) of one day, 288 slot averages.
Eigen::VectorXd clear_sky_ghi(forecast::Date date, const forecast::PvPlant& plant);

/// Frequency-deviation energy per 5-minute slot, integral of (f - f_nom), Hz*s.
Eigen::VectorXd wf_per_slot(const Trace& frequency, double f_nom = 50.0);

enum Flag : unsigned {
  kFlagProtection = 1u,      ///< limit breach: zero power applied
  kFlagSaturated = 2u,       ///< droop response cut by the capability region
  kFlagMpcFallback = 4u,     ///< MPC infeasible, zero current set-point
  kFlagMpcConstrained = 8u,  ///< energy target out of reach
  kFlagMpcNotConverged = 16u,
  kFlagProjected = 32u,      ///< set-point clipped by the real-time projection
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  Trace prosumption;  ///< kW, 1 s
  Trace frequency;    ///< Hz, 1 s
  Trace v_mv;         ///< V; empty means nominal v_nom * turns_ratio
  Eigen::VectorXd dispatch_plan;  ///< kW, 288 slots
  double sigma_f = 0.0;           ///< kW/Hz
  double soc_0 = 0.5;
  battery::TtcParams params = battery::TtcParams::synthetic_default();
  battery::BatteryLimits limits;
  realtime::ConverterConfig converter;  ///< sigma_f is overwritten by `sigma_f`
  realtime::CapabilityModel capability;
  mpc::MpcOptions mpc;
  bool track_dispatch = true;  ///< false leaves P_set at zero all day
  double droop_lag_s = 0.0;    ///< > 0 emulates a grid-following first-order lag

  void validate() const;
};

struct LogRecord {
  int t = 0;
  double l_kw = 0.0;
  double p_bess_kw = 0.0;
  double g_pcc_kw = 0.0;
  double f_hz = 50.0;
  double f_ref_hz = 50.0;
  double v_ref_v = 0.0;
  double soc = 0.0;
  double v_dc = 0.0;
  double e_k_active = 0.0;  ///< kWh, last MPC energy target
  unsigned flags = 0;
  double p_set_kw = 0.0;    ///< MPC set-point before projection
  double p_dc_kw = 0.0;
  double i_dc_a = 0.0;
};

struct MpcEvent {
  int k = 0;
  double e_k_kwh = 0.0;
  double p_setpoint_kw = 0.0;
  mpc::MpcStatus status = mpc::MpcStatus::Optimal;
  int iterations = 0;
};

struct SimulationLog {
  double sigma_f = 0.0;
  std::vector<LogRecord> records;
  std::vector<MpcEvent> mpc_events;
};

SimulationLog run_day(const ScenarioSpec& spec);

std::string log_to_csv(const SimulationLog& log);
/// Parses the CSV written by `log_to_csv`; MPC events are not stored there.
SimulationLog log_from_csv(std::string_view text, double sigma_f);
/// JSON-lines diagnostics {k, e_k_kwh, p_setpoint_kw, status, iterations}.
std::string mpc_events_jsonl(const SimulationLog& log);

struct EnergyAudit {
  double dc_energy_kwh = 0.0;   ///< sum of logged DC power * dt
  double vi_energy_kwh = 0.0;   ///< sum of v_dc * i * dt
  double throughput_kwh = 0.0;  ///< sum of |DC power| * dt
  double charge_ah = 0.0;       ///< sum of i * dt
  double soc_charge_ah = 0.0;   ///< c_nom * (soc_end - soc_start)
  double relative_error = 0.0;  ///< |dc - vi| / throughput
};

EnergyAudit energy_audit(const SimulationLog& log, double soc_0, double c_nom_ah);

std::string sha256_hex(std::string_view data);

}  // namespace gfrbess::sim
