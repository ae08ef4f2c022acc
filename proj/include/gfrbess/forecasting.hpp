#pragma once

// Day-ahead forecasts of feeder prosumption envelopes and of the
// frequency-deviation energy W_f.

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace gfrbess::forecast {

inline constexpr int kSlots = 288;  // 5-minute slots per day

using Date = std::chrono::year_month_day;

enum class DayCategory { A, B, C, D1, D2 };

std::string to_string(DayCategory c);
DayCategory category_from_string(const std::string& s);

struct HistoricalDay {
  Date date;
  Eigen::VectorXd g;    ///< PCC power, kW
  Eigen::VectorXd p;    ///< BESS power, kW
  Eigen::VectorXd ghi;  ///< W/m^2
  Eigen::VectorXd temp; ///< air temperature, degC
  Eigen::VectorXd wf;   ///< per-slot frequency-deviation energy, Hz*s (empty if unknown)
  DayCategory category = DayCategory::B;
};

/// Exponentially weighted first and second moments of one day category.
struct CategoryStats {
  Eigen::VectorXd mu;     ///< kW
  Eigen::MatrixXd sigma;  ///< kW^2, jittered
  int n_days = 0;
  double lambda_forget = 0.98;

  // Running weighted sums; a day seen m updates ago carries weight lambda^m.
  double weight_sum = 0.0;
  double weight_sq_sum = 0.0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer_sum;

  static CategoryStats empty(double lambda_forget = 0.98, int slots = kSlots);
};

struct ProsumptionBounds {
  Eigen::VectorXd l_up;
  Eigen::VectorXd l_down;

  void validate(int slots = kSlots) const;
};

struct PvPlant {
  double capacity_kwp = 105.0;
  double tilt_deg = 10.0;
  double azimuth_deg = 180.0;  ///< 180 = facing south
  double gamma_temp = -0.004;  ///< 1/degC
  double k_noct = 0.025;       ///< degC m^2/W
  double latitude_deg = 46.52;
  double longitude_deg = 6.57;
  double utc_offset_h = 1.0;
  double diffuse_fraction = 0.3;

  void validate() const;
};

struct WfForecast {
  Eigen::VectorXd w_up;        ///< cumulative at the start of each slot, Hz*s
  Eigen::VectorXd w_down;
  Eigen::VectorXd w_point;
  Eigen::VectorXd inc_up;      ///< per-slot increment bounds
  Eigen::VectorXd inc_down;
  Eigen::VectorXd inc_point;
  int ar_order = 4;
  Eigen::VectorXd coefficients;  ///< intercept followed by lag-1..lag-p weights
  double residual_lo = 0.0;
  double residual_hi = 0.0;

  /// Cumulative bound at the end of slot n.
  double up_end(int n) const { return w_up(n) + inc_up(n); }
  double down_end(int n) const { return w_down(n) + inc_down(n); }

  /// All-zero forecast (no frequency energy expected).
  static WfForecast zero(int slots = kSlots);
};

Eigen::VectorXd disaggregate(const HistoricalDay& day, const Eigen::VectorXd& pv_est);

/// A = Monday or day after a holiday; B = Tue/Wed/Thu; C = Friday or day
/// before a holiday; D1 = Saturday; D2 = Sunday or holiday.
/// Precedence D2 > D1 > A > C > B.
DayCategory classify_day(Date date, const std::set<Date>& holidays);

CategoryStats update_stats(const CategoryStats& stats, const Eigen::VectorXd& day_consumption);

/// Diagonal jitter added to a covariance of `slots` coordinates.
double covariance_jitter(const Eigen::MatrixXd& cov);

std::vector<Eigen::VectorXd> sample_scenarios(const CategoryStats& stats, int count, std::uint64_t seed);

struct Envelope {
  Eigen::VectorXd c_down;
  Eigen::VectorXd c_up;
};

/// Pointwise minimum and maximum over the scenarios.
Envelope envelope(const std::vector<Eigen::VectorXd>& scenarios);

int day_of_year(Date date);

/// Cosine of the solar zenith angle at local clock time.
double solar_cos_zenith(int day_of_year, double clock_hour, const PvPlant& plant);

/// Plane-of-array irradiance for a GHI sample at local clock time.
double plane_of_array(double ghi, int day_of_year, double clock_hour, const PvPlant& plant);

/// PV output in kW from plane-of-array irradiance and cell temperature.
double pv_power_from_poa(double poa, double t_cell, const PvPlant& plant);

struct PvBounds {
  Eigen::VectorXd pv_up;
  Eigen::VectorXd pv_down;
};

PvBounds pv_bounds(const Eigen::VectorXd& ghi_up, const Eigen::VectorXd& ghi_down, const PvPlant& plant,
                   const Eigen::VectorXd& air_temp, Date date);

/// PV estimate of a recorded day from measured GHI.
Eigen::VectorXd pv_estimate(const Eigen::VectorXd& ghi, const Eigen::VectorXd& air_temp, const PvPlant& plant, Date date);

ProsumptionBounds prosumption_bounds(const Eigen::VectorXd& c_up, const Eigen::VectorXd& c_down,
                                     const Eigen::VectorXd& pv_up, const Eigen::VectorXd& pv_down);

/// Least-squares AR(p) on the concatenated per-slot W_f increments; bounds
/// from the 2.5 % / 97.5 % one-step residual quantiles.
WfForecast fit_wf_ar(const std::vector<Eigen::VectorXd>& history, int order = 4);

}  // namespace gfrbess::forecast
