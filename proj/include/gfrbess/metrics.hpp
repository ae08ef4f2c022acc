#pragma once

// Post-processing of day logs: dispatch tracking statistics and the
// relative rate of change of frequency (rRoCoF).

#include "gfrbess/simulator.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gfrbess::metrics {

struct ErrorStats {
  double me = 0.0;    ///< mean error, kW
  double mae = 0.0;   ///< maximum absolute error, kW
  double rmse = 0.0;  ///< kW
};

ErrorStats error_stats(const Eigen::VectorXd& errors);

struct TrackingReport {
  ErrorStats no_dispatch;        ///< slot mean of L against the plan
  ErrorStats dispatch;           ///< slot mean of G against the plan
  ErrorStats dispatch_plus_fcr;  ///< slot mean of G against the plan shifted by the realised FCR flow
  Eigen::VectorXd slot_error_no_dispatch;
  Eigen::VectorXd slot_error_dispatch;
  Eigen::VectorXd slot_error_dispatch_plus_fcr;
};

/// Needs a complete day of 1-s records.
TrackingReport tracking_errors(const sim::SimulationLog& log, const Eigen::VectorXd& plan, double sigma_f,
                               double f_nom = 50.0);

struct RrocofSeries {
  std::vector<double> values;  ///< Hz/s per kW
  double dt = 1.0;
  int excluded = 0;  ///< samples with |dP| below the threshold
};

inline constexpr double kRrocofPowerThreshold = 1e-6;  // kW

/// |(f[t+1] - f[t]) / dt| / |p[t+1] - p[t]|.
RrocofSeries rrocof(const std::vector<double>& f_hz, const std::vector<double>& p_kw, double dt = 1.0);
RrocofSeries rrocof(const sim::Trace& f, const sim::Trace& p);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF, midpoint rule (i + 0.5) / n on sorted values.
std::vector<CdfPoint> cdf(const std::vector<double>& values);

/// Fraction of samples <= x.
double empirical_cdf_at(const std::vector<double>& sorted_values, double x);

std::string report_to_json(const TrackingReport& report);
std::string cdf_to_csv(const std::vector<CdfPoint>& points);

}  // namespace gfrbess::metrics
