#pragma once

// One-second controller: estimate converter voltages, project the requested
// (P, Q) onto the capability region and emit grid-forming references.
//
// P and Q follow the charging-positive convention of the rest of the
// library, so the droop law reads p = sigma_f * (f_grid - f_ref).

#include "gfrbess/battery_model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gfrbess::realtime {

struct ConverterConfig {
  double sigma_f = 100.0;  ///< kW/Hz
  double sigma_v = 18.0;   ///< kvar/V
  double f_nom = 50.0;     ///< Hz
  double v_nom = 400.0;    ///< V, phase-to-phase on the converter side
  double eta = 0.97;
  double lambda_p = 1.0;
  double lambda_q = 0.01;
  double x_t = 0.0133;        ///< ohm, secondary side
  double turns_ratio = 50.0;  ///< MV:LV

  void validate() const;

  /// sigma_v set so that s_nom of reactive power spans 10 % of v_nom.
  static ConverterConfig with_rating(double s_nom_kva, double sigma_f_kw_per_hz);
};

/// Convex polygon replacing the default region inside one operating bin.
struct PolygonOverride {
  double v_dc_lo = 0.0, v_dc_hi = 0.0;
  double v_ac_lo = 0.0, v_ac_hi = 0.0;
  double soc_lo = 0.0, soc_hi = 1.0;
  std::vector<Eigen::Vector2d> vertices;  ///< counterclockwise, (p, q)

  bool covers(double v_dc, double v_ac, double soc) const;
  /// Counterclockwise, strictly convex, origin inside.
  void validate() const;
};

/// Feasible (p, q) set for fixed voltages and SOC.
class Region {
 public:
  /// Disc of `radius` cut by the slab p_lo <= p <= p_hi.
  static Region disc_slab(double radius, double p_lo, double p_hi, double scale);
  static Region polygon(std::vector<Eigen::Vector2d> vertices, double scale);

  /// Largest violation normalised by `scale`; <= 0 inside.
  double margin(double p, double q) const;

  /// argmin lambda_p (p - p0)^2 + lambda_q (q - q0)^2 over the region.
  Eigen::Vector2d project(double p0, double q0, double lambda_p, double lambda_q) const;

  bool is_polygon() const { return !vertices_.empty(); }
  double radius() const { return radius_; }
  double p_lo() const { return p_lo_; }
  double p_hi() const { return p_hi_; }

 private:
  double radius_ = 0.0, p_lo_ = 0.0, p_hi_ = 0.0, scale_ = 1.0;
  std::vector<Eigen::Vector2d> vertices_;
};

struct CapabilityModel {
  double s_nom = 720.0;      ///< kVA
  double i_ac_max = 1100.0;  ///< A rms per phase
  double i_dc_max = 1200.0;  ///< A, sets p_dc_max(v_dc) = i_dc_max * v_dc / 1000
  double eta = 0.97;
  std::vector<PolygonOverride> polygons;

  double p_dc_max(double v_dc) const;
  /// min(s_nom, sqrt(3) v_ac i_ac_max / 1000).
  double apparent_limit(double v_ac) const;

  Region region(double v_dc, double v_ac, double soc) const;
  double margin(double p, double q, double v_dc, double v_ac, double soc) const;

  void validate() const;
  static CapabilityModel from_limits(const battery::BatteryLimits& limits, double eta);
};

/// JSON array of {v_dc_range, v_ac_range, soc_range, vertices}.
std::vector<PolygonOverride> load_polygon_overrides(const std::string& json_text);

struct ReferenceOutput {
  double f_ref = 50.0;  ///< Hz
  double v_ref = 400.0; ///< V
  double p_star = 0.0;  ///< kW
  double q_star = 0.0;  ///< kvar
  bool clipped = false;
};

/// Terminal DC voltage one second ahead when the converter delivers `p_set`.
double estimate_vdc(const battery::BatteryState& state, double p_set, const ConverterConfig& config,
                    const battery::TtcParams& params);

/// Converter-side AC voltage behind the step-up transformer reactance.
double estimate_vac(double v_mv_measured, double p_set, double q_set, const ConverterConfig& config);

double capability_margin(double p, double q, double v_dc, double v_ac, double soc, const CapabilityModel& model);

struct Projection {
  double p_star = 0.0;
  double q_star = 0.0;
  bool clipped = false;
  double v_dc = 0.0;  ///< estimate used for the final region
  double v_ac = 0.0;
};

/// Weighted projection with voltages estimated at the request, followed by
/// one re-check at the projected point.
Projection project_setpoint(double p_set, double q_set, double v_mv_measured, const battery::BatteryState& state,
                            const ConverterConfig& config, const CapabilityModel& model,
                            const battery::TtcParams& params);

ReferenceOutput to_references(double p_star, double q_star, const ConverterConfig& config);

struct PowerResponse {
  double p = 0.0;  ///< kW
  double q = 0.0;  ///< kvar
};

PowerResponse gfr_power_response(double f_grid, double v_grid, const ReferenceOutput& refs,
                                 const ConverterConfig& config);

}  // namespace gfrbess::realtime
