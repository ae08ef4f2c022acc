#include "gfrbess/realtime.hpp"

#include "gfrbess/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gfrbess::realtime {

using detail::require;

void ConverterConfig::validate() const {
  require(sigma_f > 0 && std::isfinite(sigma_f), "converter: sigma_f must be positive");
  require(sigma_v > 0 && std::isfinite(sigma_v), "converter: sigma_v must be positive");
  require(f_nom > 0 && v_nom > 0, "converter: nominal frequency and voltage must be positive");
  require(eta > 0 && eta <= 1, "converter: efficiency must lie in (0, 1]");
  require(lambda_p > lambda_q && lambda_q > 0, "converter: weights must satisfy lambda_p > lambda_q > 0");
  require(x_t >= 0 && turns_ratio > 0, "converter: invalid transformer data");
}

ConverterConfig ConverterConfig::with_rating(double s_nom_kva, double sigma_f_kw_per_hz) {
  ConverterConfig c;
  c.sigma_f = sigma_f_kw_per_hz;
  c.sigma_v = s_nom_kva / (0.1 * c.v_nom);
  return c;
}

bool PolygonOverride::covers(double v_dc, double v_ac, double soc) const {
  return v_dc >= v_dc_lo && v_dc <= v_dc_hi && v_ac >= v_ac_lo && v_ac <= v_ac_hi && soc >= soc_lo && soc <= soc_hi;
}

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Signed distance of `x` to the line through edge (a, b); positive outside
// a counterclockwise polygon.
double edge_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = b - a;
  return -cross(d, x - a) / d.norm();
}

Eigen::Vector2d closest_on_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = b - a;
  const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return a + t * d;
}

double polygon_signed_distance(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& x) {
  const std::size_t n = v.size();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, edge_distance(v[k], v[(k + 1) % n], x));
  if (worst <= 0.0) return worst;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) best = std::min(best, (closest_on_segment(v[k], v[(k + 1) % n], x) - x).norm());
  return best;
}

}  // namespace

void PolygonOverride::validate() const {
  require(vertices.size() >= 3, "polygon override: at least three vertices required");
  require(v_dc_lo <= v_dc_hi && v_ac_lo <= v_ac_hi && soc_lo <= soc_hi, "polygon override: empty bin range");
  const std::size_t n = vertices.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector2d& a = vertices[k];
    const Eigen::Vector2d& b = vertices[(k + 1) % n];
    const Eigen::Vector2d& c = vertices[(k + 2) % n];
    require(a.allFinite(), "polygon override: non-finite vertex");
    require(cross(b - a, c - b) > 0, "polygon override: vertices must be counterclockwise and convex");
  }
  require(polygon_signed_distance(vertices, Eigen::Vector2d::Zero()) <= 0.0,
          "polygon override: region must contain the origin");
}

Region Region::disc_slab(double radius, double p_lo, double p_hi, double scale) {
  if (!(radius > 0) || p_lo > p_hi || p_lo > radius || p_hi < -radius)
    throw InfeasibleOperatingPoint("capability region is empty");
  Region r;
  r.radius_ = radius;
  r.p_lo_ = p_lo;
  r.p_hi_ = p_hi;
  r.scale_ = scale;
  return r;
}

Region Region::polygon(std::vector<Eigen::Vector2d> vertices, double scale) {
  require(vertices.size() >= 3, "polygon region needs three vertices");
  Region r;
  r.vertices_ = std::move(vertices);
  r.scale_ = scale;
  return r;
}

double Region::margin(double p, double q) const {
  if (is_polygon()) return polygon_signed_distance(vertices_, {p, q}) / scale_;
  const double h = std::max({std::hypot(p, q) - radius_, p - p_hi_, p_lo_ - p});
  return h / scale_;
}

Eigen::Vector2d Region::project(double p0, double q0, double lambda_p, double lambda_q) const {
  require(lambda_p > 0 && lambda_q > 0, "projection weights must be positive");
  const auto cost = [&](const Eigen::Vector2d& x) {
    return lambda_p * (x.x() - p0) * (x.x() - p0) + lambda_q * (x.y() - q0) * (x.y() - q0);
  };

  if (is_polygon()) {
    if (polygon_signed_distance(vertices_, {p0, q0}) <= 0.0) return {p0, q0};
    // Euclidean projection after scaling each axis by sqrt(lambda).
    const Eigen::Vector2d w(std::sqrt(lambda_p), std::sqrt(lambda_q));
    const Eigen::Vector2d target = Eigen::Vector2d(p0, q0).cwiseProduct(w);
    Eigen::Vector2d best = vertices_.front();
    double best_d = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Vector2d c =
          closest_on_segment(vertices_[k].cwiseProduct(w), vertices_[(k + 1) % n].cwiseProduct(w), target);
      const double d = (c - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c.cwiseQuotient(w);
      }
    }
    return best;
  }

  const double r = radius_;
  const auto feasible = [&](const Eigen::Vector2d& x) {
    return x.x() >= p_lo_ - 1e-12 * r && x.x() <= p_hi_ + 1e-12 * r && x.norm() <= r * (1 + 1e-12);
  };
  const Eigen::Vector2d request(p0, q0);
  if (feasible(request)) return request;

  std::vector<Eigen::Vector2d> candidates;
  // Slab edges, alone or together with the circle.
  for (double pe : {p_lo_, p_hi_}) {
    if (std::abs(pe) > r) continue;
    const double c = std::sqrt(r * r - pe * pe);
    candidates.emplace_back(pe, std::clamp(q0, -c, c));
  }
  // Circle alone: p = lp p0 / (lp + mu), q = lq q0 / (lq + mu), mu >= 0.
  if (request.norm() > r) {
    const auto radius_at = [&](double mu) {
      return std::hypot(lambda_p * p0 / (lambda_p + mu), lambda_q * q0 / (lambda_q + mu));
    };
    double lo = 0.0;
    double hi = std::max(lambda_p, lambda_q) * (2.0 * request.norm() / r) + 1.0;
    while (radius_at(hi) > r) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (radius_at(mid) > r ? lo : hi) = mid;
    }
    Eigen::Vector2d x(lambda_p * p0 / (lambda_p + hi), lambda_q * q0 / (lambda_q + hi));
    x *= std::min(1.0, r / x.norm());
    candidates.push_back(x);
  }
  // Slab alone.
  candidates.emplace_back(std::clamp(p0, p_lo_, p_hi_), q0);

  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_cost = cost(best);
  for (const auto& c : candidates) {
    if (!feasible(c)) continue;
    const double v = cost(c);
    if (v < best_cost) {
      best_cost = v;
      best = c;
    }
  }
  return best;
}

double CapabilityModel::p_dc_max(double v_dc) const { return i_dc_max * std::max(0.0, v_dc) / 1000.0; }

double CapabilityModel::apparent_limit(double v_ac) const {
  return std::min(s_nom, std::sqrt(3.0) * std::max(0.0, v_ac) * i_ac_max / 1000.0);
}

Region CapabilityModel::region(double v_dc, double v_ac, double soc) const {
  require(std::isfinite(v_dc) && std::isfinite(v_ac) && std::isfinite(soc), "capability: non-finite operating point");
  for (const auto& poly : polygons)
    if (poly.covers(v_dc, v_ac, soc)) return Region::polygon(poly.vertices, s_nom);
  require(polygons.empty() || (v_dc > 0 && v_ac > 0), "capability: no region for this operating point");
  const double dc = p_dc_max(v_dc);
  return Region::disc_slab(apparent_limit(v_ac), -eta * dc, dc / eta, s_nom);
}

double CapabilityModel::margin(double p, double q, double v_dc, double v_ac, double soc) const {
  return region(v_dc, v_ac, soc).margin(p, q);
}

void CapabilityModel::validate() const {
  require(s_nom > 0 && i_ac_max > 0 && i_dc_max > 0, "capability: ratings must be positive");
  require(eta > 0 && eta <= 1, "capability: efficiency must lie in (0, 1]");
  for (const auto& poly : polygons) poly.validate();
}

CapabilityModel CapabilityModel::from_limits(const battery::BatteryLimits& limits, double eta) {
  CapabilityModel m;
  m.s_nom = limits.s_nom;
  m.i_dc_max = std::max(limits.i_max, -limits.i_min);
  m.eta = eta;
  return m;
}

std::vector<PolygonOverride> load_polygon_overrides(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("polygon overrides: ") + e.what());
  }
  require(doc.is_array(), "polygon overrides: expected a JSON array");
  std::vector<PolygonOverride> out;
  try {
    for (const auto& item : doc) {
      PolygonOverride p;
      const auto range = [&](const char* key, double& lo, double& hi) {
        const auto& r = item.at(key);
        require(r.is_array() && r.size() == 2, std::string("polygon overrides: ") + key + " must be [lo, hi]");
        lo = r[0].get<double>();
        hi = r[1].get<double>();
      };
      range("v_dc_range", p.v_dc_lo, p.v_dc_hi);
      range("v_ac_range", p.v_ac_lo, p.v_ac_hi);
      range("soc_range", p.soc_lo, p.soc_hi);
      for (const auto& v : item.at("vertices")) {
        require(v.is_array() && v.size() == 2, "polygon overrides: vertices must be [p, q] pairs");
        p.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
      }
      p.validate();
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("polygon overrides: ") + e.what());
  }
  return out;
}

double estimate_vdc(const battery::BatteryState& state, double p_set, const ConverterConfig& config,
                    const battery::TtcParams& params) {
  const double p_dc = battery::ac_to_dc_power(p_set, config.eta);
  const double i = battery::dc_current_from_power(p_dc, state, params, 1.0);
  return battery::terminal_voltage(state, i, 1.0, params);
}

double estimate_vac(double v_mv_measured, double p_set, double q_set, const ConverterConfig& config) {
  require(v_mv_measured > 0, "estimate_vac: measured voltage must be positive");
  const double vm = v_mv_measured / config.turns_ratio;
  const double p = p_set * 1000.0;
  const double q = q_set * 1000.0;
  return std::sqrt(vm * vm + config.x_t * config.x_t * (p * p + q * q) / (3.0 * vm * vm));
}

double capability_margin(double p, double q, double v_dc, double v_ac, double soc, const CapabilityModel& model) {
  return model.margin(p, q, v_dc, v_ac, soc);
}

namespace {

// Falls back to the present terminal voltage when the request is beyond
// what the cells can deliver; the projection then cuts it back anyway.
double safe_vdc(const battery::BatteryState& state, double p, const ConverterConfig& config,
                const battery::TtcParams& params) {
  try {
    return estimate_vdc(state, p, config, params);
  } catch (const NumericFailure&) {
    return state.v_dc;
  } catch (const InfeasibleOperatingPoint&) {
    return state.v_dc;
  }
}

}  // namespace

Projection project_setpoint(double p_set, double q_set, double v_mv_measured, const battery::BatteryState& state,
                            const ConverterConfig& config, const CapabilityModel& model,
                            const battery::TtcParams& params) {
  require(std::isfinite(p_set) && std::isfinite(q_set), "project_setpoint: non-finite request");
  Projection out;
  out.v_dc = safe_vdc(state, p_set, config, params);
  out.v_ac = estimate_vac(v_mv_measured, p_set, q_set, config);
  Region region = model.region(out.v_dc, out.v_ac, state.soc);
  Eigen::Vector2d x = region.project(p_set, q_set, config.lambda_p, config.lambda_q);

  const double v_dc2 = safe_vdc(state, x.x(), config, params);
  const double v_ac2 = estimate_vac(v_mv_measured, x.x(), x.y(), config);
  const Region recheck = model.region(v_dc2, v_ac2, state.soc);
  if (recheck.margin(x.x(), x.y()) > 1e-9) {
    x = recheck.project(p_set, q_set, config.lambda_p, config.lambda_q);
    out.v_dc = v_dc2;
    out.v_ac = v_ac2;
  }
  out.p_star = x.x();
  out.q_star = x.y();
  out.clipped = std::abs(x.x() - p_set) > 1e-12 * (1 + std::abs(p_set)) ||
                std::abs(x.y() - q_set) > 1e-12 * (1 + std::abs(q_set));
  return out;
}

ReferenceOutput to_references(double p_star, double q_star, const ConverterConfig& config) {
  require(config.sigma_f > 0 && config.sigma_v > 0, "to_references: droops must be positive");
  ReferenceOutput r;
  r.p_star = p_star;
  r.q_star = q_star;
  r.f_ref = config.f_nom - p_star / config.sigma_f;
  r.v_ref = config.v_nom - q_star / config.sigma_v;
  return r;
}

PowerResponse gfr_power_response(double f_grid, double v_grid, const ReferenceOutput& refs,
                                 const ConverterConfig& config) {
  // Written as droop term plus set-point so f_grid = f_nom returns p_star exactly.
  return {config.sigma_f * (f_grid - config.f_nom) + refs.p_star,
          config.sigma_v * (v_grid - config.v_nom) + refs.q_star};
}

}  // namespace gfrbess::realtime
