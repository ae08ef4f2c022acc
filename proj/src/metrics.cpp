#include "gfrbess/metrics.hpp"

#include "gfrbess/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace gfrbess::metrics {

using detail::require;

ErrorStats error_stats(const Eigen::VectorXd& errors) {
  require(errors.size() > 0, "error_stats: empty series");
  ErrorStats s;
  s.me = errors.mean();
  s.mae = errors.cwiseAbs().maxCoeff();
  s.rmse = std::sqrt(errors.squaredNorm() / static_cast<double>(errors.size()));
  return s;
}

TrackingReport tracking_errors(const sim::SimulationLog& log, const Eigen::VectorXd& plan, double sigma_f,
                               double f_nom) {
  require(plan.size() == forecast::kSlots, "tracking_errors: plan must have 288 slots");
  require(log.records.size() == static_cast<std::size_t>(sim::kSecondsPerDay),
          fmt::format("tracking_errors: incomplete day ({} of {} records)", log.records.size(), sim::kSecondsPerDay));
  constexpr int per_slot = sim::kSecondsPerDay / forecast::kSlots;

  TrackingReport rep;
  rep.slot_error_no_dispatch.resize(forecast::kSlots);
  rep.slot_error_dispatch.resize(forecast::kSlots);
  rep.slot_error_dispatch_plus_fcr.resize(forecast::kSlots);
  for (int n = 0; n < forecast::kSlots; ++n) {
    double l = 0.0, g = 0.0, dev = 0.0;
    for (int s = 0; s < per_slot; ++s) {
      const auto& r = log.records[n * per_slot + s];
      require(r.t == n * per_slot + s, fmt::format("tracking_errors: record {} out of order", n * per_slot + s));
      l += r.l_kw;
      g += r.g_pcc_kw;
      dev += (f_nom - r.f_hz) * sigma_f;
    }
    l /= per_slot;
    g /= per_slot;
    dev /= per_slot;
    rep.slot_error_no_dispatch(n) = l - plan(n);
    rep.slot_error_dispatch(n) = g - plan(n);
    rep.slot_error_dispatch_plus_fcr(n) = g - (plan(n) - dev);
  }
  rep.no_dispatch = error_stats(rep.slot_error_no_dispatch);
  rep.dispatch = error_stats(rep.slot_error_dispatch);
  rep.dispatch_plus_fcr = error_stats(rep.slot_error_dispatch_plus_fcr);
  return rep;
}

RrocofSeries rrocof(const std::vector<double>& f_hz, const std::vector<double>& p_kw, double dt) {
  require(f_hz.size() == p_kw.size(), "rrocof: traces of unequal length");
  require(dt > 0, "rrocof: dt must be positive");
  RrocofSeries out;
  out.dt = dt;
  if (f_hz.size() < 2) return out;
  out.values.reserve(f_hz.size() - 1);
  for (std::size_t t = 0; t + 1 < f_hz.size(); ++t) {
    const double dp = std::abs(p_kw[t + 1] - p_kw[t]);
    if (dp < kRrocofPowerThreshold) {
      ++out.excluded;
      continue;
    }
    out.values.push_back(std::abs((f_hz[t + 1] - f_hz[t]) / dt) / dp);
  }
  return out;
}

RrocofSeries rrocof(const sim::Trace& f, const sim::Trace& p) {
  require(f.dt == p.dt, "rrocof: traces with different sampling");
  return rrocof(f.values, p.values, f.dt);
}

std::vector<CdfPoint> cdf(const std::vector<double>& values) {
  require(!values.empty(), "cdf: empty series");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CdfPoint> out(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) out[i] = {sorted[i], (static_cast<double>(i) + 0.5) / n};
  return out;
}

double empirical_cdf_at(const std::vector<double>& sorted_values, double x) {
  if (sorted_values.empty()) return 0.0;
  const auto it = std::upper_bound(sorted_values.begin(), sorted_values.end(), x);
  return static_cast<double>(it - sorted_values.begin()) / static_cast<double>(sorted_values.size());
}

std::string report_to_json(const TrackingReport& report) {
  const auto stats = [](const ErrorStats& s) { return nlohmann::ordered_json{{"me", s.me}, {"mae", s.mae}, {"rmse", s.rmse}}; };
  nlohmann::ordered_json j;
  j["units"] = "kW";
  j["no_dispatch"] = stats(report.no_dispatch);
  j["dispatch"] = stats(report.dispatch);
  j["dispatch_plus_fcr"] = stats(report.dispatch_plus_fcr);
  return j.dump(2) + "\n";
}

std::string cdf_to_csv(const std::vector<CdfPoint>& points) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "rrocof_hz_per_s_per_kw,fraction\n");
  for (const auto& p : points) fmt::format_to(std::back_inserter(buf), "{:.12g},{:.12g}\n", p.value, p.fraction);
  return fmt::to_string(buf);
}

}  // namespace gfrbess::metrics
