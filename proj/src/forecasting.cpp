#include "gfrbess/forecasting.hpp"

#include "gfrbess/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gfrbess::forecast {

using detail::require;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Linear-interpolated empirical quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

int day_of_year(Date date) {
  using namespace std::chrono;
  const sys_days jan1 = year_month_day{date.year(), January, day{1}};
  return static_cast<int>((sys_days{date} - jan1).count()) + 1;
}

namespace {

struct SunGeometry {
  double delta;  // declination
  double omega;  // hour angle
  double cos_zenith;
};

SunGeometry sun_geometry(int doy, double clock_hour, const PvPlant& plant) {
  const double phi = plant.latitude_deg * kDeg;
  const double delta = 23.45 * kDeg * std::sin(2.0 * std::numbers::pi * (284.0 + doy) / 365.0);
  const double b = 2.0 * std::numbers::pi * (doy - 81) / 364.0;
  const double eot_min = 9.87 * std::sin(2 * b) - 7.53 * std::cos(b) - 1.5 * std::sin(b);
  const double solar_hour = clock_hour + (4.0 * plant.longitude_deg - 60.0 * plant.utc_offset_h + eot_min) / 60.0;
  const double omega = 15.0 * kDeg * (solar_hour - 12.0);
  return {delta, omega, std::sin(phi) * std::sin(delta) + std::cos(phi) * std::cos(delta) * std::cos(omega)};
}

}  // namespace

double solar_cos_zenith(int doy, double clock_hour, const PvPlant& plant) {
  return sun_geometry(doy, clock_hour, plant).cos_zenith;
}

std::string to_string(DayCategory c) {
  switch (c) {
    case DayCategory::A: return "A";
    case DayCategory::B: return "B";
    case DayCategory::C: return "C";
    case DayCategory::D1: return "D1";
    case DayCategory::D2: return "D2";
  }
  return "?";
}

DayCategory category_from_string(const std::string& s) {
  if (s == "A") return DayCategory::A;
  if (s == "B") return DayCategory::B;
  if (s == "C") return DayCategory::C;
  if (s == "D1") return DayCategory::D1;
  if (s == "D2") return DayCategory::D2;
  throw InvalidArgument("unknown day category '" + s + "'");
}

CategoryStats CategoryStats::empty(double lambda_forget, int slots) {
  require(lambda_forget > 0 && lambda_forget <= 1, "category stats: forgetting factor must lie in (0, 1]");
  CategoryStats s;
  s.lambda_forget = lambda_forget;
  s.mu = Eigen::VectorXd::Zero(slots);
  s.sigma = Eigen::MatrixXd::Zero(slots, slots);
  s.sum = Eigen::VectorXd::Zero(slots);
  s.outer_sum = Eigen::MatrixXd::Zero(slots, slots);
  return s;
}

void ProsumptionBounds::validate(int slots) const {
  require(l_up.size() == slots && l_down.size() == slots, "prosumption bounds: wrong slot count");
  require(l_up.allFinite() && l_down.allFinite(), "prosumption bounds: non-finite values");
  require(((l_up - l_down).array() >= 0.0).all(), "prosumption bounds: l_down exceeds l_up");
}

void PvPlant::validate() const {
  require(capacity_kwp > 0, "pv plant: capacity must be positive");
  require(tilt_deg >= 0 && tilt_deg <= 90, "pv plant: tilt must lie in [0, 90]");
  require(gamma_temp <= 0, "pv plant: temperature coefficient must be non-positive");
  require(diffuse_fraction >= 0 && diffuse_fraction <= 1, "pv plant: diffuse fraction must lie in [0, 1]");
}

WfForecast WfForecast::zero(int slots) {
  WfForecast f;
  f.w_up = f.w_down = f.w_point = Eigen::VectorXd::Zero(slots);
  f.inc_up = f.inc_down = f.inc_point = Eigen::VectorXd::Zero(slots);
  f.ar_order = 0;
  f.coefficients = Eigen::VectorXd::Zero(1);
  return f;
}

Eigen::VectorXd disaggregate(const HistoricalDay& day, const Eigen::VectorXd& pv_est) {
  const Eigen::Index n = day.g.size();
  require(n == kSlots, "disaggregate: PCC series must have 288 slots");
  require(day.p.size() == n && pv_est.size() == n, "disaggregate: series length mismatch");
  return day.g - day.p - pv_est;
}

DayCategory classify_day(Date date, const std::set<Date>& holidays) {
  using namespace std::chrono;
  const sys_days today{date};
  const weekday wd{today};
  const bool holiday = holidays.contains(date);
  const bool after_holiday = holidays.contains(year_month_day{today - days{1}});
  const bool before_holiday = holidays.contains(year_month_day{today + days{1}});

  if (wd == Sunday || holiday) return DayCategory::D2;
  if (wd == Saturday) return DayCategory::D1;
  if (wd == Monday || after_holiday) return DayCategory::A;
  if (wd == Friday || before_holiday) return DayCategory::C;
  return DayCategory::B;
}

double covariance_jitter(const Eigen::MatrixXd& cov) {
  const double n = static_cast<double>(std::max<Eigen::Index>(cov.rows(), 1));
  return 1e-6 * cov.trace() / n + 1e-9;
}

CategoryStats update_stats(const CategoryStats& stats, const Eigen::VectorXd& day_consumption) {
  require(day_consumption.size() == stats.sum.size(), "update_stats: consumption length mismatch");
  require(day_consumption.allFinite(), "update_stats: non-finite consumption");
  const double lam = stats.lambda_forget;

  CategoryStats next = stats;
  next.n_days = stats.n_days + 1;
  next.weight_sum = lam * stats.weight_sum + 1.0;
  next.weight_sq_sum = lam * lam * stats.weight_sq_sum + 1.0;
  next.sum = lam * stats.sum + day_consumption;
  next.outer_sum = lam * stats.outer_sum + day_consumption * day_consumption.transpose();

  next.mu = next.sum / next.weight_sum;
  const double denom = next.weight_sum - next.weight_sq_sum / next.weight_sum;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(next.mu.size(), next.mu.size());
  if (denom > 1e-12) {
    cov = (next.outer_sum - next.weight_sum * next.mu * next.mu.transpose()) / denom;
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
  cov.diagonal().array() += covariance_jitter(cov);
  next.sigma = cov;
  return next;
}

std::vector<Eigen::VectorXd> sample_scenarios(const CategoryStats& stats, int count, std::uint64_t seed) {
  require(count >= 2, "sample_scenarios: at least two scenarios required");
  const Eigen::Index n = stats.mu.size();
  require(stats.sigma.rows() == n && stats.sigma.cols() == n, "sample_scenarios: covariance shape mismatch");

  Eigen::LLT<Eigen::MatrixXd> llt(stats.sigma);
  if (llt.info() != Eigen::Success) throw NumericFailure("sample_scenarios: covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  Eigen::VectorXd z(n);
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index k = 0; k < n; ++k) z(k) = normal(rng);
    out.push_back(stats.mu + chol * z);
  }
  return out;
}

Envelope envelope(const std::vector<Eigen::VectorXd>& scenarios) {
  require(scenarios.size() >= 2, "envelope: at least two scenarios required");
  Envelope e{scenarios.front(), scenarios.front()};
  for (const auto& s : scenarios) {
    require(s.size() == e.c_up.size(), "envelope: scenario length mismatch");
    e.c_down = e.c_down.cwiseMin(s);
    e.c_up = e.c_up.cwiseMax(s);
  }
  return e;
}

double plane_of_array(double ghi, int doy, double clock_hour, const PvPlant& plant) {
  if (ghi <= 0.0) return 0.0;
  const double beta = plant.tilt_deg * kDeg;
  const double phi = plant.latitude_deg * kDeg;
  const double gamma = (plant.azimuth_deg - 180.0) * kDeg;  // from south, west positive
  const auto [delta, omega, cos_zenith] = sun_geometry(doy, clock_hour, plant);
  const double sky = 0.5 * (1.0 + std::cos(beta));
  if (cos_zenith < 0.01) return ghi * sky;

  const double cos_incidence =
      std::sin(delta) * std::sin(phi) * std::cos(beta) -
      std::sin(delta) * std::cos(phi) * std::sin(beta) * std::cos(gamma) +
      std::cos(delta) * std::cos(phi) * std::cos(beta) * std::cos(omega) +
      std::cos(delta) * std::sin(phi) * std::sin(beta) * std::cos(gamma) * std::cos(omega) +
      std::cos(delta) * std::sin(beta) * std::sin(gamma) * std::sin(omega);
  const double beam_ratio = std::min(std::max(cos_incidence, 0.0) / cos_zenith, 5.0);
  return ghi * ((1.0 - plant.diffuse_fraction) * beam_ratio + plant.diffuse_fraction * sky);
}

double pv_power_from_poa(double poa, double t_cell, const PvPlant& plant) {
  if (poa <= 0.0) return 0.0;
  const double derate = std::max(0.0, 1.0 + plant.gamma_temp * (t_cell - 25.0));
  return std::clamp(plant.capacity_kwp * poa / 1000.0 * derate, 0.0, plant.capacity_kwp);
}

namespace {

Eigen::VectorXd pv_profile(const Eigen::VectorXd& ghi, const Eigen::VectorXd& air_temp, const PvPlant& plant,
                           int doy) {
  Eigen::VectorXd out(ghi.size());
  const double slots_per_hour = static_cast<double>(ghi.size()) / 24.0;
  for (Eigen::Index n = 0; n < ghi.size(); ++n) {
    const double hour = (static_cast<double>(n) + 0.5) / slots_per_hour;
    const double poa = plane_of_array(ghi(n), doy, hour, plant);
    out(n) = pv_power_from_poa(poa, air_temp(n) + plant.k_noct * poa, plant);
  }
  return out;
}

}  // namespace

PvBounds pv_bounds(const Eigen::VectorXd& ghi_up, const Eigen::VectorXd& ghi_down, const PvPlant& plant,
                   const Eigen::VectorXd& air_temp, Date date) {
  plant.validate();
  require(ghi_up.size() == ghi_down.size() && ghi_up.size() == air_temp.size(), "pv_bounds: length mismatch");
  require(((ghi_up - ghi_down).array() >= 0.0).all(), "pv_bounds: ghi_down exceeds ghi_up");
  const int doy = day_of_year(date);
  return PvBounds{pv_profile(ghi_up, air_temp, plant, doy), pv_profile(ghi_down, air_temp, plant, doy)};
}

Eigen::VectorXd pv_estimate(const Eigen::VectorXd& ghi, const Eigen::VectorXd& air_temp, const PvPlant& plant,
                            Date date) {
  plant.validate();
  require(ghi.size() == air_temp.size(), "pv_estimate: length mismatch");
  return pv_profile(ghi, air_temp, plant, day_of_year(date));
}

ProsumptionBounds prosumption_bounds(const Eigen::VectorXd& c_up, const Eigen::VectorXd& c_down,
                                     const Eigen::VectorXd& pv_up, const Eigen::VectorXd& pv_down) {
  const Eigen::Index n = c_up.size();
  require(c_down.size() == n && pv_up.size() == n && pv_down.size() == n, "prosumption_bounds: length mismatch");
  require(((c_up - c_down).array() >= 0.0).all(), "prosumption_bounds: c_down exceeds c_up");
  require(((pv_up - pv_down).array() >= 0.0).all(), "prosumption_bounds: pv_down exceeds pv_up");
  return ProsumptionBounds{c_up - pv_down, c_down - pv_up};
}

WfForecast fit_wf_ar(const std::vector<Eigen::VectorXd>& history, int order) {
  require(order >= 1, "fit_wf_ar: AR order must be at least 1");
  require(!history.empty(), "fit_wf_ar: empty history");
  const Eigen::Index slots = history.front().size();
  std::vector<double> series;
  for (const auto& day : history) {
    require(day.size() == slots, "fit_wf_ar: days of unequal length");
    require(day.allFinite(), "fit_wf_ar: non-finite increment");
    series.insert(series.end(), day.data(), day.data() + day.size());
  }
  const auto total = static_cast<Eigen::Index>(series.size());
  require(total > order, "fit_wf_ar: history must be longer than the AR order");

  const Eigen::Index rows = total - order;
  Eigen::MatrixXd design(rows, order + 1);
  Eigen::VectorXd target(rows);
  for (Eigen::Index t = order; t < total; ++t) {
    const Eigen::Index r = t - order;
    design(r, 0) = 1.0;
    for (int lag = 1; lag <= order; ++lag) design(r, lag) = series[t - lag];
    target(r) = series[t];
  }

  WfForecast f;
  f.ar_order = order;
  const auto [mn, mx] = std::minmax_element(series.begin(), series.end());
  if (*mx - *mn == 0.0) {
    // Constant history: the regression is degenerate but the forecast is not.
    f.coefficients = Eigen::VectorXd::Zero(order + 1);
    f.coefficients(0) = *mn;
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < order + 1) throw NumericFailure("fit_wf_ar: rank-deficient AR regression");
    f.coefficients = qr.solve(target);
  }

  const Eigen::VectorXd residuals = target - design * f.coefficients;
  std::vector<double> sorted(residuals.data(), residuals.data() + residuals.size());
  std::sort(sorted.begin(), sorted.end());
  f.residual_lo = quantile_sorted(sorted, 0.025);
  f.residual_hi = quantile_sorted(sorted, 0.975);

  // Iterated point forecast for the next day.
  std::vector<double> buffer(series.end() - order, series.end());
  f.inc_point.resize(slots);
  for (Eigen::Index n = 0; n < slots; ++n) {
    double y = f.coefficients(0);
    for (int lag = 1; lag <= order; ++lag) y += f.coefficients(lag) * buffer[buffer.size() - lag];
    f.inc_point(n) = y;
    buffer.push_back(y);
  }
  f.inc_up = f.inc_point.array() + f.residual_hi;
  f.inc_down = f.inc_point.array() + f.residual_lo;

  auto cumulative_start = [slots](const Eigen::VectorXd& inc) {
    Eigen::VectorXd w(slots);
    double acc = 0.0;
    for (Eigen::Index n = 0; n < slots; ++n) {
      w(n) = acc;
      acc += inc(n);
    }
    return w;
  };
  f.w_up = cumulative_start(f.inc_up);
  f.w_down = cumulative_start(f.inc_down);
  f.w_point = cumulative_start(f.inc_point);
  return f;
}

}  // namespace gfrbess::forecast
