#include "gfrbess/errors.hpp"
#include "gfrbess/forecasting.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace gfrbess;
using namespace gfrbess::forecast;
using namespace std::chrono;
using gfrbess::testing::for_random;
using gfrbess::testing::uniform;

namespace {

HistoricalDay flat_day(double g) {
  HistoricalDay d;
  d.date = 2024y / April / 3d;
  d.g = Eigen::VectorXd::Constant(kSlots, g);
  d.p = Eigen::VectorXd::Zero(kSlots);
  d.ghi = Eigen::VectorXd::Zero(kSlots);
  d.temp = Eigen::VectorXd::Constant(kSlots, 15.0);
  return d;
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v(k) = uniform(rng, lo, hi);
  return v;
}

// Plant and time with the sun exactly at the zenith and a horizontal module,
// so POA equals GHI.
PvPlant zenith_plant() {
  PvPlant p;
  p.tilt_deg = 0.0;
  return p;
}

}  // namespace

TEST_CASE("disaggregate examples") {
  HistoricalDay zero = flat_day(0.0);
  CHECK(disaggregate(zero, Eigen::VectorXd::Zero(kSlots)).isZero());
  const Eigen::VectorXd c = disaggregate(flat_day(140.0), Eigen::VectorXd::Zero(kSlots));
  CHECK((c.array() == 140.0).all());
  CHECK_THROWS_AS(disaggregate(zero, Eigen::VectorXd::Zero(287)), InvalidArgument);
}

TEST_CASE("property: disaggregation round-trip") {
  for_random(100, 31, [](auto& rng) {
    HistoricalDay d = flat_day(0.0);
    d.g = random_vec(rng, kSlots, -200, 400);
    d.p = random_vec(rng, kSlots, -700, 700);
    const Eigen::VectorXd pv = random_vec(rng, kSlots, 0, 105);
    const Eigen::VectorXd c = disaggregate(d, pv);
    CHECK(((c + d.p + pv) - d.g).cwiseAbs().maxCoeff() <= 1e-9);
  });
}

TEST_CASE("classify_day") {
  const std::set<Date> none;
  CHECK(classify_day(2024y / April / 3d, none) == DayCategory::B);   // Wednesday
  CHECK(classify_day(2024y / April / 6d, none) == DayCategory::D1);  // Saturday
  CHECK(classify_day(2024y / April / 7d, none) == DayCategory::D2);  // Sunday
  CHECK(classify_day(2024y / April / 8d, none) == DayCategory::A);   // Monday
  CHECK(classify_day(2024y / April / 5d, none) == DayCategory::C);   // Friday

  const std::set<Date> easter_monday{2024y / April / 1d};
  CHECK(classify_day(2024y / April / 1d, easter_monday) == DayCategory::D2);
  CHECK(classify_day(2024y / April / 2d, easter_monday) == DayCategory::A);  // Tuesday after a Monday festivity

  const std::set<Date> thursday_holiday{2024y / May / 9d};
  CHECK(classify_day(2024y / May / 8d, thursday_holiday) == DayCategory::C);  // Wednesday before
  CHECK(classify_day(2024y / May / 10d, thursday_holiday) == DayCategory::A);  // bridge Friday: A beats C
  CHECK(category_from_string("D1") == DayCategory::D1);
  CHECK(to_string(DayCategory::D2) == "D2");
  CHECK_THROWS_AS(category_from_string("E"), InvalidArgument);
}

TEST_CASE("update_stats: identical days give zero covariance plus jitter") {
  CategoryStats s = CategoryStats::empty(1.0, 8);
  const Eigen::VectorXd day = Eigen::VectorXd::LinSpaced(8, 100, 150);
  s = update_stats(update_stats(s, day), day);
  CHECK((s.mu - day).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::MatrixXd off = s.sigma;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(s.sigma.diagonal().maxCoeff() <= 1e-8);
}

TEST_CASE("update_stats with lambda = 1 equals the batch sample moments") {
  std::mt19937_64 rng(32);
  const int n = 12;
  std::vector<Eigen::VectorXd> days;
  CategoryStats s = CategoryStats::empty(1.0, n);
  for (int d = 0; d < 7; ++d) {
    days.push_back(random_vec(rng, n, 50, 200));
    s = update_stats(s, days.back());
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& d : days) mean += d;
  mean /= days.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& d : days) cov += (d - mean) * (d - mean).transpose();
  cov /= static_cast<double>(days.size() - 1);
  const double jitter = covariance_jitter(cov);
  cov.diagonal().array() += jitter;
  CHECK((s.mu - mean).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((s.sigma - cov).cwiseAbs().maxCoeff() <= 1e-8 * cov.cwiseAbs().maxCoeff());
  CHECK(s.n_days == 7);
}

TEST_CASE("update_stats uses geometric weights") {
  // Weights {0.81, 0.9, 1.0} for the oldest to newest of three scalar days.
  CategoryStats s = CategoryStats::empty(0.9, 1);
  for (double v : {10.0, 20.0, 40.0}) s = update_stats(s, Eigen::VectorXd::Constant(1, v));
  const double expected = (0.81 * 10 + 0.9 * 20 + 1.0 * 40) / (0.81 + 0.9 + 1.0);
  CHECK(s.mu(0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(s.weight_sum == doctest::Approx(2.71));
}

TEST_CASE("property: covariance stays symmetric positive semidefinite") {
  for_random(20, 33, [](auto& rng) {
    CategoryStats s = CategoryStats::empty(uniform(rng, 0.8, 1.0), 20);
    for (int d = 0; d < 4; ++d) s = update_stats(s, random_vec(rng, 20, 0, 300));
    CHECK((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.sigma);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  });
}

TEST_CASE("sample_scenarios") {
  CategoryStats s = CategoryStats::empty(1.0, 6);
  const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(6, 120, 170);
  s = update_stats(update_stats(s, mu), mu);

  SUBCASE("degenerate covariance collapses onto the mean") {
    const double jitter = s.sigma(0, 0);
    for (const auto& sc : sample_scenarios(s, 50, 1))
      CHECK((sc - mu).cwiseAbs().maxCoeff() <= 5.0 * std::sqrt(jitter));
  }
  SUBCASE("determinism") {
    const auto a = sample_scenarios(s, 10, 77);
    const auto b = sample_scenarios(s, 10, 77);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    CHECK(sample_scenarios(s, 10, 78)[0] != a[0]);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(sample_scenarios(s, 1, 1), InvalidArgument);
    CategoryStats bad = s;
    bad.sigma(0, 0) = -1.0;
    CHECK_THROWS_AS(sample_scenarios(bad, 4, 1), NumericFailure);
  }
}

TEST_CASE("sample mean converges to mu (Monte Carlo, 1e4 draws)") {
  const int n = 8;
  std::mt19937_64 rng(34);
  CategoryStats s = CategoryStats::empty(1.0, n);
  for (int d = 0; d < 12; ++d) s = update_stats(s, random_vec(rng, n, 80, 160));
  const int draws = 10000;
  const auto sc = sample_scenarios(s, draws, 5);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& v : sc) mean += v;
  mean /= draws;
  for (int k = 0; k < n; ++k) {
    const double se = std::sqrt(s.sigma(k, k) / draws);
    CHECK(std::abs(mean(k) - s.mu(k)) <= 3.0 * se);
  }
}

TEST_CASE("envelope examples and dominance") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(5, 1, 5);
  const Envelope same = envelope({v, v, v});
  CHECK(same.c_down == v);
  CHECK(same.c_up == v);
  const Envelope zo = envelope({Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5)});
  CHECK(zo.c_down.isZero());
  CHECK(zo.c_up.isOnes());
  CHECK_THROWS_AS(envelope({v}), InvalidArgument);

  for_random(50, 35, [](auto& rng) {
    std::vector<Eigen::VectorXd> sc;
    for (int k = 0; k < 10; ++k) sc.push_back(random_vec(rng, 30, -50, 50));
    const Envelope e = envelope(sc);
    for (const auto& s : sc) {
      CHECK((s.array() >= e.c_down.array()).all());
      CHECK((s.array() <= e.c_up.array()).all());
    }
    // Enlarging the scenario set never narrows the envelope.
    sc.push_back(random_vec(rng, 30, -80, 80));
    const Envelope wider = envelope(sc);
    CHECK((wider.c_up.array() >= e.c_up.array()).all());
    CHECK((wider.c_down.array() <= e.c_down.array()).all());
  });
}

TEST_CASE("pv_power_from_poa examples") {
  const PvPlant p;
  CHECK(pv_power_from_poa(0.0, 25.0, p) == 0.0);
  CHECK(pv_power_from_poa(1000.0, 25.0, p) == doctest::Approx(p.capacity_kwp));
  CHECK(pv_power_from_poa(1000.0, 45.0, p) == doctest::Approx(0.92 * p.capacity_kwp));
  CHECK(pv_power_from_poa(1400.0, 25.0, p) == p.capacity_kwp);  // clipped
}

TEST_CASE("plane_of_array reduces to GHI for a horizontal module") {
  const PvPlant p = zenith_plant();
  for (double hour : {8.0, 11.0, 13.5, 16.0}) CHECK(plane_of_array(500.0, 120, hour, p) == doctest::Approx(500.0));
  CHECK(plane_of_array(0.0, 120, 12.0, p) == 0.0);
}

TEST_CASE("solar geometry is plausible at the default site") {
  const PvPlant p;
  // Around 13:00 CET at the spring equinox the zenith angle is close to the latitude.
  double best = -1.0;
  for (double h = 10.0; h < 15.0; h += 0.01) best = std::max(best, solar_cos_zenith(80, h, p));
  CHECK(std::acos(best) * 180.0 / M_PI == doctest::Approx(p.latitude_deg).epsilon(0.03));
  CHECK(solar_cos_zenith(80, 0.0, p) < 0.0);
  CHECK(day_of_year(2024y / March / 1d) == 61);
}

TEST_CASE("pv_bounds: night, ordering and physical range") {
  const PvPlant plant;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(kSlots);
  const Eigen::VectorXd temp = Eigen::VectorXd::Constant(kSlots, 20.0);
  const PvBounds night = pv_bounds(zero, zero, plant, temp, 2024y / April / 30d);
  CHECK(night.pv_up.isZero());
  CHECK(night.pv_down.isZero());

  for_random(30, 36, [&](auto& rng) {
    const Eigen::VectorXd lo = random_vec(rng, kSlots, 0, 600);
    Eigen::VectorXd hi = lo;
    for (int k = 0; k < kSlots; ++k) hi(k) += uniform(rng, 0, 500);
    const PvBounds b = pv_bounds(hi, lo, plant, temp, 2024y / June / 21d);
    CHECK((b.pv_down.array() <= b.pv_up.array() + 1e-12).all());
    CHECK((b.pv_down.array() >= 0.0).all());
    CHECK((b.pv_up.array() <= plant.capacity_kwp).all());
  });
  CHECK_THROWS_AS(pv_bounds(zero, Eigen::VectorXd::Ones(kSlots), plant, temp, 2024y / April / 30d), InvalidArgument);
}

TEST_CASE("prosumption_bounds") {
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 100.0);
  const auto b = prosumption_bounds(c, c, Eigen::VectorXd::Constant(3, 50.0), Eigen::VectorXd::Constant(3, 20.0));
  CHECK((b.l_up.array() == 80.0).all());
  CHECK((b.l_down.array() == 50.0).all());
  const auto nopv = prosumption_bounds(c, 0.5 * c, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK(nopv.l_up == c);
  CHECK(nopv.l_down == 0.5 * c);
  for_random(50, 37, [](auto& rng) {
    const Eigen::VectorXd cd = random_vec(rng, 10, 0, 100), pd = random_vec(rng, 10, 0, 50);
    const Eigen::VectorXd cu = cd + random_vec(rng, 10, 0, 30), pu = pd + random_vec(rng, 10, 0, 30);
    const auto r = prosumption_bounds(cu, cd, pu, pd);
    CHECK((r.l_down.array() <= r.l_up.array()).all());
  });
}

TEST_CASE("fit_wf_ar: constant history") {
  const std::vector<Eigen::VectorXd> hist(3, Eigen::VectorXd::Constant(kSlots, 0.4));
  const WfForecast f = fit_wf_ar(hist, 4);
  CHECK((f.inc_point.array() - 0.4).abs().maxCoeff() <= 1e-12);
  CHECK(f.residual_hi - f.residual_lo == doctest::Approx(0.0));
  CHECK(f.w_up(0) == 0.0);
  CHECK(f.w_down(0) == 0.0);
  CHECK(f.w_point(10) == doctest::Approx(4.0));
}

TEST_CASE("fit_wf_ar recovers an AR(1) coefficient") {
  std::mt19937_64 rng(38);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Eigen::VectorXd> hist;
  double y = 0.0;
  for (int d = 0; d < 100; ++d) {
    Eigen::VectorXd day(kSlots);
    for (int n = 0; n < kSlots; ++n) day(n) = y = 0.8 * y + noise(rng);
    hist.push_back(day);
  }
  const WfForecast f = fit_wf_ar(hist, 1);
  CHECK(std::abs(f.coefficients(1) - 0.8) <= 0.05);
}

TEST_CASE("property: W_f bounds bracket the point forecast") {
  for_random(10, 39, [](auto& rng) {
    std::vector<Eigen::VectorXd> hist;
    for (int d = 0; d < 5; ++d) hist.push_back(random_vec(rng, kSlots, -3, 3));
    const WfForecast f = fit_wf_ar(hist, 4);
    CHECK(f.w_up(0) == 0.0);
    CHECK(f.w_down(0) == 0.0);
    CHECK((f.w_down.array() <= f.w_point.array() + 1e-9).all());
    CHECK((f.w_point.array() <= f.w_up.array() + 1e-9).all());
    CHECK((f.inc_down.array() <= f.inc_up.array()).all());
  });
}

TEST_CASE("fit_wf_ar errors") {
  CHECK_THROWS_AS(fit_wf_ar({}, 4), InvalidArgument);
  CHECK_THROWS_AS(fit_wf_ar({Eigen::VectorXd::Ones(3)}, 4), InvalidArgument);
  // Two alternating values make lags 1 and 3 collinear.
  Eigen::VectorXd alt(kSlots);
  for (int n = 0; n < kSlots; ++n) alt(n) = n % 2 ? 1.0 : -1.0;
  CHECK_THROWS_AS(fit_wf_ar({alt}, 4), NumericFailure);
}
