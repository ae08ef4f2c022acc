#include "gfrbess/errors.hpp"
#include "gfrbess/realtime.hpp"
#include "projection_oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace gfrbess;
using namespace gfrbess::realtime;
using gfrbess::testing::for_random;
using gfrbess::testing::uniform;

namespace {

const battery::TtcParams kParams = battery::TtcParams::synthetic_default();

battery::BatteryState charged_state(double soc) {
  auto s = battery::BatteryState::at_rest(soc, kParams);
  s.x = Eigen::Vector3d(1.5, -0.8, 0.4);
  return battery::ttc_step(s, 0.0, 1.0, kParams);
}

double weighted_norm(const Eigen::Vector2d& d, double lp, double lq) {
  return std::sqrt(lp * d.x() * d.x() + lq * d.y() * d.y());
}

// Random disc-slab region; the slab sometimes cuts the disc and sometimes not.
Region random_region(std::mt19937_64& rng) {
  const double r = uniform(rng, 300.0, 800.0);
  return Region::disc_slab(r, -uniform(rng, 0.3, 1.2) * r, uniform(rng, 0.3, 1.2) * r, 720.0);
}

}  // namespace

TEST_CASE("estimate_vdc: zero power leaves only the RC decay") {
  const auto s = charged_state(0.6);
  ConverterConfig c;
  const double v = estimate_vdc(s, 0.0, c, kParams);
  CHECK(v == doctest::Approx(battery::terminal_voltage(s, 0.0, 1.0, kParams)).epsilon(1e-12));
  CHECK(v != doctest::Approx(s.v_dc).epsilon(1e-9));
}

TEST_CASE("estimate_vdc: large discharge sits below the rest voltage") {
  const auto s = battery::BatteryState::at_rest(0.5, kParams);
  CHECK(estimate_vdc(s, -500.0, ConverterConfig{}, kParams) < s.v_dc);
  CHECK(estimate_vdc(s, 500.0, ConverterConfig{}, kParams) > s.v_dc);
}

TEST_CASE("estimate_vdc agrees with a bisection on current") {
  ConverterConfig c;
  for_random(50, 11, [&](auto& rng) {
    const auto s = charged_state(uniform(rng, 0.2, 0.8));
    const double p = uniform(rng, -600.0, 600.0);
    const double p_dc = battery::ac_to_dc_power(p, c.eta);
    // g(i) = i v(i) / 1000 - p_dc is increasing on the working range.
    const auto g = [&](double i) { return i * battery::terminal_voltage(s, i, 1.0, kParams) / 1000.0 - p_dc; };
    double lo = -2500.0, hi = 2500.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) < 0 ? lo : hi) = mid;
    }
    const double v_oracle = battery::terminal_voltage(s, 0.5 * (lo + hi), 1.0, kParams);
    CHECK(estimate_vdc(s, p, c, kParams) == doctest::Approx(v_oracle).epsilon(1e-6));
  });
}

TEST_CASE("estimate_vac examples") {
  ConverterConfig c;
  c.x_t = 0.05;
  const double v_mv = 400.0 * c.turns_ratio;
  CHECK(estimate_vac(v_mv, 0.0, 0.0, c) == doctest::Approx(400.0).epsilon(1e-15));
  CHECK(estimate_vac(v_mv, 500.0, 0.0, c) == doctest::Approx(401.6).epsilon(1e-4));
  const double added1 = std::pow(estimate_vac(v_mv, 120.0, 40.0, c), 2) - 400.0 * 400.0;
  const double added2 = std::pow(estimate_vac(v_mv, 240.0, 80.0, c), 2) - 400.0 * 400.0;
  CHECK(added2 == doctest::Approx(4.0 * added1).epsilon(1e-9));
  CHECK_THROWS_AS(estimate_vac(0.0, 0.0, 0.0, c), InvalidArgument);
}

TEST_CASE("capability margin examples") {
  CapabilityModel m;
  m.i_dc_max = 1e6;
  m.i_ac_max = 1e6;
  CHECK(capability_margin(0, 0, 800, 400, 0.5, m) < 0);
  CHECK(capability_margin(m.s_nom, 0, 800, 400, 0.5, m) == doctest::Approx(0.0).scale(1.0));
  CHECK(capability_margin(0, -m.s_nom, 800, 400, 0.5, m) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("capability margin sign agrees with direct limit checks on a grid") {
  CapabilityModel m;  // default ratings: the DC limit binds below s_nom at low voltage
  const double v_dc = 550.0, v_ac = 330.0;
  const double s_lim = std::min(m.s_nom, std::sqrt(3.0) * v_ac * m.i_ac_max / 1000.0);
  const double dc = m.i_dc_max * v_dc / 1000.0;
  int disagree = 0, boundary = 0;
  for (int a = 0; a < 100; ++a)
    for (int b = 0; b < 100; ++b) {
      const double p = -900.0 + 1800.0 * a / 99.0, q = -900.0 + 1800.0 * b / 99.0;
      const bool inside = p * p + q * q <= s_lim * s_lim && p * m.eta <= dc && p / m.eta >= -dc;
      const double h = capability_margin(p, q, v_dc, v_ac, 0.5, m);
      if (std::abs(h) < 1e-12) ++boundary;
      else if ((h <= 0) != inside) ++disagree;
    }
  CHECK(disagree == 0);
  CHECK(boundary < 10);
}

TEST_CASE("projection: interior identity and radial clip") {
  const Region r = Region::disc_slab(720.0, -1e4, 1e4, 720.0);
  const auto x = r.project(100.0, -50.0, 1.0, 0.01);
  CHECK(x.x() == 100.0);
  CHECK(x.y() == -50.0);
  const auto y = r.project(2 * 720.0, 0.0, 1.0, 0.01);
  CHECK(y.x() == doctest::Approx(720.0).epsilon(1e-12));
  CHECK(y.y() == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(Region::disc_slab(0.0, -1, 1, 1), InfeasibleOperatingPoint);
  CHECK_THROWS_AS(Region::disc_slab(10.0, 20, 30, 1), InfeasibleOperatingPoint);
}

TEST_CASE("projection matches the grid-search oracle") {
  for_random(30, 12, [](auto& rng) {
    const Region r = random_region(rng);
    const double lp = 1.0, lq = uniform(rng, 0.005, 1.0);
    double p0, q0;
    do {
      p0 = uniform(rng, -1.6, 1.6) * r.radius();
      q0 = uniform(rng, -1.6, 1.6) * r.radius();
    } while (r.margin(p0, q0) <= 0.02);
    const auto x = r.project(p0, q0, lp, lq);
    const double ours = lp * std::pow(x.x() - p0, 2) + lq * std::pow(x.y() - q0, 2);
    const auto oracle = gfrbess::testing::projection_oracle(r, p0, q0, lp, lq, 2.0 * r.radius(), 2000);
    CHECK(r.margin(x.x(), x.y()) <= 1e-9);
    CHECK(ours <= oracle.cost * (1 + 1e-3));
    CHECK(ours >= oracle.cost * (1 - 1e-3));
  });
}

TEST_CASE("property: projection is feasible, idempotent and contractive") {
  for_random(300, 13, [](auto& rng) {
    const Region r = random_region(rng);
    const double lp = 1.0, lq = uniform(rng, 0.005, 1.0);
    const Eigen::Vector2d a(uniform(rng, -1500, 1500), uniform(rng, -1500, 1500));
    const Eigen::Vector2d b(uniform(rng, -1500, 1500), uniform(rng, -1500, 1500));
    const auto pa = r.project(a.x(), a.y(), lp, lq), pb = r.project(b.x(), b.y(), lp, lq);
    CHECK(r.margin(pa.x(), pa.y()) <= 1e-9);
    const auto ppa = r.project(pa.x(), pa.y(), lp, lq);
    CHECK((ppa - pa).norm() <= 1e-9 * (1 + pa.norm()));
    CHECK(weighted_norm(pa - pb, lp, lq) <= weighted_norm(a - b, lp, lq) * (1 + 1e-9) + 1e-9);
  });
}

TEST_CASE("property: larger lambda_p / lambda_q never sacrifices more active power") {
  for_random(100, 14, [](auto& rng) {
    const Region r = random_region(rng);
    double p0, q0;
    do {
      p0 = uniform(rng, -1.5, 1.5) * r.radius();
      q0 = uniform(rng, -1.5, 1.5) * r.radius();
    } while (r.margin(p0, q0) <= 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double ratio : {1.0, 2.0, 5.0, 10.0, 100.0, 1e3, 1e4}) {
      const auto x = r.project(p0, q0, 1.0, 1.0 / ratio);
      const double dp = std::abs(x.x() - p0);
      CHECK(dp <= prev + 1e-9 * r.radius());
      prev = dp;
    }
  });
}

TEST_CASE("polygon regions") {
  const std::vector<Eigen::Vector2d> square{{-100, -100}, {100, -100}, {100, 100}, {-100, 100}};
  const Region r = Region::polygon(square, 100.0);
  CHECK(r.margin(0, 0) == doctest::Approx(-1.0));
  CHECK(r.margin(150, 0) == doctest::Approx(0.5));
  CHECK(r.margin(200, 200) == doctest::Approx(std::sqrt(2.0)));
  const auto x = r.project(50, 20, 1, 0.01);
  CHECK(x == Eigen::Vector2d(50, 20));
  const auto y = r.project(300, 50, 1, 0.01);
  CHECK(y.x() == doctest::Approx(100.0));
  CHECK(y.y() == doctest::Approx(50.0));

  for_random(30, 15, [&](auto& rng) {
    const double p0 = uniform(rng, -400, 400), q0 = uniform(rng, -400, 400);
    const double lq = uniform(rng, 0.01, 1.0);
    const auto z = r.project(p0, q0, 1.0, lq);
    CHECK(r.margin(z.x(), z.y()) <= 1e-9);
    const double ours = std::pow(z.x() - p0, 2) + lq * std::pow(z.y() - q0, 2);
    const auto oracle = gfrbess::testing::projection_oracle(r, p0, q0, 1.0, lq, 400.0, 2000);
    CHECK(ours <= oracle.cost * (1 + 1e-3) + 1e-9);
  });
}

TEST_CASE("polygon override validation and loading") {
  PolygonOverride p;
  p.v_dc_hi = 1000;
  p.v_ac_hi = 500;
  p.vertices = {{-100, -100}, {100, -100}, {100, 100}, {-100, 100}};
  CHECK_NOTHROW(p.validate());
  auto cw = p;
  std::reverse(cw.vertices.begin(), cw.vertices.end());
  CHECK_THROWS_AS(cw.validate(), InvalidArgument);
  auto concave = p;
  concave.vertices.insert(concave.vertices.begin() + 2, Eigen::Vector2d(0, 0));
  CHECK_THROWS_AS(concave.validate(), InvalidArgument);
  auto shifted = p;
  for (auto& v : shifted.vertices) v.x() += 300;
  CHECK_THROWS_AS(shifted.validate(), InvalidArgument);

  const auto loaded = load_polygon_overrides(R"([{"v_dc_range":[600,900],"v_ac_range":[300,500],"soc_range":[0,1],
    "vertices":[[-200,-100],[200,-100],[200,100],[-200,100]]}])");
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].covers(700, 400, 0.5));
  CHECK_FALSE(loaded[0].covers(500, 400, 0.5));
  CHECK_THROWS_AS(load_polygon_overrides("{}"), InvalidArgument);
  CHECK_THROWS_AS(load_polygon_overrides("[{\"v_dc_range\":[1]}]"), InvalidArgument);
  CHECK_THROWS_AS(load_polygon_overrides("not json"), InvalidArgument);

  CapabilityModel m;
  m.polygons = loaded;
  CHECK(m.region(700, 400, 0.5).is_polygon());
  CHECK_FALSE(m.region(500, 400, 0.5).is_polygon());
  CHECK_THROWS_AS(m.region(0, 0, 0.5), InvalidArgument);
}

TEST_CASE("project_setpoint returns feasible points at the re-checked voltages") {
  const auto model = CapabilityModel::from_limits(battery::BatteryLimits{}, 0.97);
  ConverterConfig c;
  for_random(60, 16, [&](auto& rng) {
    const auto s = charged_state(uniform(rng, 0.15, 0.85));
    const double v_mv = uniform(rng, 19000.0, 21000.0);
    const auto out = project_setpoint(uniform(rng, -1200, 1200), uniform(rng, -800, 800), v_mv, s, c, model, kParams);
    CHECK(model.margin(out.p_star, out.q_star, out.v_dc, out.v_ac, s.soc) <= 1e-9);
  });
  const auto s = battery::BatteryState::at_rest(0.5, kParams);
  const auto inside = project_setpoint(50.0, 0.0, 20000.0, s, c, model, kParams);
  CHECK(inside.p_star == 50.0);
  CHECK(inside.q_star == 0.0);
  CHECK_FALSE(inside.clipped);
  const auto outside = project_setpoint(5000.0, 0.0, 20000.0, s, c, model, kParams);
  CHECK(outside.clipped);
  CHECK(outside.p_star < 5000.0);
}

TEST_CASE("references and grid-forming response") {
  ConverterConfig c;
  c.sigma_f = 116.0;
  c.sigma_v = 18.0;
  const auto zero = to_references(0.0, 0.0, c);
  CHECK(zero.f_ref == c.f_nom);
  CHECK(zero.v_ref == c.v_nom);
  const auto r = to_references(116.0, 0.0, c);
  CHECK(r.f_ref == doctest::Approx(49.0).epsilon(1e-15));
  CHECK(gfr_power_response(r.f_ref, c.v_nom, r, c).p == doctest::Approx(0.0).scale(1.0));
  CHECK(gfr_power_response(c.f_nom, c.v_nom, r, c).p == 116.0);
  const auto flat = to_references(0.0, 0.0, c);
  CHECK(gfr_power_response(49.95, c.v_nom, flat, c).p == doctest::Approx(-5.8).epsilon(1e-12));
  ConverterConfig bad = c;
  bad.sigma_f = 0;
  CHECK_THROWS_AS(to_references(0, 0, bad), InvalidArgument);
}

TEST_CASE("property: reference round trip and decomposition") {
  for_random(200, 17, [](auto& rng) {
    ConverterConfig c;
    c.sigma_f = uniform(rng, 10, 500);
    c.sigma_v = uniform(rng, 5, 50);
    const double p = uniform(rng, -700, 700), q = uniform(rng, -700, 700);
    const auto refs = to_references(p, q, c);
    const double back = c.sigma_f * (c.f_nom - refs.f_ref);
    CHECK(std::abs(back - p) <= 1e-12 * std::max(1.0, std::abs(p)) * 1e3);
    const double f = uniform(rng, 49.5, 50.5), v = uniform(rng, 380, 420);
    const auto resp = gfr_power_response(f, v, refs, c);
    CHECK(resp.p - c.sigma_f * (f - c.f_nom) == doctest::Approx(p).epsilon(1e-12));
    CHECK(resp.q - c.sigma_v * (v - c.v_nom) == doctest::Approx(q).epsilon(1e-12));
  });
}

TEST_CASE("converter config") {
  CHECK_NOTHROW(ConverterConfig{}.validate());
  const auto c = ConverterConfig::with_rating(720.0, 116.0);
  CHECK(c.sigma_v == doctest::Approx(18.0));
  CHECK(c.sigma_f == 116.0);
  ConverterConfig w;
  w.lambda_q = 2.0;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
}
