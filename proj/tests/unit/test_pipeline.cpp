#include "gfrbess/errors.hpp"
#include "gfrbess/pipeline.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace gfrbess;
using namespace gfrbess::pipeline;
using forecast::kSlots;

namespace {

std::vector<forecast::HistoricalDay> small_history(int days = 21) {
  sim::SynthHistoryConfig hc;
  hc.days = days;
  hc.seed = 4;
  return sim::synth_history(hc);
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("dates") {
  const auto d = parse_date("2024-02-29");
  CHECK(format_date(d) == "2024-02-29");
  CHECK_THROWS_AS(parse_date("2023-02-29"), InvalidArgument);
  CHECK_THROWS_AS(parse_date("2024/01/01"), InvalidArgument);
  CHECK_THROWS_AS(parse_date("24-01-01"), InvalidArgument);
}

TEST_CASE("history CSV round trip") {
  const auto days = small_history(3);
  const std::string csv = history_to_csv(days);
  const auto back = load_history_csv(csv, {});
  REQUIRE(back.size() == days.size());
  for (std::size_t k = 0; k < days.size(); ++k) {
    CHECK(back[k].date == days[k].date);
    CHECK(back[k].category == days[k].category);
    CHECK((back[k].g - days[k].g).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((back[k].ghi - days[k].ghi).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(back[k].wf.size() == days[k].wf.size());
  }
  CHECK(history_to_csv(back) == csv);
}

TEST_CASE("history CSV errors carry line numbers") {
  const std::string csv = history_to_csv(small_history(2));
  std::string no_ghi = csv;
  no_ghi.replace(no_ghi.find("ghi_wm2"), 7, "irradia");
  CHECK(error_of([&] { load_history_csv(no_ghi, {}); }).find("missing column 'ghi_wm2'") != std::string::npos);

  std::string bad_number = csv;
  const auto third = bad_number.find('\n', bad_number.find('\n', bad_number.find('\n') + 1) + 1);
  const auto comma = bad_number.find(',', third + 1);
  bad_number.insert(comma + 1, "x");
  CHECK(error_of([&] { load_history_csv(bad_number, {}); }).find("line 4") != std::string::npos);

  std::string truncated = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);
  CHECK(error_of([&] { load_history_csv(truncated, {}); }).find("incomplete") != std::string::npos);
  CHECK_THROWS_AS(load_history_csv("", {}), InvalidArgument);
}

TEST_CASE("bounds and plan CSV round trips") {
  std::mt19937_64 rng(51);
  Eigen::VectorXd up(kSlots), down(kSlots);
  for (int n = 0; n < kSlots; ++n) {
    down(n) = testing::uniform(rng, 0, 100);
    up(n) = down(n) + testing::uniform(rng, 0, 20);
  }
  forecast::WfForecast wf = forecast::WfForecast::zero();
  wf.inc_up.setConstant(2.0);
  wf.inc_down.setConstant(-1.0);
  for (int n = 1; n < kSlots; ++n) wf.w_up(n) = wf.w_up(n - 1) + 2.0, wf.w_down(n) = wf.w_down(n - 1) - 1.0;
  forecast::ProsumptionBounds b2;
  forecast::WfForecast wf2;
  load_bounds_csv(bounds_to_csv({up, down}, wf), b2, wf2);
  CHECK(b2.l_up == up);
  CHECK(b2.l_down == down);
  CHECK(wf2.w_up == wf.w_up);
  CHECK(wf2.inc_down == wf.inc_down);
  CHECK_THROWS_AS(load_bounds_csv("slot,l_up\n0,1\n", b2, wf2), InvalidArgument);

  dayahead::DayAheadSolution sol;
  sol.dispatch_plan = up;
  sol.f_offset = down;
  CHECK(load_plan_csv(plan_to_csv(sol)) == up);
  CHECK_THROWS_AS(load_plan_csv("slot,g_hat_kw\n0,1\n"), InvalidArgument);
}

TEST_CASE("run config parsing") {
  const auto defaults = parse_run_config("{}");
  CHECK(defaults.forecast.scenarios == 10);
  CHECK(defaults.delta_f_max == 0.2);
  CHECK(defaults.converter.sigma_v == doctest::Approx(18.0));
  CHECK(defaults.prosumption_trace.empty());

  const auto c = parse_run_config(R"({"history": "h.csv", "target_date": "2024-05-01",
    "holidays": ["2024-05-09"], "forecast": {"scenarios": 20},
    "battery": {"soc_0": 0.4}, "converter": {"v_nom": 420},
    "day_ahead": {"objective": "minimize_droop"},
    "simulation": {"frequency": "f.csv", "droop_lag_s": 2.0}})",
                                  "/data");
  CHECK(c.history == std::filesystem::path("/data/h.csv"));
  CHECK(format_date(c.target_date) == "2024-05-01");
  CHECK(c.forecast.holidays.size() == 1);
  CHECK(c.forecast.scenarios == 20);
  CHECK(c.soc_0 == 0.4);
  CHECK(c.converter.sigma_v == doctest::Approx(720.0 / 42.0));
  CHECK(c.objective == dayahead::Objective::MinimizeDroop);
  CHECK(c.frequency_trace == std::filesystem::path("/data/f.csv"));
  CHECK(c.droop_lag_s == 2.0);

  CHECK_THROWS_AS(parse_run_config("[1]"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config("{not json"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"battery": {"soc_0": 2}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"forecast": {"lambda_forget": 0}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"day_ahead": {"objective": "fastest"}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"target_date": 5})"), InvalidArgument);
}

TEST_CASE("example configuration in the repository parses") {
  const char* src = std::getenv("GFRBESS_SOURCE_DIR");
  if (src == nullptr) return;
  const auto c = load_run_config(std::filesystem::path(src) / "config" / "example.json");
  CHECK(c.forecast.plant.capacity_kwp == 105.0);
  CHECK(c.limits.e_nom == 500.0);
}

TEST_CASE("forecast stage on a synthetic history") {
  const auto history = small_history();
  ForecastOptions opt;
  const forecast::Date target = parse_date("2024-03-26");  // Tuesday after the history
  const auto weather = default_weather(history, target, opt);
  CHECK((weather.ghi_up.array() >= weather.ghi_down.array()).all());
  const auto r = run_forecast(history, target, weather, opt, 7);
  CHECK(r.history_days_used >= 2);
  CHECK(r.scenarios.size() == 10u);
  CHECK((r.bounds.l_up.array() >= r.bounds.l_down.array()).all());
  CHECK((r.consumption.c_up.array() >= r.consumption.c_down.array()).all());
  // Noon prosumption is lower than midnight through PV.
  CHECK(r.bounds.l_up(144) < r.bounds.l_up(0));
  const auto again = run_forecast(history, target, weather, opt, 7);
  CHECK(scenarios_to_csv(again.scenarios) == scenarios_to_csv(r.scenarios));
  CHECK(bounds_to_csv(again.bounds, again.wf) == bounds_to_csv(r.bounds, r.wf));

  ForecastOptions few = opt;
  few.scenarios = 1;
  CHECK_THROWS_AS(run_forecast(history, target, weather, few, 7), InvalidArgument);
  // A Sunday target against three weekdays of history has no same-category days.
  CHECK_THROWS_AS(run_forecast(small_history(3), parse_date("2024-03-10"), weather, opt, 7), InvalidArgument);
}

TEST_CASE("make_scenario builds bounded synthetic traces") {
  const auto history = small_history();
  ForecastOptions opt;
  const forecast::Date target = parse_date("2024-03-26");
  const auto r = run_forecast(history, target, default_weather(history, target, opt), opt, 3);
  RunConfig cfg;
  const Eigen::VectorXd plan = 0.5 * (r.bounds.l_up + r.bounds.l_down);
  const auto s = make_scenario(cfg, r.bounds, plan, 100.0, 9);
  CHECK_NOTHROW(s.validate());
  CHECK(s.sigma_f == 100.0);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(kSlots);
  for (int t = 0; t < sim::kSecondsPerDay; ++t) avg(t / 300) += s.prosumption.values[t] / 300.0;
  CHECK(((avg - r.bounds.l_down).array() >= -1e-9).all());
  CHECK(((r.bounds.l_up - avg).array() >= -1e-9).all());
  const auto s2 = make_scenario(cfg, r.bounds, plan, 100.0, 9);
  CHECK(s2.frequency.values == s.frequency.values);
  CHECK(s2.prosumption.values == s.prosumption.values);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "gfrbess_pipeline_test";
  std::filesystem::remove_all(dir);
  write_file(dir / "a" / "b.txt", "hello\n");
  CHECK(read_file(dir / "a" / "b.txt") == "hello\n");
  CHECK_THROWS_AS(read_file(dir / "missing.txt"), InvalidArgument);
  std::filesystem::remove_all(dir);
}
