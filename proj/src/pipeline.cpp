#include "gfrbess/pipeline.hpp"

#include "gfrbess/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace gfrbess::pipeline {

using detail::require;
using nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> numbered_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t no = 0;
  for (auto line : split(text, '\n')) {
    ++no;
    line = trim(line);
    if (!line.empty()) out.emplace_back(no, line);
  }
  return out;
}

double number(std::string_view s, std::size_t line_no, std::string_view column) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InvalidArgument(fmt::format("line {}: column {}: cannot parse number '{}'", line_no, column, s));
  return v;
}

int integer(std::string_view s, std::size_t line_no, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw InvalidArgument(fmt::format("line {}: malformed {} '{}'", line_no, what, s));
  return v;
}

// Column index per name from a header line.
std::map<std::string, std::size_t, std::less<>> header_index(std::string_view header) {
  std::map<std::string, std::size_t, std::less<>> idx;
  const auto cols = split(header, ',');
  for (std::size_t i = 0; i < cols.size(); ++i) idx.emplace(std::string(trim(cols[i])), i);
  return idx;
}

std::size_t need(const std::map<std::string, std::size_t, std::less<>>& idx, std::string_view name) {
  const auto it = idx.find(name);
  if (it == idx.end()) throw InvalidArgument(fmt::format("line 1: missing column '{}'", name));
  return it->second;
}

}  // namespace

forecast::Date parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw InvalidArgument(fmt::format("malformed date '{}', expected YYYY-MM-DD", text));
  const int y = integer(text.substr(0, 4), 0, "year");
  const int m = integer(text.substr(5, 2), 0, "month");
  const int d = integer(text.substr(8, 2), 0, "day");
  const forecast::Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw InvalidArgument(fmt::format("invalid calendar date '{}'", text));
  return date;
}

std::string format_date(forecast::Date date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                     static_cast<unsigned>(date.day()));
}

std::vector<forecast::HistoricalDay> load_history_csv(std::string_view text, const std::set<forecast::Date>& holidays) {
  const auto lines = numbered_lines(text);
  require(!lines.empty(), "history CSV: empty input");
  const auto idx = header_index(lines.front().second);
  const std::size_t c_ts = need(idx, "timestamp");
  const std::size_t c_g = need(idx, "g_kw");
  const std::size_t c_p = need(idx, "p_kw");
  const std::size_t c_ghi = need(idx, "ghi_wm2");
  const std::size_t c_temp = need(idx, "temp_c");
  const auto wf_it = idx.find("wf_hzs");
  const bool has_wf = wf_it != idx.end();

  std::vector<forecast::HistoricalDay> days;
  forecast::HistoricalDay current;
  int slot = 0;
  const auto start_day = [&](forecast::Date date) {
    current = {};
    current.date = date;
    current.category = forecast::classify_day(date, holidays);
    current.g.resize(forecast::kSlots);
    current.p.resize(forecast::kSlots);
    current.ghi.resize(forecast::kSlots);
    current.temp.resize(forecast::kSlots);
    if (has_wf) current.wf.resize(forecast::kSlots);
    slot = 0;
  };

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto [no, line] = lines[li];
    const auto cells = split(line, ',');
    if (cells.size() != idx.size())
      throw InvalidArgument(fmt::format("line {}: expected {} columns, found {}", no, idx.size(), cells.size()));
    const std::string_view ts = trim(cells[c_ts]);
    if (ts.size() != 16 || (ts[10] != 'T' && ts[10] != ' ') || ts[13] != ':')
      throw InvalidArgument(fmt::format("line {}: malformed timestamp '{}', expected YYYY-MM-DDTHH:MM", no, ts));
    forecast::Date date;
    try {
      date = parse_date(ts.substr(0, 10));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(fmt::format("line {}: {}", no, e.what()));
    }
    const int minute = integer(ts.substr(11, 2), no, "hour") * 60 + integer(ts.substr(14, 2), no, "minute");
    if (slot == 0 && minute == 0) start_day(date);
    if (date != current.date || minute != slot * 5)
      throw InvalidArgument(fmt::format("line {}: expected slot {:02d}:{:02d} of {}", no, slot * 5 / 60, slot * 5 % 60,
                                        format_date(current.date)));
    current.g(slot) = number(cells[c_g], no, "g_kw");
    current.p(slot) = number(cells[c_p], no, "p_kw");
    current.ghi(slot) = number(cells[c_ghi], no, "ghi_wm2");
    current.temp(slot) = number(cells[c_temp], no, "temp_c");
    if (has_wf) current.wf(slot) = number(cells[wf_it->second], no, "wf_hzs");
    if (++slot == forecast::kSlots) {
      if (!days.empty() && std::chrono::sys_days{current.date} <= std::chrono::sys_days{days.back().date})
        throw InvalidArgument(fmt::format("line {}: days must be in increasing order", no));
      days.push_back(std::move(current));
      slot = 0;
    }
  }
  if (slot != 0) throw InvalidArgument(fmt::format("history CSV: last day {} is incomplete", format_date(current.date)));
  require(!days.empty(), "history CSV: no complete day");
  return days;
}

std::string history_to_csv(const std::vector<forecast::HistoricalDay>& days) {
  const bool has_wf = !days.empty() && days.front().wf.size() == forecast::kSlots;
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "timestamp,g_kw,p_kw,ghi_wm2,temp_c{}\n", has_wf ? ",wf_hzs" : "");
  for (const auto& d : days) {
    const std::string date = format_date(d.date);
    for (int n = 0; n < forecast::kSlots; ++n) {
      fmt::format_to(std::back_inserter(buf), "{}T{:02d}:{:02d},{:.10g},{:.10g},{:.10g},{:.10g}", date, n * 5 / 60,
                     n * 5 % 60, d.g(n), d.p(n), d.ghi(n), d.temp(n));
      if (has_wf) fmt::format_to(std::back_inserter(buf), ",{:.10g}", d.wf(n));
      fmt::format_to(std::back_inserter(buf), "\n");
    }
  }
  return fmt::to_string(buf);
}

WeatherForecast default_weather(const std::vector<forecast::HistoricalDay>& history, forecast::Date target,
                                const ForecastOptions& options) {
  require(!history.empty(), "weather forecast: empty history");
  require(options.ghi_band >= 0 && options.ghi_band < 1, "weather forecast: ghi_band must lie in [0, 1)");
  const Eigen::VectorXd clear = sim::clear_sky_ghi(target, options.plant);
  return {clear * (1.0 + options.ghi_band), clear * (1.0 - options.ghi_band), history.back().temp};
}

ForecastResult run_forecast(const std::vector<forecast::HistoricalDay>& history, forecast::Date target,
                            const WeatherForecast& weather, const ForecastOptions& options, std::uint64_t seed) {
  options.plant.validate();
  require(options.scenarios >= 2, "forecast: at least two scenarios required");
  ForecastResult r;
  r.target = target;
  r.category = forecast::classify_day(target, options.holidays);
  r.stats = forecast::CategoryStats::empty(options.lambda_forget);
  std::vector<Eigen::VectorXd> wf_history;
  for (const auto& day : history) {
    if (day.wf.size() == forecast::kSlots) wf_history.push_back(day.wf);
    if (day.category != r.category) continue;
    // Production enters the disaggregation with the load sign (injection negative).
    const Eigen::VectorXd pv = forecast::pv_estimate(day.ghi, day.temp, options.plant, day.date);
    r.stats = forecast::update_stats(r.stats, forecast::disaggregate(day, -pv));
  }
  r.history_days_used = r.stats.n_days;
  if (r.stats.n_days < 2)
    throw InvalidArgument(fmt::format("forecast: need at least two history days of category {}, found {}",
                                      forecast::to_string(r.category), r.stats.n_days));
  r.scenarios = forecast::sample_scenarios(r.stats, options.scenarios, seed);
  r.consumption = forecast::envelope(r.scenarios);
  r.pv = forecast::pv_bounds(weather.ghi_up, weather.ghi_down, options.plant, weather.temp, target);
  r.bounds = forecast::prosumption_bounds(r.consumption.c_up, r.consumption.c_down, r.pv.pv_up, r.pv.pv_down);
  r.wf = wf_history.empty() ? forecast::WfForecast::zero() : forecast::fit_wf_ar(wf_history, options.ar_order);
  return r;
}

std::string bounds_to_csv(const forecast::ProsumptionBounds& bounds, const forecast::WfForecast& wf) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "slot,l_up,l_down,w_up,w_down,inc_up,inc_down\n");
  for (Eigen::Index n = 0; n < bounds.l_up.size(); ++n)
    fmt::format_to(std::back_inserter(buf), "{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", n, bounds.l_up(n),
                   bounds.l_down(n), wf.w_up(n), wf.w_down(n), wf.inc_up(n), wf.inc_down(n));
  return fmt::to_string(buf);
}

void load_bounds_csv(std::string_view text, forecast::ProsumptionBounds& bounds, forecast::WfForecast& wf) {
  const auto lines = numbered_lines(text);
  require(!lines.empty(), "bounds CSV: empty input");
  const auto idx = header_index(lines.front().second);
  const std::size_t cols[] = {need(idx, "l_up"),   need(idx, "l_down"), need(idx, "w_up"),
                              need(idx, "w_down"), need(idx, "inc_up"), need(idx, "inc_down")};
  const char* names[] = {"l_up", "l_down", "w_up", "w_down", "inc_up", "inc_down"};
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  require(n == forecast::kSlots, fmt::format("bounds CSV: expected 288 slots, found {}", n));
  Eigen::MatrixXd v(n, 6);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto [no, line] = lines[r + 1];
    const auto cells = split(line, ',');
    if (cells.size() != idx.size()) throw InvalidArgument(fmt::format("line {}: wrong column count", no));
    for (int c = 0; c < 6; ++c) v(r, c) = number(cells[cols[c]], no, names[c]);
  }
  bounds = {v.col(0), v.col(1)};
  bounds.validate();
  wf = forecast::WfForecast::zero(static_cast<int>(n));
  wf.w_up = v.col(2);
  wf.w_down = v.col(3);
  wf.inc_up = v.col(4);
  wf.inc_down = v.col(5);
  wf.inc_point = 0.5 * (wf.inc_up + wf.inc_down);
  wf.w_point = 0.5 * (wf.w_up + wf.w_down);
}

std::string scenarios_to_csv(const std::vector<Eigen::VectorXd>& scenarios) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "scenario");
  const Eigen::Index n = scenarios.empty() ? 0 : scenarios.front().size();
  for (Eigen::Index k = 0; k < n; ++k) fmt::format_to(std::back_inserter(buf), ",s{}", k);
  fmt::format_to(std::back_inserter(buf), "\n");
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    fmt::format_to(std::back_inserter(buf), "{}", s);
    for (Eigen::Index k = 0; k < n; ++k) fmt::format_to(std::back_inserter(buf), ",{:.10g}", scenarios[s](k));
    fmt::format_to(std::back_inserter(buf), "\n");
  }
  return fmt::to_string(buf);
}

std::string plan_to_csv(const dayahead::DayAheadSolution& solution) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "slot,g_hat_kw,f_offset_kw\n");
  for (Eigen::Index n = 0; n < solution.dispatch_plan.size(); ++n)
    fmt::format_to(std::back_inserter(buf), "{},{:.17g},{:.17g}\n", n, solution.dispatch_plan(n),
                   solution.f_offset(n));
  return fmt::to_string(buf);
}

Eigen::VectorXd load_plan_csv(std::string_view text) {
  const auto lines = numbered_lines(text);
  require(!lines.empty(), "plan CSV: empty input");
  const auto idx = header_index(lines.front().second);
  const std::size_t c = need(idx, "g_hat_kw");
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  require(n == forecast::kSlots, fmt::format("plan CSV: expected 288 slots, found {}", n));
  Eigen::VectorXd plan(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto [no, line] = lines[r + 1];
    const auto cells = split(line, ',');
    if (cells.size() != idx.size()) throw InvalidArgument(fmt::format("line {}: wrong column count", no));
    plan(r) = number(cells[c], no, "g_hat_kw");
  }
  return plan;
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  c.raw_json = std::string(json_text);
  try {
    const json doc = json::parse(json_text);
    require(doc.is_object(), "config: top level must be an object");
    if (doc.contains("history")) c.history = resolve(base_dir, doc.at("history").get<std::string>());
    if (doc.contains("target_date")) c.target_date = parse_date(doc.at("target_date").get<std::string>());
    if (doc.contains("holidays"))
      for (const auto& h : doc.at("holidays")) c.forecast.holidays.insert(parse_date(h.get<std::string>()));

    if (doc.contains("pv")) {
      const auto& j = doc.at("pv");
      auto& p = c.forecast.plant;
      read(j, "capacity_kwp", p.capacity_kwp);
      read(j, "tilt_deg", p.tilt_deg);
      read(j, "azimuth_deg", p.azimuth_deg);
      read(j, "gamma_temp", p.gamma_temp);
      read(j, "k_noct", p.k_noct);
      read(j, "latitude_deg", p.latitude_deg);
      read(j, "longitude_deg", p.longitude_deg);
      read(j, "utc_offset_h", p.utc_offset_h);
      read(j, "diffuse_fraction", p.diffuse_fraction);
      p.validate();
    }
    if (doc.contains("forecast")) {
      const auto& j = doc.at("forecast");
      read(j, "scenarios", c.forecast.scenarios);
      read(j, "lambda_forget", c.forecast.lambda_forget);
      read(j, "ar_order", c.forecast.ar_order);
      read(j, "ghi_band", c.forecast.ghi_band);
      require(c.forecast.lambda_forget > 0 && c.forecast.lambda_forget <= 1,
              "config: forecast.lambda_forget must lie in (0, 1]");
    }
    if (doc.contains("battery")) {
      const auto& j = doc.at("battery");
      if (j.contains("ttc")) c.ttc = battery::load_ttc_params(j.dump());
      if (j.contains("limits")) c.limits = battery::load_limits(j.dump());
      read(j, "soc_0", c.soc_0);
    }
    c.converter = realtime::ConverterConfig::with_rating(c.limits.s_nom, c.converter.sigma_f);
    if (doc.contains("converter")) {
      const auto& j = doc.at("converter");
      read(j, "eta", c.converter.eta);
      read(j, "lambda_p", c.converter.lambda_p);
      read(j, "lambda_q", c.converter.lambda_q);
      read(j, "v_nom", c.converter.v_nom);
      c.converter.sigma_v = c.limits.s_nom / (0.1 * c.converter.v_nom);
      read(j, "sigma_v", c.converter.sigma_v);
      read(j, "x_t", c.converter.x_t);
      read(j, "turns_ratio", c.converter.turns_ratio);
      if (j.contains("polygon_overrides"))
        c.polygons = realtime::load_polygon_overrides(
            read_file(resolve(base_dir, j.at("polygon_overrides").get<std::string>())));
    }
    c.converter.validate();
    if (doc.contains("day_ahead")) {
      const auto& j = doc.at("day_ahead");
      read(j, "delta_f_max", c.delta_f_max);
      if (j.contains("objective")) {
        const auto o = j.at("objective").get<std::string>();
        require(o == "maximize_droop" || o == "minimize_droop", "config: day_ahead.objective is invalid");
        c.objective = o == "maximize_droop" ? dayahead::Objective::MaximizeDroop : dayahead::Objective::MinimizeDroop;
      }
    }
    if (doc.contains("simulation")) {
      const auto& j = doc.at("simulation");
      if (j.contains("prosumption") && j.at("prosumption").get<std::string>() != "synthetic")
        c.prosumption_trace = resolve(base_dir, j.at("prosumption").get<std::string>());
      if (j.contains("frequency") && j.at("frequency").get<std::string>() != "synthetic")
        c.frequency_trace = resolve(base_dir, j.at("frequency").get<std::string>());
      read(j, "roughness", c.roughness);
      read(j, "spikes", c.spikes);
      read(j, "freq_sigma_hz", c.freq_sigma_hz);
      read(j, "freq_theta", c.freq_theta);
      read(j, "droop_lag_s", c.droop_lag_s);
      read(j, "track_dispatch", c.track_dispatch);
    }
    require(c.soc_0 >= 0 && c.soc_0 <= 1, "config: battery.soc_0 must lie in [0, 1]");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

realtime::CapabilityModel capability_for(const RunConfig& config) {
  realtime::CapabilityModel m = realtime::CapabilityModel::from_limits(config.limits, config.converter.eta);
  m.polygons = config.polygons;
  m.validate();
  return m;
}

sim::ScenarioSpec make_scenario(const RunConfig& config, const forecast::ProsumptionBounds& bounds,
                                const Eigen::VectorXd& plan, double sigma_f, std::uint64_t seed) {
  sim::ScenarioSpec s;
  s.seed = seed;
  s.prosumption = config.prosumption_trace.empty()
                      ? sim::synth_prosumption(bounds, seed, config.roughness, config.spikes)
                      : sim::load_trace_csv(read_file(config.prosumption_trace), sim::Unit::kW);
  s.frequency = config.frequency_trace.empty()
                    ? sim::synth_frequency(seed ^ 0x9E3779B97F4A7C15ULL, config.freq_sigma_hz, config.freq_theta)
                    : sim::load_trace_csv(read_file(config.frequency_trace), sim::Unit::Hz);
  s.dispatch_plan = plan;
  s.sigma_f = sigma_f;
  s.soc_0 = config.soc_0;
  s.params = config.ttc;
  s.limits = config.limits;
  s.converter = config.converter;
  s.capability = capability_for(config);
  s.droop_lag_s = config.droop_lag_s;
  s.track_dispatch = config.track_dispatch;
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace gfrbess::pipeline
