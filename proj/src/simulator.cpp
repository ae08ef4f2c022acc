#include "gfrbess/simulator.hpp"

#include "gfrbess/errors.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace gfrbess::sim {

using detail::require;

std::string to_string(Unit u) {
  switch (u) {
    case Unit::kW: return "kW";
    case Unit::Hz: return "Hz";
    case Unit::V: return "V";
    case Unit::degC: return "degC";
  }
  return "?";
}

void Trace::validate(Unit expected, double duration_s) const {
  require(unit == expected, "trace: expected unit " + to_string(expected) + ", got " + to_string(unit));
  require(dt > 0, "trace: dt must be positive");
  const double length = static_cast<double>(values.size()) * dt;
  require(std::abs(length - duration_s) < 1e-9 * duration_s,
          fmt::format("trace: covers {} s, expected {} s", length, duration_s));
  for (std::size_t i = 0; i < values.size(); ++i)
    require(std::isfinite(values[i]), fmt::format("trace: non-finite sample at index {}", i));
}

Trace synth_frequency(std::uint64_t seed, double sigma_hz, double theta) {
  require(sigma_hz >= 0 && theta > 0, "synth_frequency: sigma must be non-negative and theta positive");
  Trace tr{1.0, Unit::Hz, std::vector<double>(kSecondsPerDay)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = std::exp(-theta);
  const double s = sigma_hz * std::sqrt(1.0 - a * a);
  double x = 0.0;
  for (int t = 0; t < kSecondsPerDay; ++t) {
    tr.values[t] = std::clamp(50.0 + x, 49.8, 50.2);
    x = a * x + s * normal(rng);
  }
  return tr;
}

Trace synth_prosumption(const forecast::ProsumptionBounds& bounds, std::uint64_t seed, double roughness, bool spikes) {
  bounds.validate();
  require(roughness >= 0 && roughness <= 1, "synth_prosumption: roughness must lie in [0, 1]");
  constexpr int per_slot = kSecondsPerDay / forecast::kSlots;
  Trace tr{1.0, Unit::kW, std::vector<double>(kSecondsPerDay)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  constexpr double slot_corr = 0.95;
  constexpr double noise_corr = 0.9;
  double z = normal(rng);
  double e = 0.0;
  std::vector<double> noise(per_slot);
  for (int n = 0; n < forecast::kSlots; ++n) {
    const double mid = 0.5 * (bounds.l_up(n) + bounds.l_down(n));
    const double hw = 0.5 * (bounds.l_up(n) - bounds.l_down(n));
    z = slot_corr * z + std::sqrt(1.0 - slot_corr * slot_corr) * normal(rng);
    const double target = mid + roughness * hw * std::tanh(z);

    const double noise_std = roughness * (0.5 * hw + 1.0);
    double burst = 0.0;
    double mean = 0.0;
    for (int s = 0; s < per_slot; ++s) {
      e = noise_corr * e + std::sqrt(1.0 - noise_corr * noise_corr) * noise_std * normal(rng);
      if (spikes && uniform(rng) < 1.0 / 3600.0) burst += 20.0 * roughness;
      burst *= 0.7;
      noise[s] = e + burst;
      mean += noise[s];
    }
    mean /= per_slot;
    for (int s = 0; s < per_slot; ++s) tr.values[n * per_slot + s] = target + (noise[s] - mean);
  }
  return tr;
}

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

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw InvalidArgument(fmt::format("line {}: cannot parse number '{}'", line_no, s));
  return v;
}

}  // namespace

Trace load_trace_csv(std::string_view text, Unit unit) {
  const auto lines = lines_of(text);
  require(!lines.empty(), "trace CSV: empty input");
  const auto header = split(lines.front(), ',');
  require(header.size() == 2 && header[0] == "t_s", "trace CSV: header must be 't_s,value'");
  Trace tr{1.0, unit, {}};
  tr.values.reserve(lines.size() - 1);
  double first_t = 0.0;
  double prev_t = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 2) throw InvalidArgument(fmt::format("line {}: expected 2 columns", i + 1));
    const double t = parse_double(cells[0], i + 1);
    if (i == 1) first_t = t;
    if (i == 2) tr.dt = t - first_t;
    if (i >= 2 && std::abs((t - prev_t) - tr.dt) > 1e-9 * std::max(1.0, tr.dt))
      throw InvalidArgument(fmt::format("line {}: non-uniform sampling", i + 1));
    prev_t = t;
    tr.values.push_back(parse_double(cells[1], i + 1));
  }
  require(tr.dt > 0, "trace CSV: time stamps must increase");
  return tr;
}

std::string trace_to_csv(const Trace& trace) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "t_s,value\n");
  for (std::size_t i = 0; i < trace.values.size(); ++i)
    fmt::format_to(std::back_inserter(buf), "{},{:.12g}\n", static_cast<double>(i) * trace.dt, trace.values[i]);
  return fmt::to_string(buf);
}

Eigen::VectorXd clear_sky_ghi(forecast::Date date, const forecast::PvPlant& plant) {
  // Haurwitz clear-sky model, averaged over each slot at 1-minute resolution.
  const int doy = forecast::day_of_year(date);
  Eigen::VectorXd out(forecast::kSlots);
  for (int n = 0; n < forecast::kSlots; ++n) {
    double acc = 0.0;
    for (int m = 0; m < 5; ++m) {
      const double hour = (n * 5.0 + m + 0.5) / 60.0;
      const double cz = forecast::solar_cos_zenith(doy, hour, plant);
      if (cz > 0) acc += 1098.0 * cz * std::exp(-0.057 / cz);
    }
    out(n) = acc / 5.0;
  }
  return out;
}

Eigen::VectorXd wf_per_slot(const Trace& frequency, double f_nom) {
  frequency.validate(Unit::Hz);
  const int per_slot = static_cast<int>(std::lround(kSecondsPerDay / frequency.dt / forecast::kSlots));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(forecast::kSlots);
  for (std::size_t i = 0; i < frequency.values.size(); ++i)
    out(static_cast<Eigen::Index>(i) / per_slot) += (frequency.values[i] - f_nom) * frequency.dt;
  return out;
}

std::vector<forecast::HistoricalDay> synth_history(const SynthHistoryConfig& config) {
  require(config.days >= 1, "synth_history: at least one day required");
  require(config.load_noise_kw >= 0 && config.cloudiness >= 0, "synth_history: noise levels must be non-negative");
  config.plant.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Smooth AR(1) path over the slots with unit stationary deviation.
  const auto smooth_path = [&](double corr) {
    Eigen::VectorXd z(forecast::kSlots);
    double x = normal(rng);
    for (int n = 0; n < forecast::kSlots; ++n) {
      x = corr * x + std::sqrt(1.0 - corr * corr) * normal(rng);
      z(n) = x;
    }
    return z;
  };

  std::vector<forecast::HistoricalDay> out;
  const std::chrono::sys_days first{config.start};
  for (int d = 0; d < config.days; ++d) {
    forecast::HistoricalDay day;
    day.date = forecast::Date{first + std::chrono::days{d}};
    day.category = forecast::classify_day(day.date, {});
    const bool weekend = day.category == forecast::DayCategory::D1 || day.category == forecast::DayCategory::D2;

    Eigen::VectorXd load(forecast::kSlots);
    day.temp.resize(forecast::kSlots);
    for (int n = 0; n < forecast::kSlots; ++n) {
      const double h = (n + 0.5) / 12.0;
      const double shape = 0.85 + 0.12 * std::exp(-std::pow((h - 8.0) / 2.0, 2)) +
                           0.15 * std::exp(-std::pow((h - 19.0) / 2.5, 2));
      load(n) = config.base_load_kw * shape * (weekend ? 0.9 : 1.0);
      day.temp(n) = 10.0 + 6.0 * std::sin(2.0 * std::numbers::pi * (h - 9.0) / 24.0);
    }
    load += config.load_noise_kw * smooth_path(0.98);

    const Eigen::VectorXd clear = clear_sky_ghi(day.date, config.plant);
    const Eigen::VectorXd cloud = smooth_path(0.95);
    day.ghi = (clear.array() * (1.0 + config.cloudiness * cloud.array()).max(0.0)).matrix();
    const Eigen::VectorXd pv = forecast::pv_estimate(day.ghi, day.temp, config.plant, day.date);

    day.g = load - pv;
    day.p = Eigen::VectorXd::Zero(forecast::kSlots);
    day.wf = wf_per_slot(synth_frequency(config.seed * 1000003ULL + static_cast<std::uint64_t>(d) + 1,
                                         config.freq_sigma_hz));
    out.push_back(std::move(day));
  }
  return out;
}

void ScenarioSpec::validate() const {
  prosumption.validate(Unit::kW);
  frequency.validate(Unit::Hz);
  require(prosumption.dt == 1.0 && frequency.dt == 1.0, "scenario: traces must be sampled at 1 s");
  if (!v_mv.values.empty()) {
    v_mv.validate(Unit::V);
    require(v_mv.dt == 1.0, "scenario: voltage trace must be sampled at 1 s");
  }
  require(dispatch_plan.size() == forecast::kSlots && dispatch_plan.allFinite(),
          "scenario: dispatch plan must have 288 finite slots");
  require(sigma_f >= 0 && std::isfinite(sigma_f), "scenario: sigma_f must be non-negative");
  require(soc_0 >= 0 && soc_0 <= 1, "scenario: initial SOC must lie in [0, 1]");
  require(droop_lag_s >= 0, "scenario: droop lag must be non-negative");
  params.validate();
  limits.validate();
  capability.validate();
}

SimulationLog run_day(const ScenarioSpec& spec) {
  spec.validate();
  realtime::ConverterConfig conv = spec.converter;
  conv.sigma_f = spec.sigma_f > 0 ? spec.sigma_f : 1.0;  // only used to form f_ref
  conv.validate();
  const double eta = conv.eta;
  const double sigma = spec.sigma_f;
  const double v_mv_nominal = conv.v_nom * conv.turns_ratio;
  const double lag_gain = spec.droop_lag_s > 0 ? 1.0 - std::exp(-1.0 / spec.droop_lag_s) : 1.0;
  const int steps = mpc::kStepsPerDay;
  constexpr int per_step = 10;

  SimulationLog log;
  log.sigma_f = sigma;
  log.records.reserve(kSecondsPerDay);
  std::vector<double> l10(steps, 0.0), p10(steps, 0.0), f10(steps, 0.0);

  battery::BatteryState state = battery::BatteryState::at_rest(spec.soc_0, spec.params, 0.0);
  double p_set = 0.0;
  double i_prev = 0.0;
  double e_active = 0.0;
  unsigned mpc_flags = 0;
  double droop_state = 0.0;
  double sum_l = 0.0, sum_p = 0.0, sum_f = 0.0;

  for (int t = 0; t < kSecondsPerDay; ++t) {
    const int k = t / per_step;
    if (t % per_step == 0 && spec.track_dispatch) {
      const mpc::SlotContext ctx = mpc::slot_context(k, spec.dispatch_plan);
      if (k > ctx.k_lo) {
        mpc::MeasurementWindow w;
        w.l_hist.assign(l10.begin() + ctx.k_lo, l10.begin() + k);
        w.p_hist.assign(p10.begin() + ctx.k_lo, p10.begin() + k);
        w.f_hist.assign(f10.begin() + ctx.k_lo, f10.begin() + k);
        const double g_k = mpc::average_pcc_flow(w).value;
        const double g_plus = mpc::expected_flow(g_k, l10[k - 1], ctx);
        const double dgf = mpc::fcr_deviation(w.f_hist, sigma, conv.f_nom);
        // The FCR share of the measured flow is excluded from the target.
        e_active = mpc::energy_error(ctx.g_star, g_plus, -dgf);
        const double e_dc = battery::ac_to_dc_power(e_active, eta);
        const mpc::MpcResult r =
            mpc::solve_mpc(e_dc, state, spec.limits, spec.params, i_prev, ctx.horizon(), spec.mpc);
        p_set = battery::dc_to_ac_power(r.p_setpoint, eta);
        i_prev = r.i_traj(0);
        mpc_flags = 0;
        switch (r.diagnostics.status) {
          case mpc::MpcStatus::Optimal: break;
          case mpc::MpcStatus::Constrained: mpc_flags = kFlagMpcConstrained; break;
          case mpc::MpcStatus::NotConverged: mpc_flags = kFlagMpcNotConverged; break;
          case mpc::MpcStatus::InfeasibleFallback: mpc_flags = kFlagMpcFallback; break;
        }
        log.mpc_events.push_back({k, e_active, p_set, r.diagnostics.status, r.diagnostics.iterations});
      }
    }

    LogRecord rec;
    rec.t = t;
    rec.l_kw = spec.prosumption.values[t];
    rec.f_hz = spec.frequency.values[t];
    rec.p_set_kw = p_set;
    rec.e_k_active = e_active;
    rec.flags = mpc_flags;
    const double v_mv = spec.v_mv.values.empty() ? v_mv_nominal : spec.v_mv.values[t];

    realtime::Projection proj;
    try {
      proj = realtime::project_setpoint(p_set, 0.0, v_mv, state, conv, spec.capability, spec.params);
    } catch (const InfeasibleOperatingPoint&) {
      proj = {};
      proj.clipped = p_set != 0.0;
      proj.v_dc = state.v_dc;
      proj.v_ac = v_mv / conv.turns_ratio;
    }
    if (proj.clipped) rec.flags |= kFlagProjected;
    const realtime::ReferenceOutput refs = realtime::to_references(proj.p_star, proj.q_star, conv);
    rec.f_ref_hz = sigma > 0 ? refs.f_ref : conv.f_nom;
    rec.v_ref_v = refs.v_ref;

    const double droop_target = sigma * (rec.f_hz - conv.f_nom);
    droop_state = spec.droop_lag_s > 0 ? droop_state + lag_gain * (droop_target - droop_state) : droop_target;
    double p = proj.p_star + droop_state;
    double q = conv.sigma_v * (v_mv / conv.turns_ratio - conv.v_nom) + proj.q_star;
    try {
      const realtime::Region region = spec.capability.region(proj.v_dc, proj.v_ac, state.soc);
      if (region.margin(p, q) > 1e-9) {
        const Eigen::Vector2d x = region.project(p, q, conv.lambda_p, conv.lambda_q);
        p = x.x();
        q = x.y();
        rec.flags |= kFlagSaturated;
      }
    } catch (const InfeasibleOperatingPoint&) {
      p = 0.0;
      rec.flags |= kFlagSaturated;
    }

    double p_dc = battery::ac_to_dc_power(p, eta);
    double i = 0.0;
    battery::BatteryState next;
    bool trip = false;
    try {
      i = battery::dc_current_from_power(p_dc, state, spec.params, 1.0);
      next = battery::battery_step(state, i, 1.0, spec.params, spec.limits.c_nom);
      const auto& lim = spec.limits;
      trip = i > lim.i_max + 1e-9 || i < lim.i_min - 1e-9 || next.v_dc > lim.v_max || next.v_dc < lim.v_min ||
             next.soc > lim.soc_max + 1e-9 || next.soc < lim.soc_min - 1e-9;
    } catch (const NumericFailure&) {
      trip = true;
    } catch (const InfeasibleOperatingPoint&) {
      trip = true;
    }
    if (trip) {
      rec.flags |= kFlagProtection;
      p = p_dc = i = 0.0;
      next = battery::battery_step(state, 0.0, 1.0, spec.params, spec.limits.c_nom);
    }
    next.timestamp = t + 1.0;
    state = next;

    rec.p_bess_kw = p;
    rec.g_pcc_kw = rec.l_kw + p;
    rec.p_dc_kw = p_dc;
    rec.i_dc_a = i;
    rec.soc = state.soc;
    rec.v_dc = state.v_dc;
    log.records.push_back(rec);

    sum_l += rec.l_kw;
    sum_p += p;
    sum_f += rec.f_hz;
    if (t % per_step == per_step - 1) {
      l10[k] = sum_l / per_step;
      p10[k] = sum_p / per_step;
      f10[k] = sum_f / per_step;
      sum_l = sum_p = sum_f = 0.0;
    }
  }
  return log;
}

namespace {

constexpr const char* kLogHeader =
    "t,l_kw,p_bess_kw,g_pcc_kw,f_hz,f_ref_hz,v_ref_v,soc,v_dc,e_k_active,flags,p_set_kw,p_dc_kw,i_dc_a";

}  // namespace

std::string log_to_csv(const SimulationLog& log) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{}\n", kLogHeader);
  for (const auto& r : log.records)
    fmt::format_to(std::back_inserter(buf), "{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{},{:.12g},{:.12g},{:.12g}\n",
                   r.t, r.l_kw, r.p_bess_kw, r.g_pcc_kw, r.f_hz, r.f_ref_hz, r.v_ref_v, r.soc, r.v_dc, r.e_k_active,
                   r.flags, r.p_set_kw, r.p_dc_kw, r.i_dc_a);
  return fmt::to_string(buf);
}

SimulationLog log_from_csv(std::string_view text, double sigma_f) {
  const auto lines = lines_of(text);
  require(!lines.empty(), "log CSV: empty input");
  require(lines.front() == kLogHeader, "log CSV: unexpected header");
  SimulationLog log;
  log.sigma_f = sigma_f;
  log.records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i], ',');
    if (c.size() != 14) throw InvalidArgument(fmt::format("line {}: expected 14 columns", i + 1));
    LogRecord r;
    r.t = static_cast<int>(parse_double(c[0], i + 1));
    r.l_kw = parse_double(c[1], i + 1);
    r.p_bess_kw = parse_double(c[2], i + 1);
    r.g_pcc_kw = parse_double(c[3], i + 1);
    r.f_hz = parse_double(c[4], i + 1);
    r.f_ref_hz = parse_double(c[5], i + 1);
    r.v_ref_v = parse_double(c[6], i + 1);
    r.soc = parse_double(c[7], i + 1);
    r.v_dc = parse_double(c[8], i + 1);
    r.e_k_active = parse_double(c[9], i + 1);
    r.flags = static_cast<unsigned>(parse_double(c[10], i + 1));
    r.p_set_kw = parse_double(c[11], i + 1);
    r.p_dc_kw = parse_double(c[12], i + 1);
    r.i_dc_a = parse_double(c[13], i + 1);
    log.records.push_back(r);
  }
  return log;
}

std::string mpc_events_jsonl(const SimulationLog& log) {
  fmt::memory_buffer buf;
  for (const auto& e : log.mpc_events)
    fmt::format_to(std::back_inserter(buf),
                   "{{\"k\":{},\"e_k_kwh\":{:.12g},\"p_setpoint_kw\":{:.12g},\"status\":\"{}\",\"iterations\":{}}}\n",
                   e.k, e.e_k_kwh, e.p_setpoint_kw, mpc::to_string(e.status), e.iterations);
  return fmt::to_string(buf);
}

EnergyAudit energy_audit(const SimulationLog& log, double soc_0, double c_nom_ah) {
  require(!log.records.empty(), "energy_audit: empty log");
  EnergyAudit a;
  for (const auto& r : log.records) {
    a.dc_energy_kwh += r.p_dc_kw / 3600.0;
    a.vi_energy_kwh += r.v_dc * r.i_dc_a / 1000.0 / 3600.0;
    a.throughput_kwh += std::abs(r.p_dc_kw) / 3600.0;
    a.charge_ah += r.i_dc_a / 3600.0;
  }
  a.soc_charge_ah = c_nom_ah * (log.records.back().soc - soc_0);
  a.relative_error = a.throughput_kwh > 0 ? std::abs(a.dc_energy_kwh - a.vi_energy_kwh) / a.throughput_kwh : 0.0;
  return a;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw NumericFailure("sha256: digest failed");
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

}  // namespace gfrbess::sim
