#include "gfrbess/battery_model.hpp"

#include "gfrbess/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace gfrbess::battery {

using detail::require;

namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) require(std::isfinite(v), std::string(what) + ": non-finite input");
}

}  // namespace

const TtcBin& TtcParams::bin_for(double soc) const {
  require(std::isfinite(soc), "ttc: non-finite SOC");
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const TtcBin& b = bins[k];
    const bool last = k + 1 == bins.size();
    if (soc >= b.soc_lo && (soc < b.soc_hi || (last && soc <= b.soc_hi))) return b;
  }
  throw InvalidArgument("ttc: no parameter bin covers SOC " + std::to_string(soc));
}

void TtcParams::validate() const {
  require(!bins.empty(), "ttc: at least one SOC bin required");
  require(bins.front().soc_lo == 0.0, "ttc: SOC bins must start at 0");
  require(bins.back().soc_hi == 1.0, "ttc: SOC bins must end at 1");
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const TtcBin& b = bins[k];
    require(b.soc_lo < b.soc_hi, "ttc: empty SOC bin");
    if (k > 0) require(bins[k - 1].soc_hi == b.soc_lo, "ttc: SOC bins leave a gap or overlap");
    require(b.e_m > 0 && b.r_series > 0, "ttc: e_m and r_series must be positive");
    for (const RcBranch& rc : b.branches) require(rc.r_ohm > 0 && rc.c_farad > 0, "ttc: RC values must be positive");
  }
}

TtcParams TtcParams::synthetic_default() {
  constexpr int kBins = 10;
  constexpr std::array<double, 3> kTau{10.0, 200.0, 3000.0};
  constexpr std::array<double, 3> kR{0.002, 0.003, 0.004};
  TtcParams p;
  for (int k = 0; k < kBins; ++k) {
    TtcBin b;
    b.soc_lo = static_cast<double>(k) / kBins;
    b.soc_hi = static_cast<double>(k + 1) / kBins;
    const double mid = 0.5 * (b.soc_lo + b.soc_hi);
    b.e_m = 590.0 + (730.0 - 590.0) * mid;
    b.r_series = 0.005;
    for (int j = 0; j < 3; ++j) b.branches[j] = RcBranch{kR[j], kTau[j] / kR[j]};
    p.bins.push_back(b);
  }
  p.bins.back().soc_hi = 1.0;
  return p;
}

BatteryState BatteryState::at_rest(double soc, const TtcParams& params, double timestamp) {
  BatteryState s;
  s.soc = soc;
  s.x.setZero();
  s.v_dc = params.bin_for(soc).e_m;
  s.timestamp = timestamp;
  return s;
}

void BatteryLimits::validate() const {
  require(i_min < i_max, "limits: i_min must be below i_max");
  require(di_min < di_max, "limits: di_min must be below di_max");
  require(v_min < v_max, "limits: v_min must be below v_max");
  require(soc_min < soc_max, "limits: soc_min must be below soc_max");
  require(p_min < p_max, "limits: p_min must be below p_max");
  require(c_nom > 0 && e_nom > 0 && s_nom > 0, "limits: c_nom, e_nom and s_nom must be positive");
}

double soc_step(double soc, double current_a, double dt_s, double c_nom_ah) {
  require_finite({soc, current_a, dt_s, c_nom_ah}, "soc_step");
  require(c_nom_ah > 0, "soc_step: c_nom must be positive");
  require(dt_s > 0, "soc_step: dt must be positive");
  return soc + (dt_s / 3600.0) * current_a / c_nom_ah;
}

BatteryState ttc_step(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params) {
  require_finite({state.soc, state.x(0), state.x(1), state.x(2), i_dc, dt_s}, "ttc_step");
  require(dt_s > 0, "ttc_step: dt must be positive");
  const TtcBin& b = params.bin_for(state.soc);
  BatteryState next = state;
  for (int j = 0; j < 3; ++j) {
    const RcBranch& rc = b.branches[j];
    const double decay = std::exp(-dt_s / rc.tau_s());
    next.x(j) = decay * state.x(j) + rc.r_ohm * (1.0 - decay) * i_dc;
  }
  next.v_dc = b.e_m + b.r_series * i_dc + next.x.sum();
  next.timestamp = state.timestamp + dt_s;
  return next;
}

BatteryState battery_step(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params,
                          double c_nom_ah) {
  BatteryState next = ttc_step(state, i_dc, dt_s, params);
  next.soc = soc_step(state.soc, i_dc, dt_s, c_nom_ah);
  return next;
}

Eigen::VectorXd TransitionMatrices::voltage(const Eigen::Vector3d& x, const Eigen::VectorXd& current) const {
  return phi_v * x + psi_i_v * current + psi_1_v;
}

Eigen::VectorXd TransitionMatrices::soc(double soc_k, const Eigen::VectorXd& current) const {
  return phi_soc * soc_k + psi_i_soc * current;
}

TransitionMatrices build_transition_matrices(const TtcParams& params, double soc, int horizon, double dt_s,
                                             double c_nom_ah) {
  require(horizon >= 1, "transition matrices: horizon must be at least 1");
  require(dt_s > 0 && c_nom_ah > 0, "transition matrices: dt and c_nom must be positive");
  const TtcBin& b = params.bin_for(soc);

  Eigen::Vector3d decay;
  Eigen::Vector3d gain;
  for (int j = 0; j < 3; ++j) {
    decay(j) = std::exp(-dt_s / b.branches[j].tau_s());
    gain(j) = b.branches[j].r_ohm * (1.0 - decay(j));
  }

  TransitionMatrices m;
  m.phi_v.resize(horizon, 3);
  m.psi_i_v = Eigen::MatrixXd::Zero(horizon, horizon);
  m.psi_1_v = Eigen::VectorXd::Constant(horizon, b.e_m);
  m.phi_soc = Eigen::VectorXd::Ones(horizon);
  m.psi_i_soc = Eigen::MatrixXd::Zero(horizon, horizon);

  // decay^(steps) per branch, built incrementally.
  Eigen::Vector3d power = decay;
  for (int row = 0; row < horizon; ++row) {
    m.phi_v.row(row) = power.transpose();
    power = power.cwiseProduct(decay);
  }
  // Influence of current at step l on voltage at end of step row >= l.
  Eigen::Vector3d lag = Eigen::Vector3d::Ones();
  for (int d = 0; d < horizon; ++d) {
    const double coeff = lag.cwiseProduct(gain).sum() + (d == 0 ? b.r_series : 0.0);
    for (int l = 0; l + d < horizon; ++l) m.psi_i_v(l + d, l) = coeff;
    lag = lag.cwiseProduct(decay);
  }
  const double beta = dt_s / 3600.0 / c_nom_ah;
  for (int row = 0; row < horizon; ++row)
    for (int l = 0; l <= row; ++l) m.psi_i_soc(row, l) = beta;
  return m;
}

double ac_to_dc_power(double p_ac_kw, double eta) {
  require(std::isfinite(p_ac_kw), "ac_to_dc_power: non-finite power");
  require(eta > 0 && eta <= 1, "ac_to_dc_power: efficiency must lie in (0, 1]");
  return p_ac_kw >= 0 ? eta * p_ac_kw : p_ac_kw / eta;
}

double dc_to_ac_power(double p_dc_kw, double eta) {
  require(std::isfinite(p_dc_kw), "dc_to_ac_power: non-finite power");
  require(eta > 0 && eta <= 1, "dc_to_ac_power: efficiency must lie in (0, 1]");
  return p_dc_kw >= 0 ? p_dc_kw / eta : eta * p_dc_kw;
}

double terminal_voltage(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params) {
  return ttc_step(state, i_dc, dt_s, params).v_dc;
}

double dc_current_from_power(double p_dc_kw, const BatteryState& state, const TtcParams& params, double dt_s) {
  require(std::isfinite(p_dc_kw), "dc_current_from_power: non-finite power");
  if (p_dc_kw == 0.0) return 0.0;
  require(state.v_dc > 0, "dc_current_from_power: terminal voltage must be positive");

  double current = 1000.0 * p_dc_kw / state.v_dc;
  for (int iter = 0; iter < 20; ++iter) {
    const double v = terminal_voltage(state, current, dt_s, params);
    if (!(v > 0)) throw InfeasibleOperatingPoint("dc_current_from_power: non-positive terminal voltage");
    const double next = 1000.0 * p_dc_kw / v;
    if (std::abs(next - current) < 1e-6) return next;
    current = next;
  }
  throw NumericFailure("dc_current_from_power: fixed point did not converge in 20 iterations");
}

namespace {

TtcParams parse_ttc(const nlohmann::json& j) {
  if (j.is_string()) {
    require(j.get<std::string>() == "synthetic_default", "ttc: unknown preset '" + j.get<std::string>() + "'");
    return TtcParams::synthetic_default();
  }
  TtcParams p;
  for (const auto& jb : j.at("bins")) {
    TtcBin b;
    b.soc_lo = jb.at("soc_lo").get<double>();
    b.soc_hi = jb.at("soc_hi").get<double>();
    b.e_m = jb.at("e_m").get<double>();
    b.r_series = jb.at("r_series").get<double>();
    const auto& br = jb.at("branches");
    require(br.is_array() && br.size() == 3, "ttc: exactly three RC branches per bin");
    for (std::size_t k = 0; k < 3; ++k) b.branches[k] = RcBranch{br[k].at("r").get<double>(), br[k].at("c").get<double>()};
    p.bins.push_back(b);
  }
  return p;
}

}  // namespace

TtcParams load_ttc_params(const std::string& json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    TtcParams p = parse_ttc(doc.contains("ttc") ? doc.at("ttc") : doc);
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("ttc config: ") + e.what());
  }
}

BatteryLimits load_limits(const std::string& json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    const auto& j = doc.contains("limits") ? doc.at("limits") : doc;
    BatteryLimits l;
    auto read = [&](const char* key, double& field) {
      if (j.contains(key)) field = j.at(key).get<double>();
    };
    read("i_min", l.i_min);
    read("i_max", l.i_max);
    read("di_min", l.di_min);
    read("di_max", l.di_max);
    read("v_min", l.v_min);
    read("v_max", l.v_max);
    read("soc_min", l.soc_min);
    read("soc_max", l.soc_max);
    read("c_nom", l.c_nom);
    read("e_nom", l.e_nom);
    read("p_min", l.p_min);
    read("p_max", l.p_max);
    read("s_nom", l.s_nom);
    l.validate();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("limits config: ") + e.what());
  }
}

}  // namespace gfrbess::battery
