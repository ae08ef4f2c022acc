"""Day-ahead dispatch, intraday MPC and grid-forming set-point control for a battery."""

from ._core import (
    BatteryLimits,
    BatteryState,
    CapabilityModel,
    DayAheadSolution,
    ErrorStats,
    ForecastResult,
    MpcResult,
    Region,
    RunConfig,
    SimulationLog,
    TrackingReport,
    TtcParams,
    cdf,
    error_stats,
    history_csv,
    load_bounds_csv,
    load_config,
    make_scenario,
    parse_config,
    rrocof,
    run_day,
    run_forecast,
    sha256_hex,
    soc_step,
    solve_day_ahead,
    solve_mpc,
    tracking_errors,
    ttc_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
