"""End-to-end pipeline commands.

Subcommands: ``generate`` (synthetic panel), ``calibrate`` (indicators +
danger zones), ``backtest`` (active vs passive curves), ``rsp`` (random
baseline distributions), ``report`` (merged summary).  Every command
drops a manifest next to its outputs; feeding that manifest back as
``--config`` reproduces the outputs byte-for-byte.

Exit codes: 0 success, 1 user error (bad config, missing artifacts,
invalid data), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, evaluation, spectra, strategy
from .calibration import HorizonConfig, calibrate_indicators, calibration_length, forward_mdd_series
from .config import PRESETS, RunConfig, load_config
from .evaluation import RspConfig, compare, fan_chart, rsp_paths
from .indicators import IndicatorPanel, compute_indicators, enumerate_indicators, panel_to_csv
from .market_data import DataValidationError, load_dataset, write_dataset_csvs
from .spectra import WindowSpec
from .strategy import ORDER_NAMES, EquityCurve, StrategyParams, curve_to_csv, run_backtest
from .synthetic import ScenarioSpec, crash_scenario, generate, load_scenario, save_scenario

logger = logging.getLogger(__name__)


class UserError(Exception):
    """Expected failure: bad inputs, missing artifacts, invalid config."""


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(cfg: RunConfig, out_dir: Path, command: str) -> None:
    _write_json(out_dir / f"{command}_manifest.json", {
        "command": command,
        "version": __version__,
        "config_hash": cfg.hash(),
        "config": cfg.to_jsonable(),
    })


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario_from_config(cfg: RunConfig) -> ScenarioSpec | None:
    if cfg.scenario_file:
        return load_scenario(cfg.scenario_file)
    if cfg.scenario:
        return ScenarioSpec.from_jsonable(cfg.scenario)
    return None


def _dataset_from_config(cfg: RunConfig):
    if cfg.dataset_manifest:
        return load_dataset(cfg.dataset_manifest, horizon=cfg.horizon)
    scenario = _scenario_from_config(cfg)
    if scenario is not None:
        return generate(scenario)
    raise UserError("config names neither a dataset_manifest nor a scenario")


def _geometry(dataset, cfg: RunConfig) -> tuple[WindowSpec, int]:
    spec = WindowSpec.for_components(dataset.n_components)
    k_cal = calibration_length(spec.t)
    need = k_cal + cfg.horizon + 1
    if dataset.n_days < need:
        raise UserError(f"panel has {dataset.n_days} days, needs at least {need} "
                        f"(K={k_cal} + H={cfg.horizon} + 1)")
    return spec, k_cal


def cmd_generate(cfg: RunConfig) -> int:
    """Write a synthetic dataset (six CSVs + manifest + scenario echo)."""
    scenario = _scenario_from_config(cfg)
    if scenario is None:
        raise UserError("generate needs a scenario (scenario_file or inline scenario)")
    out = _out_dir(cfg)
    dataset = generate(scenario)
    manifest_path = write_dataset_csvs(dataset, out)
    save_scenario(scenario, out / "scenario.json")
    _write_manifest(cfg, out, "generate")
    logger.info("wrote %d-component, %d-day panel under %s",
                dataset.n_components, dataset.n_days, out)
    print(f"generated dataset: {manifest_path}")
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    """Compute the indicator panel and danger zones; write all artifacts."""
    out = _out_dir(cfg)
    dataset = _dataset_from_config(cfg)
    spec, k_cal = _geometry(dataset, cfg)
    horizon_cfg = HorizonConfig(horizon=cfg.horizon, mdd_threshold=cfg.mdd_threshold)

    panel, history = compute_indicators(
        dataset, spec, k_cal,
        rho_scope=cfg.reference_rho_scope,
        replications=cfg.replications,
        seed=cfg.reference_seed,
        hellinger_mode=cfg.hellinger_mode,
    )
    zones, _, _ = calibrate_indicators(panel.values, panel.anchors,
                                       dataset.index_price, k_cal, horizon_cfg)

    panel_to_csv(panel, out / "indicators.csv")
    _write_json(out / "references.json", panel.reference_set.to_jsonable())

    uncalibrated = sorted(name for name, z in zones.items() if z is None)
    zone_payload = {
        "n_components": dataset.n_components,
        "window": spec.t,
        "k_calibration": k_cal,
        "horizon": cfg.horizon,
        "mdd_threshold": cfg.mdd_threshold,
        "uncalibrated": uncalibrated,
        "indicators": {
            name: (None if zone is None else {
                "lo": zone.lo,
                "hi": zone.hi,
                "support_count": zone.support_count,
                "survivor_count": zone.survivor_count,
                "clipped_range": list(zone.clipped_range),
            })
            for name, zone in sorted(zones.items())
        },
    }
    _write_json(out / "zones.json", zone_payload)
    if uncalibrated:
        logger.warning("%d indicator(s) abstain (no point above threshold %.3f): %s",
                       len(uncalibrated), cfg.mdd_threshold, ", ".join(uncalibrated))

    # scatter CSVs mirror the calibration figures: every anchor whose
    # forward window fits in the panel, flagged in/out of sample
    scatter_dir = out / "scatter"
    scatter_dir.mkdir(exist_ok=True)
    has_mdd = panel.anchors + cfg.horizon <= dataset.n_days - 1
    scatter_anchors = panel.anchors[has_mdd]
    mdds = forward_mdd_series(dataset.index_price, scatter_anchors, cfg.horizon)
    dates = [dataset.calendar.dates[i] for i in scatter_anchors]
    in_sample = scatter_anchors <= k_cal
    for ind in enumerate_indicators():
        df = pd.DataFrame({
            "value": panel.values[ind.name][has_mdd],
            "forward_mdd": mdds,
            "in_sample": in_sample.astype(int),
        }, index=pd.Index(dates, name="date"))
        df.to_csv(scatter_dir / f"{ind.name}.csv", float_format="%.17g")

    if cfg.dump_spectra:
        spectra.dump_spectra_csv(history, dataset.calendar, out)

    _write_manifest(cfg, out, "calibrate")
    print(f"calibrated {29 - len(uncalibrated)}/29 indicators "
          f"(K={k_cal}, T={spec.t}, threshold={cfg.mdd_threshold})")
    return 0


def _load_calibration_artifacts(cfg: RunConfig, dataset) -> tuple[IndicatorPanel, dict]:
    out = Path(cfg.output_dir)
    zones_path = out / "zones.json"
    panel_path = out / "indicators.csv"
    if not zones_path.exists() or not panel_path.exists():
        raise UserError(f"calibration artifacts missing under {out}; "
                        "run `crisislab calibrate` first or pass --calibrate")
    with open(zones_path) as fh:
        zone_payload = json.load(fh)

    df = pd.read_csv(panel_path, index_col="date", float_precision="round_trip")
    date_index = {d: i for i, d in enumerate(dataset.calendar.dates)}
    try:
        anchors = np.array([date_index[d] for d in df.index], dtype=int)
    except KeyError as exc:
        raise UserError(f"indicators.csv date {exc} is not in the dataset calendar; "
                        "artifacts belong to a different dataset") from exc
    panel = IndicatorPanel(anchors=anchors,
                           values={c: df[c].to_numpy() for c in df.columns},
                           dates=list(df.index))
    return panel, zone_payload


def cmd_backtest(cfg: RunConfig, calibrate_first: bool = False) -> int:
    """Run the active strategy against the passive portfolio."""
    if calibrate_first:
        cmd_calibrate(cfg)
    out = _out_dir(cfg)
    dataset = _dataset_from_config(cfg)
    _, k_cal = _geometry(dataset, cfg)
    panel, zone_payload = _load_calibration_artifacts(cfg, dataset)
    if zone_payload["k_calibration"] != k_cal:
        raise UserError("calibration artifacts were built for a different panel geometry")

    params = StrategyParams(
        mdd_threshold=cfg.mdd_threshold,
        sensitivity=cfg.sensitivity,
        horizon=cfg.horizon,
        execution_lag_days=cfg.execution_lag_days,
    )
    zones = _zones_from_payload(zone_payload)
    curve = run_backtest(dataset, panel, zones, params, k_cal,
                         initial_cash=cfg.initial_cash,
                         initial_shares=cfg.initial_shares)
    curve_to_csv(curve, out / "equity_curve.csv")

    report = compare(curve, None, convention=cfg.sharpe_convention)
    payload = report.to_jsonable()
    payload.update({
        "start_date": curve.dates[0],
        "end_date": curve.dates[-1],
        "n_decision_dates": len(curve.dates),
        "parameters": {"mdd_threshold": cfg.mdd_threshold,
                       "sensitivity": cfg.sensitivity,
                       "horizon": cfg.horizon},
    })
    _write_json(out / "performance.json", payload)
    _write_manifest(cfg, out, "backtest")
    print(f"backtest over {len(curve.dates)} dates: "
          f"{curve.order_counts['buy']} buy / {curve.order_counts['stay']} stay / "
          f"{curve.order_counts['sell']} sell orders")
    return 0


def _zones_from_payload(zone_payload: dict) -> dict:
    from .calibration import DangerZone

    zones = {}
    for name, entry in zone_payload["indicators"].items():
        if entry is None:
            zones[name] = None
        else:
            zones[name] = DangerZone(lo=entry["lo"], hi=entry["hi"],
                                     support_count=entry["support_count"],
                                     survivor_count=entry["survivor_count"],
                                     clipped_range=tuple(entry["clipped_range"]))
    return zones


def _rebuild_curve(cfg: RunConfig, dataset, k_cal: int) -> EquityCurve:
    out = Path(cfg.output_dir)
    curve_path = out / "equity_curve.csv"
    if not curve_path.exists():
        raise UserError(f"{curve_path} missing; run `crisislab backtest` first")
    df = pd.read_csv(curve_path, index_col="date", float_precision="round_trip")
    name_to_code = {name: code for code, name in ORDER_NAMES.items()}
    orders = np.array([name_to_code[o] for o in df["order"]], dtype=np.int8)

    start = k_cal + cfg.horizon
    prices = dataset.index_price[start:]
    rates = dataset.riskless_rate[start - 1:dataset.n_days - 1]
    if len(prices) != len(orders):
        raise UserError("equity_curve.csv does not match the dataset span")

    from . import _kernels
    pa_values, cash, shares = _kernels.run_order_sequence(
        prices, rates, orders, cfg.initial_cash, cfg.initial_shares)
    if not np.allclose(pa_values, df["pa_value"].to_numpy(), rtol=1e-12, atol=0):
        raise UserError("equity_curve.csv disagrees with a replay of its orders; "
                        "artifacts and config are out of sync")
    pp_values, _, _ = _kernels.run_order_sequence(
        prices, rates, np.full(len(orders), strategy.STAY, dtype=np.int8),
        cfg.initial_cash, cfg.initial_shares)
    return EquityCurve(
        start_index=start,
        dates=list(df.index),
        pa_values=pa_values,
        pp_values=pp_values,
        cash=cash,
        shares=shares,
        investment_ratio=shares * prices / pa_values,
        gammas=df["gamma"].to_numpy(dtype=int),
        orders=orders,
        prices=np.ascontiguousarray(prices),
        rates=np.ascontiguousarray(rates),
        order_counts={name: int((orders == code).sum())
                      for code, name in ORDER_NAMES.items()},
    )


def cmd_rsp(cfg: RunConfig) -> int:
    """Random-same-proportion baseline distributions and fractions beaten."""
    out = _out_dir(cfg)
    dataset = _dataset_from_config(cfg)
    _, k_cal = _geometry(dataset, cfg)
    curve = _rebuild_curve(cfg, dataset, k_cal)

    rsp_cfg = RspConfig(n_paths=cfg.rsp_paths, seed=cfg.rsp_seed, mode=cfg.rsp_mode,
                        fan_sample_paths=cfg.fan_sample_paths, threads=cfg.threads)
    result = rsp_paths(curve, rsp_cfg, cfg.initial_cash, cfg.initial_shares)
    report = compare(curve, result, convention=cfg.sharpe_convention)
    _write_json(out / "rsp_summary.json", report.to_jsonable()["rsp"])

    bands = fan_chart(result)
    fan_df = pd.DataFrame(bands, index=pd.Index(curve.dates, name="date"))
    fan_df.to_csv(out / "rsp_fan.csv", float_format="%.17g")

    if cfg.rsp_metrics_csv:
        metrics_df = pd.DataFrame(result.metrics)
        metrics_df.index.name = "path"
        metrics_df.to_csv(out / "rsp_metrics.csv", float_format="%.17g")

    _write_manifest(cfg, out, "rsp")
    fractions = {m: report.rsp["metrics"][m]["fraction_beaten"]
                 for m in evaluation.METRIC_NAMES}
    print("fraction of random paths beaten: "
          + ", ".join(f"{m}={v:.3f}" for m, v in fractions.items() if v is not None))
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Merge performance and RSP artifacts into report.json / report.txt."""
    out = _out_dir(cfg)
    perf_path = out / "performance.json"
    if not perf_path.exists():
        raise UserError(f"{perf_path} missing; run `crisislab backtest` first")
    with open(perf_path) as fh:
        perf = json.load(fh)
    rsp_path = out / "rsp_summary.json"
    rsp = None
    if rsp_path.exists():
        with open(rsp_path) as fh:
            rsp = json.load(fh)

    merged = dict(perf)
    merged["rsp"] = rsp
    _write_json(out / "report.json", merged)

    lines = [
        f"crisislab report ({merged['start_date']} .. {merged['end_date']}, "
        f"{merged['n_decision_dates']} decision dates)",
        f"parameters: MDD threshold {merged['parameters']['mdd_threshold']}, "
        f"sensitivity {merged['parameters']['sensitivity']}, "
        f"horizon {merged['parameters']['horizon']}",
        f"orders: {merged['order_counts']['buy']} buy, "
        f"{merged['order_counts']['stay']} stay, {merged['order_counts']['sell']} sell",
        "",
        f"{'metric':<10}{'active':>12}{'passive':>12}{'delta':>12}"
        + (f"{'PR mean':>12}{'PA beats':>10}" if rsp else ""),
    ]

    def fmt(x):
        return "undef" if x is None else f"{x:.4f}"

    for metric in evaluation.METRIC_NAMES:
        row = (f"{metric:<10}{fmt(merged['pa'][metric]):>12}"
               f"{fmt(merged['pp'][metric]):>12}{fmt(merged['deltas'][metric]):>12}")
        if rsp:
            entry = rsp["metrics"][metric]
            beaten = entry["fraction_beaten"]
            row += (f"{fmt(entry['pr_mean']):>12}"
                    f"{(fmt(beaten) if beaten is None else f'{beaten:.2%}'):>10}")
        lines.append(row)
    if rsp:
        lines.append("")
        lines.append(f"random baseline: {rsp['n_paths']} paths, seed {rsp['seed']}, "
                     f"proportions buy/stay/sell = "
                     f"{rsp['proportions']['buy']:.3f}/{rsp['proportions']['stay']:.3f}/"
                     f"{rsp['proportions']['sell']:.3f}")
    text = "\n".join(lines) + "\n"
    with open(out / "report.txt", "w") as fh:
        fh.write(text)
    _write_manifest(cfg, out, "report")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisislab",
        description="Spectral crisis indicators, calibration and strategy backtests.")
    parser.add_argument("--version", action="version", version=f"crisislab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="config JSON/TOML or a run manifest")
        p.add_argument("--out", dest="output_dir", help="output directory")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="parameter group preset (threshold + sensitivity)")
        p.add_argument("--threshold", dest="mdd_threshold", type=float,
                       help="MDD threshold in (0,1)")
        p.add_argument("--sensitivity", type=int, help="red-flag sensitivity in [0,100]")
        p.add_argument("--horizon", type=int, help="forecast horizon in trading days")
        p.add_argument("--threads", type=int, help="worker threads for path simulation")
        p.add_argument("--dataset", dest="dataset_manifest", help="dataset manifest JSON")
        p.add_argument("--scenario", dest="scenario_file", help="scenario spec JSON")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    add_common(sub.add_parser("generate", help="write a synthetic dataset"))
    cal = add_common(sub.add_parser("calibrate", help="compute indicators and danger zones"))
    cal.add_argument("--dump-spectra", dest="dump_spectra", action="store_true",
                     default=None, help="also write per-kind eigenvalue CSVs")
    bt = add_common(sub.add_parser("backtest", help="run the active strategy"))
    bt.add_argument("--calibrate", action="store_true", dest="calibrate_first",
                    help="calibrate first if artifacts are missing")
    rsp = add_common(sub.add_parser("rsp", help="random-same-proportion baseline"))
    rsp.add_argument("--paths", dest="rsp_paths", type=int, help="number of PR paths")
    rsp.add_argument("--rsp-seed", dest="rsp_seed", type=int, help="PR master seed")
    add_common(sub.add_parser("report", help="merge artifacts into a report"))
    return parser


_OVERRIDE_KEYS = ("output_dir", "mdd_threshold", "sensitivity", "horizon", "threads",
                  "dataset_manifest", "scenario_file", "rsp_paths", "rsp_seed",
                  "dump_spectra")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
        cfg = load_config(args.config, overrides=overrides, preset=args.preset)
        if args.command == "generate":
            if cfg.scenario is None and cfg.scenario_file is None:
                cfg.scenario = crash_scenario().to_jsonable()
            return cmd_generate(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "backtest":
            return cmd_backtest(cfg, calibrate_first=args.calibrate_first)
        if args.command == "rsp":
            return cmd_rsp(cfg)
        if args.command == "report":
            return cmd_report(cfg)
        raise UserError(f"unknown command {args.command!r}")
    except (UserError, DataValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
