import json
import time

import numpy as np
import pandas as pd
import pytest

from crisislab.cli import main
from crisislab.config import PRESETS, RunConfig, load_config
from crisislab.synthetic import Regime, ScenarioSpec, save_scenario

pytestmark = pytest.mark.slow


def small_cli_scenario(seed=21):
    """Small but complete: N=8 (T=9, K=500), two crises, 800 days."""
    return ScenarioSpec(
        n=8,
        regimes=(
            Regime(260, 0.004, 0.25, "gaussian", 0.10),
            Regime(140, 0.006, 0.75, "gaussian", -0.02),
            Regime(40, 0.015, 0.85, "student3", -0.35),
            Regime(160, 0.004, 0.25, "gaussian", 0.08),
            Regime(120, 0.006, 0.75, "gaussian", -0.02),
            Regime(40, 0.015, 0.85, "student3", -0.35),
            Regime(40, 0.004, 0.25, "gaussian", 0.02),
        ),
        seed=seed,
        base_price=1500.0,
    )


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """One full CLI pipeline: generate -> calibrate -> backtest -> rsp -> report."""
    out = tmp_path_factory.mktemp("clirun")
    scenario_path = out / "scenario_spec.json"
    save_scenario(small_cli_scenario(), scenario_path)
    config = {
        "output_dir": str(out),
        "scenario_file": str(scenario_path),
        "mdd_threshold": 0.10,
        "sensitivity": 70,
        "replications": 40,
        "rsp_paths": 200,
        "fan_sample_paths": 50,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config))

    assert main(["generate", "--config", str(config_path)]) == 0
    cfg2 = dict(config, dataset_manifest=str(out / "dataset_manifest.json"))
    config_path.write_text(json.dumps(cfg2))
    assert main(["calibrate", "--config", str(config_path)]) == 0
    assert main(["backtest", "--config", str(config_path)]) == 0
    t0 = time.monotonic()
    assert main(["rsp", "--config", str(config_path)]) == 0
    assert time.monotonic() - t0 < 60  # smoke-run budget
    assert main(["report", "--config", str(config_path)]) == 0
    return out


def test_all_artifacts_exist(run_dir):
    for name in ("prices.csv", "volumes.csv", "mcap.csv", "leverage.csv",
                 "index.csv", "riskless.csv", "dataset_manifest.json",
                 "scenario.json", "indicators.csv", "references.json",
                 "zones.json", "equity_curve.csv", "performance.json",
                 "rsp_summary.json", "rsp_fan.csv", "report.json", "report.txt"):
        assert (run_dir / name).exists(), name
    assert len(list((run_dir / "scatter").glob("*.csv"))) == 29


def test_report_schema(run_dir):
    import jsonschema

    schema = {
        "type": "object",
        "required": ["pa", "pp", "deltas", "order_counts", "parameters", "rsp"],
        "properties": {
            "pa": {"type": "object",
                   "required": ["sharpe", "perf", "vol", "mdd", "calmar"]},
            "pp": {"type": "object",
                   "required": ["sharpe", "perf", "vol", "mdd", "calmar"]},
            "order_counts": {"type": "object",
                             "required": ["buy", "stay", "sell"]},
            "rsp": {
                "type": "object",
                "required": ["n_paths", "proportions", "metrics"],
                "properties": {
                    "metrics": {
                        "type": "object",
                        "required": ["sharpe", "perf", "vol", "mdd", "calmar"],
                    },
                },
            },
        },
    }
    with open(run_dir / "report.json") as fh:
        report = json.load(fh)
    jsonschema.validate(report, schema)
    for metric in ("sharpe", "perf", "vol", "mdd", "calmar"):
        frac = report["rsp"]["metrics"][metric]["fraction_beaten"]
        assert frac is None or 0.0 <= frac <= 1.0


def test_rsp_proportions_match_order_recount(run_dir):
    curve = pd.read_csv(run_dir / "equity_curve.csv")
    with open(run_dir / "rsp_summary.json") as fh:
        rsp = json.load(fh)
    counts = curve["order"].value_counts()
    total = len(curve)
    for name in ("buy", "stay", "sell"):
        assert rsp["proportions"][name] == pytest.approx(
            counts.get(name, 0) / total)


def test_order_counts_partition_decision_dates(run_dir):
    with open(run_dir / "performance.json") as fh:
        perf = json.load(fh)
    assert sum(perf["order_counts"].values()) == perf["n_decision_dates"]


def test_equity_curve_recompute_matches_export(run_dir):
    # independent recompute of Calmar from the exported CSV
    curve = pd.read_csv(run_dir / "equity_curve.csv")
    values = curve["pa_value"].to_numpy()
    peaks = np.maximum.accumulate(values)
    mdd = float(np.max(1.0 - values / peaks))
    with open(run_dir / "performance.json") as fh:
        perf = json.load(fh)
    assert perf["pa"]["mdd"] == pytest.approx(mdd, rel=1e-12)
    if perf["pa"]["calmar"] is not None:
        assert perf["pa"]["calmar"] == pytest.approx(perf["pa"]["perf"] / mdd,
                                                     rel=1e-12)


def test_backtest_without_calibration_artifacts_fails(tmp_path):
    scenario_path = tmp_path / "scn.json"
    save_scenario(small_cli_scenario(), scenario_path)
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({
        "output_dir": str(tmp_path),
        "scenario_file": str(scenario_path),
    }))
    assert main(["backtest", "--config", str(config_path)]) == 1


def test_generate_needs_scenario_or_default(tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"output_dir": str(tmp_path)}))
    # bare generate falls back to the bundled crash scenario
    assert main(["generate", "--config", str(config_path),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dataset_manifest.json").exists()


def test_unknown_config_field_is_user_error(tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"output_dir": str(tmp_path),
                                       "bogus_knob": 3}))
    assert main(["calibrate", "--config", str(config_path)]) == 1


def test_presets_match_study_groups():
    assert PRESETS["group1"] == {"mdd_threshold": 0.20, "sensitivity": 75}
    assert PRESETS["group2"] == {"mdd_threshold": 0.15, "sensitivity": 80}
    assert PRESETS["group3"] == {"mdd_threshold": 0.10, "sensitivity": 70}


def test_preset_and_flag_override_precedence(tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"mdd_threshold": 0.33, "sensitivity": 10}))
    cfg = load_config(config_path, preset="group1")
    assert cfg.mdd_threshold == 0.20 and cfg.sensitivity == 75
    cfg = load_config(config_path, overrides={"sensitivity": 99}, preset="group1")
    assert cfg.sensitivity == 99  # flags win over presets
    assert cfg.mdd_threshold == 0.20


def test_config_accepts_toml(tmp_path):
    toml_path = tmp_path / "cfg.toml"
    toml_path.write_text('output_dir = "somewhere"\nsensitivity = 42\n')
    cfg = load_config(toml_path)
    assert cfg.output_dir == "somewhere"
    assert cfg.sensitivity == 42


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(mdd_threshold=1.5)
    with pytest.raises(ValueError):
        RunConfig(sensitivity=-1)
    with pytest.raises(ValueError):
        RunConfig(rsp_mode="shuffle")


def test_run_manifest_reproduces_outputs(run_dir):
    # byte-for-byte determinism when re-running from the manifests
    watched = ["indicators.csv", "zones.json", "references.json",
               "equity_curve.csv", "performance.json", "rsp_summary.json",
               "rsp_fan.csv", "report.json", "report.txt"]
    before = {name: (run_dir / name).read_bytes() for name in watched}
    for command in ("calibrate", "backtest", "rsp", "report"):
        manifest = run_dir / f"{command}_manifest.json"
        assert manifest.exists()
        assert main([command, "--config", str(manifest)]) == 0
    for name in watched:
        assert (run_dir / name).read_bytes() == before[name], name


def test_calm_only_scenario_all_uncalibrated(tmp_path, caplog):
    scenario = ScenarioSpec(
        n=8, regimes=(Regime(640, 0.002, 0.2, "gaussian", 0.10),), seed=5)
    scenario_path = tmp_path / "calm.json"
    save_scenario(scenario, scenario_path)
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({
        "output_dir": str(tmp_path),
        "scenario_file": str(scenario_path),
        "mdd_threshold": 0.40,
        "replications": 20,
    }))
    assert main(["calibrate", "--config", str(config_path)]) == 0
    with open(tmp_path / "zones.json") as fh:
        zones = json.load(fh)
    assert len(zones["uncalibrated"]) == 29
    assert all(entry is None for entry in zones["indicators"].values())


def test_cli_version_and_help():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_paper_scale_defaults():
    cfg = RunConfig()
    assert cfg.rsp_paths == 50_000
    assert cfg.horizon == 100
    assert cfg.initial_shares == 10_000
    assert cfg.initial_cash == 10_000_000.0


def test_dataset_asset_accessor(tmp_path):
    from crisislab.market_data import write_dataset_csvs, load_dataset
    from crisislab.synthetic import generate as gen

    ds = gen(small_cli_scenario())
    asset = ds.asset(ds.tickers[3])
    assert asset.ticker == ds.tickers[3]
    np.testing.assert_array_equal(asset.price, ds.prices[3])
    np.testing.assert_array_equal(asset.leverage, ds.leverage[3])
    with pytest.raises(KeyError):
        ds.asset("NOPE")


def test_dump_spectra_flag_writes_eigenvalue_csvs(tmp_path):
    scenario_path = tmp_path / "scn.json"
    save_scenario(small_cli_scenario(), scenario_path)
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({
        "output_dir": str(tmp_path),
        "scenario_file": str(scenario_path),
        "replications": 20,
        "dump_spectra": True,
    }))
    assert main(["calibrate", "--config", str(config_path)]) == 0
    for kind in ("A", "B0", "B1", "B2", "B3"):
        path = tmp_path / f"spectra_{kind}.csv"
        assert path.exists()
        df = pd.read_csv(path, index_col="date")
        assert list(df.columns) == [f"lambda_{i}" for i in range(1, 9)]


def test_dump_spectra_cli_flag(tmp_path):
    scenario_path = tmp_path / "scn.json"
    save_scenario(small_cli_scenario(), scenario_path)
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({
        "output_dir": str(tmp_path),
        "scenario_file": str(scenario_path),
        "replications": 20,
    }))
    assert main(["calibrate", "--config", str(config_path), "--dump-spectra"]) == 0
    assert (tmp_path / "spectra_B3.csv").exists()
