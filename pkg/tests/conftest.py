"""Shared fixtures: small panels for unit tests and the crash-scenario
pipeline (computed once per session) for strategy/evaluation tests."""

from dataclasses import dataclass

import pytest

from crisislab.calibration import HorizonConfig, calibrate_indicators, calibration_length
from crisislab.indicators import compute_indicators
from crisislab.spectra import WindowSpec
from crisislab.strategy import StrategyParams, run_backtest
from crisislab.synthetic import Regime, ScenarioSpec, crash_scenario, generate


@dataclass
class PipelineRun:
    dataset: object
    spec: WindowSpec
    k_calibration: int
    panel: object
    history: object
    zones: dict
    curve: object
    params: StrategyParams


def run_pipeline(dataset, mdd_threshold: float, sensitivity: int,
                 replications: int = 120, seed: int = 0,
                 hellinger_mode: str = "mass") -> PipelineRun:
    """calibrate + backtest, in memory (mirrors the CLI flow)."""
    spec = WindowSpec.for_components(dataset.n_components)
    k_cal = calibration_length(spec.t)
    panel, history = compute_indicators(
        dataset, spec, k_cal, replications=replications, seed=seed,
        hellinger_mode=hellinger_mode)
    zones, _, _ = calibrate_indicators(
        panel.values, panel.anchors, dataset.index_price, k_cal,
        HorizonConfig(horizon=100, mdd_threshold=mdd_threshold))
    params = StrategyParams(mdd_threshold=mdd_threshold, sensitivity=sensitivity)
    curve = run_backtest(dataset, panel, zones, params, k_cal)
    return PipelineRun(dataset=dataset, spec=spec, k_calibration=k_cal,
                       panel=panel, history=history, zones=zones,
                       curve=curve, params=params)


def small_scenario(seed: int = 3, n: int = 8, days: int = 80,
                   rho: float = 0.2, tail: str = "gaussian") -> ScenarioSpec:
    return ScenarioSpec(n=n, regimes=(Regime(days, 0.01, rho, tail, 0.02),), seed=seed)


@pytest.fixture(scope="session")
def small_dataset():
    """8 components, 80 days: enough for spectral unit tests (T=9)."""
    return generate(small_scenario())


@pytest.fixture(scope="session")
def crash_pipeline():
    """Full calibrate+backtest on the bundled crash scenario (seed 0)."""
    dataset = generate(crash_scenario(seed=0))
    return run_pipeline(dataset, mdd_threshold=0.10, sensitivity=70)
