import numpy as np
import pytest

from crisislab.calibration import forward_mdd_series
from crisislab.market_data import load_dataset, write_dataset_csvs
from crisislab.synthetic import (
    Regime,
    ScenarioSpec,
    crash_scenario,
    crash_window,
    generate,
    load_scenario,
    save_scenario,
)
from tests.conftest import small_scenario


def test_same_seed_same_dataset():
    a = generate(small_scenario(seed=42))
    b = generate(small_scenario(seed=42))
    np.testing.assert_array_equal(a.prices, b.prices)
    np.testing.assert_array_equal(a.volumes, b.volumes)
    assert a.calendar.dates == b.calendar.dates
    c = generate(small_scenario(seed=43))
    assert not np.array_equal(a.prices, c.prices)


def test_same_seed_identical_files(tmp_path):
    spec = small_scenario(seed=7)
    write_dataset_csvs(generate(spec), tmp_path / "a")
    write_dataset_csvs(generate(spec), tmp_path / "b")
    for name in ("prices", "volumes", "mcap", "leverage", "index", "riskless"):
        assert (tmp_path / "a" / f"{name}.csv").read_bytes() == \
               (tmp_path / "b" / f"{name}.csv").read_bytes()


def test_generated_panel_passes_load_roundtrip(tmp_path):
    ds = generate(small_scenario(seed=5))
    assert (ds.prices > 0).all()
    manifest = write_dataset_csvs(ds, tmp_path)
    back = load_dataset(manifest, check_length=False)
    np.testing.assert_array_equal(back.prices, ds.prices)
    assert back.fill_counts == {}


def test_regime_validation():
    with pytest.raises(ValueError):
        Regime(0, 0.01, 0.1)
    with pytest.raises(ValueError):
        Regime(10, -0.01, 0.1)
    with pytest.raises(ValueError):
        Regime(10, 0.01, 1.0)
    with pytest.raises(ValueError):
        Regime(10, 0.01, 0.1, tail="cauchy")


def test_scenario_spec_roundtrip():
    spec = crash_scenario(seed=3)
    back = ScenarioSpec.from_jsonable(spec.to_jsonable())
    assert back == spec
    assert spec.days == sum(r.length for r in spec.regimes)


def test_scenario_file_roundtrip(tmp_path):
    spec = crash_scenario(seed=2)
    path = tmp_path / "scenario.json"
    save_scenario(spec, path)
    assert load_scenario(path) == spec


def test_crash_scenario_geometry():
    spec = crash_scenario()
    start, stop = crash_window(spec, after_day=600)
    assert start == 1050 and stop == 1130
    assert spec.days == 1730
    # the in-sample crash sits just past the calibration cutoff
    assert crash_window(spec, after_day=0) == (530, 580)


def test_crash_drawdown_exceeds_threshold_inside_crash():
    # the -40% log drift regime guarantees a deep forward drawdown
    spec = crash_scenario(seed=11)
    ds = generate(spec)
    start, stop = crash_window(spec, after_day=600)
    anchors = np.arange(start - 20, start + 40, 5)
    mdds = forward_mdd_series(ds.index_price, anchors, 100)
    assert mdds.max() > 0.2


def test_in_sample_crash_visible_for_calibration():
    # calibration anchors (<= 500) see the first crash in their forward windows
    spec = crash_scenario(seed=11)
    ds = generate(spec)
    anchors = np.arange(430, 501, 5)
    mdds = forward_mdd_series(ds.index_price, anchors, 100)
    assert (mdds >= 0.10).sum() >= 10


def test_drift_controls_price_level():
    calm = ScenarioSpec(n=4, regimes=(Regime(300, 0.001, 0.0, "gaussian", 0.5),), seed=0)
    ds = generate(calm)
    # +0.5 total log drift, tiny vol: end prices near exp(0.5) times start
    ratio = ds.index_price[-1] / ds.index_price[0]
    assert ratio == pytest.approx(np.exp(0.5 * 299 / 300), rel=0.05)
