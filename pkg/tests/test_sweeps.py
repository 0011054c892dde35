import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revham.dynamics import evolve_pure
from revham.pulses import paper_fitted_pulses
from revham.sweeps import (STRATEGIES, TABLES, Axis, DeviationSpec, SweepGrid, apply_deviation,
                           batched_fidelities, decoherence_map, deviation_grid, run_table, sidecar_path,
                           stirap_scan, write_sidecar, write_table_csv)

deviations = st.floats(-0.3, 0.3)


@pytest.fixture(scope="module")
def tables():
    return {tid: run_table(tid) for tid in TABLES}


def _row(rows, d1, d2, dT):
    return next(r for r in rows if (r.deviation.d_omega1, r.deviation.d_omega2, r.deviation.d_T) == (d1, d2, dT))


def _fidelity(d: DeviationSpec, strategy="split_clock", steps=20_000):
    ps, _ = apply_deviation(paper_fitted_pulses(), d, strategy)
    return evolve_pure(ps, steps=steps).fidelity


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_zero_deviation_is_identity(strategy):
    base = paper_fitted_pulses()
    ps, T_eff = apply_deviation(base, DeviationSpec(), strategy)
    t = np.linspace(0, 1, 101)
    assert T_eff == 1.0
    assert np.array_equal(ps.omega(0, t), base.omega(0, t))
    assert np.array_equal(ps.omega(1, t), base.omega(1, t))


def test_zero_deviation_fidelity():
    assert _fidelity(DeviationSpec()) == pytest.approx(1.0, abs=1e-3)


def test_equal_amplitude_increase():
    assert _fidelity(DeviationSpec(0.10, 0.10, 0.0)) == pytest.approx(0.9835, abs=0.01)


def test_weaker_omega2_longer_time():
    assert _fidelity(DeviationSpec(0.0, -0.10, 0.10)) == pytest.approx(0.9994, abs=0.01)


def test_split_clock_mapping():
    ps, T_eff = apply_deviation(paper_fitted_pulses(), DeviationSpec(0.1, -0.1, 0.05), "split_clock")
    assert T_eff == pytest.approx(1.05)
    assert ps.amplitude == pytest.approx((1.1 * 1.05, 0.9))
    assert ps.stretch == pytest.approx((1.0, 1.05))


def test_area_strategy_keeps_amplitude_and_stretches():
    ps, T_eff = apply_deviation(paper_fitted_pulses(), DeviationSpec(0.0, 0.0, -0.1), "area")
    assert T_eff == pytest.approx(0.9)
    assert ps.amplitude == (1.0, 1.0)
    assert ps.stretch == pytest.approx((0.9, 0.9))


@settings(max_examples=8)
@given(st.floats(-0.2, 0.2))
def test_area_time_deviation_equals_equal_amplitude_deviation(d):
    # stretching both pulses in time is a pure rescaling of the amplitude scale
    f_time = _fidelity(DeviationSpec(0.0, 0.0, d), "area", steps=2000)
    f_amp = _fidelity(DeviationSpec(d, d, 0.0), "area", steps=2000)
    assert f_time == pytest.approx(f_amp, abs=1e-10)


def test_unknown_strategy():
    with pytest.raises(ValueError, match="strategy"):
        apply_deviation(paper_fitted_pulses(), DeviationSpec(), "rescale")


@given(deviations, deviations, deviations)
def test_deviation_spec_accepts_open_interval(a, b, c):
    assert DeviationSpec(a, b, c).d_T == c


@pytest.mark.parametrize("bad", [1.0, -1.0, 2.5])
def test_deviation_spec_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        DeviationSpec(d_T=bad)


def test_table_row_counts(tables):
    assert [len(tables[t]) for t in ("I", "II", "III", "IV")] == [9, 9, 9, 8]
    assert [(r.deviation.d_omega1, r.deviation.d_omega2, r.deviation.d_T) for r in tables["I"]][:2] == \
        [(0.1, 0.1, 0.0), (0.1, 0.0, 0.0)]


def test_table_examples(tables):
    assert _row(tables["II"], -0.1, 0.0, -0.1).fidelity == pytest.approx(0.9729, abs=0.01)
    assert _row(tables["IV"], -0.1, -0.1, -0.1).fidelity == pytest.approx(0.9469, abs=0.01)
    assert _row(tables["I"], 0.0, 0.0, 0.0).fidelity == pytest.approx(1.0, abs=1e-3)


def test_table_fidelities_in_range(tables):
    F = np.array([r.fidelity for rows in tables.values() for r in rows])
    assert np.all((F >= 0) & (F <= 1 + 1e-9))


def test_sign_swap_symmetry(tables):
    up = _row(tables["I"], 0.1, 0.1, 0.0).fidelity
    down = _row(tables["I"], -0.1, -0.1, 0.0).fidelity
    assert abs(up - down) < 0.01


def test_batching_does_not_change_results():
    base = paper_fitted_pulses()
    sets = [apply_deviation(base, DeviationSpec(0.05, 0.0, dT))[0] for dT in (-0.05, 0.05, 0.0)]
    together = batched_fidelities(sets, steps=2000)
    alone = [batched_fidelities([s], steps=2000)[0] for s in sets]
    assert np.allclose(together, alone, atol=1e-13)


def test_stirap_examples():
    F = dict(stirap_scan([3.154, 15, 30]))
    assert F[3.154] == pytest.approx(0.5538, abs=0.02)
    assert F[15.0] == pytest.approx(0.9604, abs=0.02)
    assert F[30.0] == pytest.approx(0.9992, abs=0.01)


def test_decoherence_map_corner_point_and_monotonicity():
    grid = decoherence_map(Axis("g1", 0.0, 0.02, 3), Axis("g2", 0.0, 0.02, 3), steps=4000)
    F = grid.values
    assert F[0, 0] == pytest.approx(1.0, abs=1e-3)
    assert F[1, 1] == pytest.approx(0.9901, abs=0.003)
    assert np.all(np.diff(F, axis=0) <= 1e-12)
    assert np.all(np.diff(F, axis=1) <= 1e-12)


def test_decoherence_map_rejects_negative_axis():
    with pytest.raises(ValueError):
        decoherence_map(Axis("g1", -0.1, 0.1, 3), Axis("g2", 0.0, 0.1, 3))


def test_deviation_grid_layout_and_determinism(tmp_path):
    a = deviation_grid("4c", points=3, steps=2000)
    b = deviation_grid("4c", points=3, steps=2000)
    pa, pb = a.write_csv(tmp_path / "a.csv"), b.write_csv(tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()
    rows = list(csv.reader(pa.read_text().splitlines()))
    assert rows[0] == ["d_omega2", "d_T", "F"]
    # row-major: the second axis varies fastest
    assert [(float(r[0]), float(r[1])) for r in rows[1:4]] == [(-0.1, -0.1), (-0.1, 0.0), (-0.1, 0.1)]
    assert a.values[1, 1] == pytest.approx(evolve_pure(paper_fitted_pulses(), steps=2000).fidelity, abs=1e-13)


def test_deviation_grid_unknown_pair():
    with pytest.raises(ValueError):
        deviation_grid("4d")


def test_sweep_grid_validation():
    axes = (Axis("x", 0, 1, 2), Axis("y", 0, 1, 3))
    with pytest.raises(ValueError, match="shape"):
        SweepGrid(axes, np.ones((3, 2)))
    with pytest.raises(ValueError, match="fidelities"):
        SweepGrid(axes, np.full((2, 3), 1.1))
    with pytest.raises(ValueError):
        Axis("x", 1.0, 0.0, 3)


def test_table_csv_and_sidecar(tmp_path, tables):
    path = write_table_csv(tmp_path / "table_III.csv", "III", tables["III"])
    rows = list(csv.reader(path.read_text().splitlines()))
    assert rows[0] == ["d_omega2", "d_T", "F_reference", "F"]
    assert len(rows) == 10
    side = write_sidecar(path, {"axis": Axis("x", 0, 1, 2), "value": np.float64(0.5)})
    assert side == sidecar_path(path) and side.name == "table_III.csv.json"
    assert json.loads(side.read_text()) == {"axis": {"name": "x", "start": 0, "stop": 1, "points": 2},
                                            "value": 0.5}
