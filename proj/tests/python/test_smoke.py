import math

import numpy as np
import pytest

import chronos


def test_names():
    assert "dopri5" in chronos.table_names()
    assert "strang" in chronos.splitting_names()
    assert chronos.table_order("rk4") == 4
    assert chronos.splitting_order("strang") == 2


def test_erk_fixed_decay():
    y = chronos.erk_fixed("rk4", lambda t, y: -y, 0.0, 1.0, 0.01, np.array([1.0, 2.0]))
    assert np.allclose(y, np.array([1.0, 2.0]) * math.exp(-1.0), rtol=1e-9)


def test_erk_evolve_reports_stats():
    r = chronos.erk_evolve("dopri5", lambda t, y: np.array([y[1], -y[0]]), 0.0, math.pi,
                           np.array([0.0, 1.0]), reltol=1e-10, abstol=1e-12)
    assert abs(r["y"][0]) < 1e-8
    assert abs(r["y"][1] + 1.0) < 1e-8
    assert r["steps"] > 0 and r["rhs_evals"] >= r["steps"]


def test_stage_count():
    assert chronos.select_stage_count("rkc", 1.0, 100.0, safety=1.0) == 12
    assert chronos.select_stage_count("rkl", 1.0, 100.0, safety=1.0) == 14


def test_fixed_point():
    r = chronos.fixed_point_solve(lambda u: np.cos(u), np.zeros(1), depth=2, stop_tol=1e-12)
    assert abs(r["u"][0] - 0.7390851332151607) < 1e-10
    assert r["residuals"][-1] <= 1e-12


def test_errors_carry_codes():
    with pytest.raises(chronos.ChronosError) as info:
        chronos.table_order("nope")
    assert info.value.code == -8
    with pytest.raises(chronos.ChronosError):
        chronos.erk_fixed("rk4", lambda t, y: np.zeros(3), 0.0, 1.0, 0.1, np.ones(2))


def test_python_exception_in_rhs_propagates():
    def bad(t, y):
        raise ValueError("boom")

    with pytest.raises(ValueError):
        chronos.erk_fixed("euler", bad, 0.0, 1.0, 0.5, np.ones(1))


def test_small_experiments():
    cols = chronos.gray_scott_splitting(grid=8, t_end=0.5, steps=[0.25, 0.125],
                                        methods=["strang"], timing=False)
    assert cols["method"] == ["strang", "strang"]
    assert cols["error"][1] < cols["error"][0]

    lv = chronos.lotka_volterra(tables=["rk4"], steps=[0.05], timing=False)
    assert lv["order"] == [4.0]

    aa = chronos.aa_demo(n=20, depth=3, seed=2)
    assert len(aa["variant"]) == 4

    sp = chronos.sprk_demo(h=0.1, steps=1000)
    assert max(sp["det_error"]) <= 1e-12
