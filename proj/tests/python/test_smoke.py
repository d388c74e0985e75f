import math

import numpy as np
import pytest

import mvsde


def test_kappa_eta_at_branch_point():
    e2 = math.exp(-2.0)
    assert mvsde.kappa_eta(e2, e2) == pytest.approx(2.0 * e2, abs=1e-12)
    assert mvsde.kappa_eta(0.0) == 0.0


def test_catalog_and_model_evaluation():
    assert {"mf-ou", "osgood", "sznitman"} <= set(mvsde.catalog_ids())
    model = mvsde.make_model("mf-ou", {"theta": 2.0})
    assert model.parameters["theta"] == 2.0
    pts = np.array([1.0, 3.0])
    # -theta x + alpha mean = -2 * 1 + 0.5 * 2
    assert model.drift([1.0], pts)[0] == pytest.approx(-1.0)
    with pytest.raises(mvsde.ConfigError):
        mvsde.make_model("mf-ou", {"nope": 1.0})


def test_em_run_shapes_and_determinism():
    model = mvsde.make_model("mf-ou")
    times, states = mvsde.em_run(model, [1.0], particles=50, level=5, seed=3)
    assert len(times) == 33
    assert states.shape == (33, 50, 1)
    assert np.all(states[0] == 1.0)
    _, again = mvsde.em_run(model, [1.0], particles=50, level=5, seed=3, threads=4)
    assert np.array_equal(states, again)


def test_zero_model_is_constant():
    _, states = mvsde.em_run(mvsde.make_model("zero"), [0.25], particles=8, level=4)
    assert np.all(states == 0.25)


def test_fit_rate_exact_on_geometric_sequence():
    levels = [3, 4, 5, 6]
    slope, _ = mvsde.fit_rate(levels, [2.0 ** -n for n in levels])
    assert slope == pytest.approx(-1.0, abs=1e-12)


def test_small_rate_study_runs():
    model = mvsde.make_model("mf-ou")
    out = mvsde.rate_study(model, [0.0], [1.0], [2, 3, 4], 8, 200, seed=5)
    assert len(out["errors"]) == 3
    assert all(e > 0 for e in out["errors"])


def test_osgood_and_bihari():
    e2 = math.exp(-2.0)
    value, closed = mvsde.osgood_integral("kappa", 1e-8, e2, e2)
    assert value == pytest.approx(math.log(math.log(1e8)) - math.log(2.0), rel=1e-6)
    assert closed is not None
    _, numeric, _ = mvsde.bihari(1.0, 1e-8, 1.0)
    assert numeric[-1] == pytest.approx(1e-8 ** math.exp(-1.0), rel=1e-6)


def test_rho_sandwich():
    rng = np.random.default_rng(0)
    a = rng.normal(size=100)
    b = a + rng.normal(scale=0.1, size=100)
    assert mvsde.rho_lower(a, b) <= mvsde.rho_upper(a, b)
    assert mvsde.rho_upper(a, a) == 0.0


def test_format_double_round_trips():
    for x in (0.1, 1.0 / 3.0, 1e-300, -2.5e17):
        assert float(mvsde.format_double(x)) == x
