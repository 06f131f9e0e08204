"""Smoke tests for the compiled extension."""

import math

import numpy as np
import pytest

import qnpop


def test_zoo_and_model_surface():
    names = qnpop.zoo_names()
    assert "neutral_logistic" in names
    model = qnpop.zoo("neutral_logistic")
    assert model.K == 2
    assert model.quasi_neutral
    f = model.drift(np.array([0.25, 0.25]))
    assert f == pytest.approx([0.125, 0.125])


def test_chart_closed_forms():
    model = qnpop.zoo("neutral_logistic")
    ch = qnpop.chart(model, np.array([0.15, 0.15]))
    assert ch["pi"] == pytest.approx([0.5, 0.5], abs=1e-8)
    assert ch["tau"] == pytest.approx(-math.log(0.3), abs=1e-6)
    assert ch["lambda"] == pytest.approx(-1.0, abs=1e-10)
    assert ch["n_e"] == pytest.approx(1.0, abs=1e-12)


def test_simulation_reproducible():
    model = qnpop.zoo("neutral_logistic")
    a = qnpop.simulate(model, np.array([0.3, 0.4]), N=200, horizon=2.0, seed=7,
                       snapshot_dt=0.5)
    b = qnpop.simulate(model, np.array([0.3, 0.4]), N=200, horizon=2.0, seed=7,
                       snapshot_dt=0.5)
    assert a["n_events"] == b["n_events"]
    assert a["final_counts"] == b["final_counts"]
    c = qnpop.simulate(model, np.array([0.3, 0.4]), N=200, horizon=2.0, seed=8,
                       snapshot_dt=0.5)
    assert c["final_counts"] != a["final_counts"] or c["n_events"] != a["n_events"]


def test_flow_logistic_closed_form():
    model = qnpop.zoo("neutral_logistic")
    out = qnpop.flow(model, np.array([0.15, 0.15]), 1.0)
    s0 = 0.3
    s = s0 * math.exp(1.0) / (1 - s0 + s0 * math.exp(1.0))
    assert sum(out["endpoint"]) == pytest.approx(s, abs=1e-8)


def test_generator_and_frequency_reduction():
    model = qnpop.zoo("neutral_logistic")
    gc = qnpop.generator_coefficients(model, np.array([0.5, 0.5]))
    a = np.asarray(gc["diffusion"])
    assert a[0, 0] == pytest.approx(0.25, abs=1e-10)
    assert np.allclose(np.asarray(gc["drift"]), 0.0, atol=1e-12)
    fc = qnpop.pushforward_frequency(model, np.array([0.3, 0.7]))
    assert np.asarray(fc["diffusion_p"])[0, 0] == pytest.approx(0.21, abs=1e-8)
    assert fc["n_e"] == pytest.approx(1.0)


def test_diffusion_path_stays_on_manifold():
    model = qnpop.zoo("neutral_logistic")
    path = qnpop.simulate_diffusion(model, np.array([0.5, 0.5]), T=0.2, dt=0.01, seed=3)
    for point in path["points"]:
        assert model.R(np.asarray(point)) == pytest.approx(0.0, abs=1e-6)


def test_errors_surface_as_python_exceptions():
    model = qnpop.zoo("neutral_logistic")
    with pytest.raises(qnpop.QnError):
        qnpop.generator_coefficients(model, np.array([0.4, 0.4]))  # off the manifold
