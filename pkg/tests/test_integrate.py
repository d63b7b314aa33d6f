import math

import numpy as np
import pytest
import scipy.linalg as sla

from fockdamp.errors import StepSizeUnderflow, TraceDriftExceeded
from fockdamp.integrate import IntegratorConfig, integrate


def test_scalar_exponential_decay():
    samples = {}
    integrate(
        lambda y: -y,
        np.array([1.0]),
        np.linspace(0, 4, 9),
        IntegratorConfig(abs_tol=1e-12, rel_tol=1e-10),
        on_sample=lambda i, t, y: samples.update({t: y[0]}),
    )
    for t, v in samples.items():
        assert abs(v - math.exp(-t)) < 1e-9


def test_linear_system_matches_expm():
    rng = np.random.default_rng(0)
    r = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    a = r - 2.0 * np.linalg.norm(r) * np.eye(6)  # strongly stable
    y0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    t_end = 0.8
    y = integrate(
        lambda y: a @ y, y0, np.array([0.0, t_end]), IntegratorConfig(1e-12, 1e-10)
    )
    exact = sla.expm(a * t_end) @ y0
    assert np.max(np.abs(y - exact)) < 1e-8


def test_nan_rhs_underflows_step():
    def rhs(y):
        return np.array([float("nan")])

    with pytest.raises(StepSizeUnderflow):
        integrate(rhs, np.array([1.0]), np.array([0.0, 1.0]), IntegratorConfig())


def test_fixed_step_deterministic():
    cfg = IntegratorConfig(fixed_step=0.01)
    grid = np.linspace(0, 1, 5)
    outs = []
    for _ in range(2):
        rows = []
        integrate(
            lambda y: -2.0 * y,
            np.array([1.0, 0.5]),
            grid,
            cfg,
            on_sample=lambda i, t, y: rows.append(y.copy()),
        )
        outs.append(np.array(rows))
    assert np.array_equal(outs[0], outs[1])
    assert np.max(np.abs(outs[0][-1] - np.array([1.0, 0.5]) * math.exp(-2.0))) < 1e-9


def test_fixed_step_detects_divergence():
    # explicit step far beyond the stability limit of a stiff decay
    with pytest.raises(TraceDriftExceeded):
        integrate(
            lambda y: -1e5 * y,
            np.array([1.0]),
            np.array([0.0, 10.0]),
            IntegratorConfig(fixed_step=0.1),
        )


def test_grid_validation():
    with pytest.raises(ValueError):
        integrate(lambda y: -y, np.array([1.0]), np.array([0.0, 0.0]), IntegratorConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1e-8)
    with pytest.raises(ValueError):
        IntegratorConfig(fixed_step=0.0)


def test_post_accept_can_shrink_state():
    # drop the (decoupled, dead) second component mid-run; the first must be unaffected
    def rhs(y):
        out = -y.copy()
        return out

    def post_accept(y, f):
        if y.size == 2 and abs(y[1]) < 1e-12:
            return y[:1].copy(), (None if f is None else f[:1].copy())
        return y, f

    y = integrate(
        rhs,
        np.array([1.0, 0.0]),
        np.array([0.0, 2.0]),
        IntegratorConfig(1e-12, 1e-10),
        post_accept=post_accept,
    )
    assert y.size == 1
    assert abs(y[0] - math.exp(-2.0)) < 1e-9
