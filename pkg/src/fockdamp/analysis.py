"""Observables, analytic long-time predictions, the effective-rate formula
and the stopping-time search on sampled standard deviations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channels import JumpChannel
from .errors import NoClosedForm, NoInteriorMinimum, NonpositiveGammaB
from .fock import DensityMatrix, PureState, _frozen_array


@dataclass(frozen=True)
class TimeSeries:
    """Sampled observables of one run.

    ``populations`` has one row per sample over levels 0..nmax; rows sum to
    the initial trace up to the monitored drift. ``min_eigenvalue`` is
    recorded by the dense engines (None for population-only engines, where
    positivity is the componentwise statement).
    """

    t: np.ndarray
    mean_n: np.ndarray
    std_n: np.ndarray
    g2: np.ndarray
    trace_err: np.ndarray
    populations: np.ndarray
    min_eigenvalue: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        pops = np.asarray(self.populations, dtype=float)
        if pops.shape[0] != t.size:
            raise ValueError("populations must have one row per sample")
        for name in ("mean_n", "std_n", "g2", "trace_err"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise ValueError(f"{name} must match the time grid shape")
            object.__setattr__(self, name, _frozen_array(arr))
        object.__setattr__(self, "t", _frozen_array(t))
        object.__setattr__(self, "populations", _frozen_array(pops))
        if self.min_eigenvalue is not None:
            object.__setattr__(
                self, "min_eigenvalue", _frozen_array(np.asarray(self.min_eigenvalue, float))
            )

    @property
    def n_levels(self) -> int:
        return self.populations.shape[1]


class Observables(NamedTuple):
    mean_n: float
    std_n: float
    g2: float
    populations: np.ndarray


def _extract_populations(state) -> np.ndarray:
    if isinstance(state, (DensityMatrix, PureState)):
        return state.populations()
    if hasattr(state, "p"):  # PopulationVector
        return np.asarray(state.p, dtype=float)
    arr = np.asarray(state)
    if arr.ndim == 1:
        return arr.real.astype(float)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return np.diag(arr).real.astype(float)
    raise ValueError(f"cannot read populations from shape {arr.shape}")


def observables(state) -> Observables:
    """Mean photon number, standard deviation, g2(0) and the level populations.

    g2(0) = sum n(n-1) p_n / mean^2, defined as 0 when the mean vanishes.
    Accepts a DensityMatrix, PureState, PopulationVector or plain array.
    """
    p = _extract_populations(state)
    n = np.arange(p.size, dtype=float)
    mean = float(n @ p)
    second = float((n * n) @ p)
    std = float(np.sqrt(max(second - mean * mean, 0.0)))
    pair = float((n * (n - 1.0)) @ p)
    g2 = pair / (mean * mean) if mean > 0.0 else 0.0
    return Observables(mean, std, g2, p)


@dataclass(frozen=True)
class SteadyPrediction:
    """Long-time populations pinned by a conservation law."""

    populations: np.ndarray
    regime: str

    def __post_init__(self):
        object.__setattr__(
            self, "populations", _frozen_array(np.asarray(self.populations, float))
        )


def steady_state_prediction(p0, channels: list[JumpChannel]) -> SteadyPrediction:
    """Analytic long-time populations for channel sets a conservation law pins.

    Pure nonlinear absorber: the vacuum weight decouples and everything else
    collects at one photon. Pure two-photon loss splits by parity onto
    {0, 1}; pure three-photon loss splits by photon number mod 3 onto
    {0, 1, 2}. Any mix containing linear loss empties into the vacuum.
    Other mixes have no closed form; use a long numeric run instead.
    """
    p = _extract_populations(p0)
    active = {(c.creation_power, c.annihilation_power) for c in channels if c.rate > 0.0}
    if not active:
        raise NoClosedForm("no active channels; the state does not evolve")
    out = np.zeros_like(p)
    total = float(p.sum())
    if (0, 1) in active:
        out[0] = total
        regime = "linear-loss mix: all mass to vacuum"
    elif active == {(1, 2)}:
        out[0] = p[0]
        out[1] = total - p[0]
        regime = "pure nonlinear absorber: vacuum weight frozen, rest to one photon"
    elif active == {(0, 2)}:
        out[0] = p[0::2].sum()
        out[1] = p[1::2].sum()
        regime = "pure two-photon loss: parity classes onto {0, 1}"
    elif active == {(0, 3)}:
        out[0] = p[0::3].sum()
        out[1] = p[1::3].sum()
        out[2] = p[2::3].sum()
        regime = "pure three-photon loss: mod-3 classes onto {0, 1, 2}"
    else:
        raise NoClosedForm(
            f"no conservation law pins the long-time state for channels {sorted(active)}"
        )
    return SteadyPrediction(out, regime)


def effective_rate(u4: complex, gamma_b: float, gamma_a: float) -> float:
    """Nonlinear damping rate produced by exchange into a mode damped at gamma_b.

    gamma_a * |2 u4 / gamma_b|^2: quadratic in the exchange strength and
    inversely quadratic in the partner damping.
    """
    if not gamma_b > 0:
        raise NonpositiveGammaB(f"gamma_b must be positive, got {gamma_b}")
    return float(gamma_a * abs(2.0 * u4 / gamma_b) ** 2)


@dataclass(frozen=True)
class SigmaMinimum:
    t_star: float
    sigma_star: float
    populations: np.ndarray
    grid_index: int

    def __post_init__(self):
        object.__setattr__(
            self, "populations", _frozen_array(np.asarray(self.populations, float))
        )


def find_sigma_min(series: TimeSeries, window: tuple[float, float]) -> SigmaMinimum:
    """Locate the interior minimum of std_n on [t_lo, t_hi].

    Grid argmin (first minimum wins ties, i.e. smaller t) refined by a
    quadratic fit through the three bracketing samples; populations at the
    refined time come from the same three-point interpolation. Raises
    NoInteriorMinimum when the argmin sits on the window boundary.
    """
    t_lo, t_hi = window
    idx = np.nonzero((series.t >= t_lo) & (series.t <= t_hi))[0]
    if idx.size < 3:
        raise NoInteriorMinimum(f"window [{t_lo}, {t_hi}] holds fewer than 3 samples")
    sig = series.std_n[idx]
    k = int(np.argmin(sig))
    # a real dip must beat both window edges by more than integration noise,
    # otherwise a flat tail at the steady floor would masquerade as a minimum
    noise_floor = 1e-8 * max(1.0, float(sig.max()))
    if k == 0 or k == idx.size - 1 or min(sig[0], sig[-1]) - sig[k] <= noise_floor:
        raise NoInteriorMinimum(
            f"std_n has no interior minimum on [{t_lo}, {t_hi}] "
            f"(argmin at t={series.t[idx[k]]:.6g})"
        )
    i = idx[k]
    t0, t1, t2 = series.t[i - 1], series.t[i], series.t[i + 1]
    s0, s1, s2 = series.std_n[i - 1], series.std_n[i], series.std_n[i + 1]
    denom = (t1 - t0) * (s1 - s2) - (t1 - t2) * (s1 - s0)
    if denom == 0.0:
        t_star = float(t1)
    else:
        t_star = float(
            t1
            - 0.5 * ((t1 - t0) ** 2 * (s1 - s2) - (t1 - t2) ** 2 * (s1 - s0)) / denom
        )
        t_star = float(min(max(t_star, t0), t2))

    def lagrange3(ya, yb, yc):
        w0 = (t_star - t1) * (t_star - t2) / ((t0 - t1) * (t0 - t2))
        w1 = (t_star - t0) * (t_star - t2) / ((t1 - t0) * (t1 - t2))
        w2 = (t_star - t0) * (t_star - t1) / ((t2 - t0) * (t2 - t1))
        return w0 * ya + w1 * yb + w2 * yc

    sigma_star = float(lagrange3(s0, s1, s2))
    pops = lagrange3(
        series.populations[i - 1], series.populations[i], series.populations[i + 1]
    )
    return SigmaMinimum(t_star, sigma_star, pops, int(i))
