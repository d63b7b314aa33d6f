"""Quantum-jump unraveling of the same channel set.

Independent stochastic oracle for the deterministic integrators. Between
jumps the non-Hermitian flow is diagonal in the Fock basis (every L^dag L
and the Kerr term are number-diagonal), so the no-jump evolution is an
exact elementwise exponential and waiting times solve
norm^2(tau) = u for a uniform draw u, found by bracketing and bisection.
A trajectory whose dark-level weight exceeds the pending draw never jumps
again.

Trajectories own counter-based random substreams keyed on
(master_seed, trajectory index); identical configuration gives bit-identical
output. Per-trajectory results accumulate into fixed chunks that are
combined by pairwise summation, so the reduction is independent of
execution order and thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, _rng
from ._accel import njit, prange
from .analysis import TimeSeries, observables
from .channels import JumpChannel, KerrTerm, lowering_amplitudes
from .errors import SeedStreamExhausted
from .fock import PureState, _frozen_array

_BISECT_TOL = 1e-10
_MAX_DRAWS = np.int64(2**53)
_U1 = np.uint64(1)


@dataclass(frozen=True)
class TrajectoryConfig:
    n_traj: int
    master_seed: int
    t_grid: np.ndarray
    dt_max: float | None = None
    chunk_size: int = field(default=256, repr=False)

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be non-empty and strictly ascending")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        object.__setattr__(self, "t_grid", _frozen_array(t))


@dataclass(frozen=True)
class EnsembleResult:
    t: np.ndarray
    mean_populations: np.ndarray  # (samples, levels)
    stderr: np.ndarray  # (samples, levels) standard error of the mean
    n_traj: int

    def __post_init__(self):
        for name in ("t", "mean_populations", "stderr"):
            object.__setattr__(self, name, _frozen_array(np.asarray(getattr(self, name), float)))

    def to_timeseries(self) -> TimeSeries:
        n_samples = self.t.size
        mean = np.zeros(n_samples)
        std = np.zeros(n_samples)
        g2 = np.zeros(n_samples)
        trace_err = np.zeros(n_samples)
        for i in range(n_samples):
            obs = observables(self.mean_populations[i])
            mean[i], std[i], g2[i] = obs.mean_n, obs.std_n, obs.g2
            trace_err[i] = abs(self.mean_populations[i].sum() - 1.0)
        return TimeSeries(self.t, mean, std, g2, trace_err, self.mean_populations)


@njit(cache=True)
def _qnorm_nb(psi, s, tau):
    q = 0.0
    for n in range(psi.size):
        a2 = psi[n].real ** 2 + psi[n].imag ** 2
        if a2 > 0.0:
            q += a2 * math.exp(-s[n] * tau)
    return q


@njit(cache=True)
def _record_nb(psi, s, delta, out_p, out_p2, i):
    q = _qnorm_nb(psi, s, delta)
    for n in range(psi.size):
        a2 = psi[n].real ** 2 + psi[n].imag ** 2
        v = a2 * math.exp(-s[n] * delta) / q
        out_p[i, n] += v
        out_p2[i, n] += v * v


@njit(cache=True)
def _traj_nb(psi0, s, theta, m_all, m2_all, rates, deltas, t_grid, dt_max, key, out_p, out_p2):
    n1 = psi0.size
    n_samples = t_grid.size
    n_ch = rates.size
    psi = psi0.copy()
    work = np.empty(n1, np.complex128)
    wbuf = np.empty(n_ch, np.float64)
    t = t_grid[0]
    draw = np.uint64(0)
    _record_nb(psi, s, 0.0, out_p, out_p2, 0)
    i_s = 1
    u = _rng.uniform_nb(key, draw)
    draw += _U1
    while i_s < n_samples:
        dark = 0.0
        for n in range(n1):
            if s[n] == 0.0:
                dark += psi[n].real ** 2 + psi[n].imag ** 2
        no_jump = u <= dark
        tau_j = 0.0
        if not no_jump:
            tau_lo = 0.0
            tau_hi = dt_max
            grow = 0
            while _qnorm_nb(psi, s, tau_hi) > u:
                tau_lo = tau_hi
                tau_hi *= 2.0
                grow += 1
                if grow > 200:  # u - dark below float resolution
                    no_jump = True
                    break
            if not no_jump:
                while tau_hi - tau_lo > _BISECT_TOL:
                    mid = 0.5 * (tau_lo + tau_hi)
                    if _qnorm_nb(psi, s, mid) > u:
                        tau_lo = mid
                    else:
                        tau_hi = mid
                tau_j = 0.5 * (tau_lo + tau_hi)
        if no_jump:
            for i in range(i_s, n_samples):
                _record_nb(psi, s, t_grid[i] - t, out_p, out_p2, i)
            i_s = n_samples
            break
        while i_s < n_samples and t_grid[i_s] <= t + tau_j:
            _record_nb(psi, s, t_grid[i_s] - t, out_p, out_p2, i_s)
            i_s += 1
        if i_s >= n_samples:
            break
        # advance to the jump time and renormalize
        for n in range(n1):
            mag = math.exp(-0.5 * s[n] * tau_j)
            ang = -theta[n] * tau_j
            psi[n] = psi[n] * (mag * complex(math.cos(ang), math.sin(ang)))
        norm = math.sqrt(_qnorm_nb(psi, s, 0.0))
        for n in range(n1):
            psi[n] = psi[n] / norm
        # pick the channel with probability proportional to rate * |L psi|^2
        total_w = 0.0
        for c in range(n_ch):
            wc = 0.0
            for n in range(n1):
                a2 = psi[n].real ** 2 + psi[n].imag ** 2
                wc += m2_all[c, n] * a2
            wbuf[c] = rates[c] * wc
            total_w += wbuf[c]
        r = _rng.uniform_nb(key, draw) * total_w
        draw += _U1
        pick = n_ch - 1
        acc = 0.0
        for c in range(n_ch):
            acc += wbuf[c]
            if r < acc:
                pick = c
                break
        d = deltas[pick]
        for n in range(n1 - d):
            work[n] = m_all[pick, n + d] * psi[n + d]
        for n in range(n1 - d, n1):
            work[n] = 0.0
        norm2 = 0.0
        for n in range(n1):
            norm2 += work[n].real ** 2 + work[n].imag ** 2
        norm = math.sqrt(norm2)
        for n in range(n1):
            psi[n] = work[n] / norm
        t = t + tau_j
        u = _rng.uniform_nb(key, draw)
        draw += _U1
    return np.int64(draw)


@njit(cache=True, parallel=True)
def _ensemble_nb(
    psi0, s, theta, m_all, m2_all, rates, deltas, t_grid, dt_max, seed, n_traj, chunk, out_p, out_p2, draws
):
    n_chunks = out_p.shape[0]
    for ci in prange(n_chunks):
        lo = ci * chunk
        hi = min(n_traj, lo + chunk)
        for tr in range(lo, hi):
            key = _rng.stream_key_nb(seed, np.uint64(tr))
            draws[tr] = _traj_nb(
                psi0, s, theta, m_all, m2_all, rates, deltas, t_grid, dt_max, key,
                out_p[ci], out_p2[ci],
            )


def _qnorm_np(psi, s, tau):
    return float(np.sum((psi.real**2 + psi.imag**2) * np.exp(-s * tau)))


def _traj_np(psi0, s, theta, m_all, m2_all, rates, deltas, t_grid, dt_max, key, out_p, out_p2):
    psi = psi0.copy()
    n1 = psi.size
    n_samples = t_grid.size
    t = float(t_grid[0])
    draw = 0

    def record(i, delta):
        q = _qnorm_np(psi, s, delta)
        v = (psi.real**2 + psi.imag**2) * np.exp(-s * delta) / q
        out_p[i] += v
        out_p2[i] += v * v

    record(0, 0.0)
    i_s = 1
    u = _rng.uniform(key, draw)
    draw += 1
    while i_s < n_samples:
        dark = float(np.sum((psi.real**2 + psi.imag**2)[s == 0.0]))
        no_jump = u <= dark
        tau_j = 0.0
        if not no_jump:
            tau_lo, tau_hi = 0.0, dt_max
            grow = 0
            while _qnorm_np(psi, s, tau_hi) > u:
                tau_lo = tau_hi
                tau_hi *= 2.0
                grow += 1
                if grow > 200:
                    no_jump = True
                    break
            if not no_jump:
                while tau_hi - tau_lo > _BISECT_TOL:
                    mid = 0.5 * (tau_lo + tau_hi)
                    if _qnorm_np(psi, s, mid) > u:
                        tau_lo = mid
                    else:
                        tau_hi = mid
                tau_j = 0.5 * (tau_lo + tau_hi)
        if no_jump:
            for i in range(i_s, n_samples):
                record(i, float(t_grid[i]) - t)
            break
        while i_s < n_samples and t_grid[i_s] <= t + tau_j:
            record(i_s, float(t_grid[i_s]) - t)
            i_s += 1
        if i_s >= n_samples:
            break
        psi = psi * np.exp(-(0.5 * s + 1j * theta) * tau_j)
        psi /= math.sqrt(_qnorm_np(psi, s, 0.0))
        weights = rates * (m2_all @ (psi.real**2 + psi.imag**2))
        r = _rng.uniform(key, draw) * float(weights.sum())
        draw += 1
        pick = int(weights.size) - 1
        acc = 0.0
        for c in range(weights.size):
            acc += float(weights[c])
            if r < acc:
                pick = c
                break
        d = int(deltas[pick])
        nxt = np.zeros(n1, dtype=np.complex128)
        nxt[: n1 - d] = m_all[pick, d:] * psi[d:]
        psi = nxt / np.linalg.norm(nxt)
        t = t + tau_j
        u = _rng.uniform(key, draw)
        draw += 1
    return draw


def run_ensemble(
    psi0: PureState,
    channels: list[JumpChannel],
    kerr: KerrTerm | None,
    cfg: TrajectoryConfig,
) -> EnsembleResult:
    """Average normalized level populations over ``cfg.n_traj`` trajectories.

    Returns per-bin means with standard errors. Channel selection at a jump
    is proportional to rate * |L psi|^2; jump times come from bisection on
    the squared norm of the no-jump evolution against a uniform draw.
    """
    active = [c for c in channels if c.rate > 0.0]
    psi = np.array(psi0.amplitudes, dtype=np.complex128)
    psi /= np.linalg.norm(psi)
    n1 = psi.size
    nmax = n1 - 1
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    n_samples = t_grid.size
    n_ch = max(len(active), 1)
    m_all = np.zeros((n_ch, n1))
    rates = np.zeros(n_ch)
    deltas = np.zeros(n_ch, dtype=np.int64)
    s_tot = np.zeros(n1)
    for ci, c in enumerate(active):
        amp = lowering_amplitudes(c, nmax)
        m_all[ci] = amp
        rates[ci] = c.rate
        deltas[ci] = c.net_lowering
        s_tot += c.rate * amp**2
    m2_all = m_all**2
    n_levels = np.arange(n1, dtype=float)
    theta = (kerr.strength if kerr is not None else 0.0) * n_levels * (n_levels - 1.0)

    t_span = float(t_grid[-1] - t_grid[0]) if n_samples > 1 else 1.0
    dt_max = cfg.dt_max if cfg.dt_max is not None else max(t_span / 100.0, 1e-6)

    n_chunks = -(-cfg.n_traj // cfg.chunk_size)
    out_p = np.zeros((n_chunks, n_samples, n1))
    out_p2 = np.zeros((n_chunks, n_samples, n1))
    draws = np.zeros(cfg.n_traj, dtype=np.int64)
    seed = np.uint64(cfg.master_seed & (2**64 - 1))

    if _accel.active_backend() == "numba":
        _ensemble_nb(
            psi, s_tot, theta, m_all, m2_all, rates, deltas, t_grid, dt_max,
            seed, cfg.n_traj, cfg.chunk_size, out_p, out_p2, draws,
        )
    else:
        for ci in range(n_chunks):
            lo = ci * cfg.chunk_size
            hi = min(cfg.n_traj, lo + cfg.chunk_size)
            for tr in range(lo, hi):
                key = _rng.stream_key(cfg.master_seed, tr)
                draws[tr] = _traj_np(
                    psi, s_tot, theta, m_all, m2_all, rates, deltas, t_grid, dt_max,
                    key, out_p[ci], out_p2[ci],
                )
    if draws.max(initial=0) >= _MAX_DRAWS:
        raise SeedStreamExhausted("a trajectory consumed more draws than a stream provides")

    n = cfg.n_traj
    mean = out_p.sum(axis=0) / n
    if n > 1:
        var = (out_p2.sum(axis=0) - n * mean**2) / (n - 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / n)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(t_grid, mean, stderr, n)
