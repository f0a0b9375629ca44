"""Scalar diagnostics: Bures distances, parity coordinates, Lyapunov
functions, the finite-difference infinitesimal generator, exponent fits,
and end-state classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .control import Controller, control_signal
from .linalg import psd_sqrt
from .model import (BELL_LABELS, BellState, ModelParams, OperatorSet, bell,
                    hamiltonian_drift, lindblad_drift, measurement_diffusion)
from .sde import NonFiniteError

__all__ = [
    "ScalarSeries",
    "ExponentFit",
    "BellCoordinates",
    "NonPositiveValueError",
    "bures_distance",
    "bures_to_pure",
    "bures_to_set",
    "bures_to_bell_set",
    "coordinates",
    "lyapunov_qsr",
    "lyapunov_feedback",
    "generator_apply",
    "noise_gain",
    "fit_sample_exponent",
    "classify_limit",
    "first_hit_time",
]

# V_qsr / Bures-distance sandwich constants
QSR_SANDWICH_LOW = 1.0 / np.sqrt(6.0)
QSR_SANDWICH_HIGH = 2.0 * np.sqrt(2.0)
# V_fb = sqrt(1 - X) satisfies d_B / sqrt(2) <= V_fb <= d_B
FB_SANDWICH_LOW = 1.0 / np.sqrt(2.0)
FB_SANDWICH_HIGH = 1.0

DEFAULT_CLASSIFY_TOL = 0.05
DEFAULT_FD_STEP = 1e-5


class NonPositiveValueError(ValueError):
    """A log-linear fit window contains non-positive values."""


@dataclass(frozen=True)
class ScalarSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    window: tuple[float, float]
    r_squared: float


class BellCoordinates(NamedTuple):
    lambda1: float  # rho_11 + rho_44
    lambda2: float  # rho_22 + rho_33
    gamma: float    # 2 Re rho_23 + 2 Re rho_14
    delta: float    # lambda1 Re rho_23 - lambda2 Re rho_14


def bures_distance(rho_a, rho_b) -> float:
    """sqrt(2 - 2 Tr sqrt(sqrt(rho_b) rho_a sqrt(rho_b)))."""
    sb = psd_sqrt(rho_b)
    inner = psd_sqrt(sb @ rho_a @ sb)
    fid_root = float(np.trace(inner).real)
    return float(np.sqrt(max(2.0 - 2.0 * fid_root, 0.0)))


def bures_to_pure(rho, vector) -> float:
    """Closed form for a pure second argument: sqrt(2 - 2 sqrt(<v|rho|v>))."""
    vector = np.asarray(vector, dtype=np.complex128)
    overlap = float(np.real(vector.conj() @ rho @ vector))
    overlap = min(max(overlap, 0.0), 1.0)
    return float(np.sqrt(max(2.0 - 2.0 * np.sqrt(overlap), 0.0)))


def bures_to_set(rho, states: Sequence[np.ndarray]) -> float:
    if len(states) == 0:
        raise ValueError("state set must be nonempty")
    return min(bures_distance(rho, s) for s in states)


def bures_to_bell_set(rho) -> float:
    """Distance to the set of Bell projectors via the pure-state closed form."""
    return min(bures_to_pure(rho, bell(name).vector) for name in BELL_LABELS)


def coordinates(rho) -> BellCoordinates:
    lam1 = float(rho[0, 0].real + rho[3, 3].real)
    lam2 = float(rho[1, 1].real + rho[2, 2].real)
    gam = 2.0 * float(rho[1, 2].real) + 2.0 * float(rho[0, 3].real)
    delta = lam1 * float(rho[1, 2].real) - lam2 * float(rho[0, 3].real)
    return BellCoordinates(lam1, lam2, gam, delta)


def lyapunov_qsr(rho) -> float:
    """sqrt(Lambda1 Lambda2 + 1 - Gamma^2); zero exactly on the Bell set."""
    lam1, lam2, gam, _ = coordinates(rho)
    return float(np.sqrt(max(lam1 * lam2 + 1.0 - gam * gam, 0.0)))


def lyapunov_feedback(rho, target: str | BellState) -> float:
    """sqrt(1 - X(rho)) for the designated target state."""
    tgt = target if isinstance(target, BellState) else bell(target)
    x = float(np.einsum("ij,ji->", rho, tgt.projector).real)
    return float(np.sqrt(max(1.0 - x, 0.0)))


def _total_drift(rho, ctl: Controller, ops: OperatorSet, params: ModelParams):
    u = control_signal(rho, ctl, ops)
    out = hamiltonian_drift(rho, u, ops)
    for lk in ops.measurements:
        out = out + lindblad_drift(rho, lk)
    return out


def generator_apply(V: Callable[[np.ndarray], float], rho, ctl: Controller,
                    ops: OperatorSet, params: ModelParams,
                    h: float = DEFAULT_FD_STEP) -> float:
    """Finite-difference generator of the diffusion applied to V at rho.

    Central differences: first derivative along the total drift plus half
    the sum over channels of second derivatives along sqrt(eta_k) G_k.
    The caller must keep rho away from points where V is not smooth.
    """
    drift = _total_drift(rho, ctl, ops, params)
    out = (V(rho + h * drift) - V(rho - h * drift)) / (2.0 * h)
    v0 = V(rho)
    for k, lk in enumerate(ops.measurements):
        g = np.sqrt(params.efficiencies[k]) * measurement_diffusion(rho, lk)
        out += 0.5 * (V(rho + h * g) - 2.0 * v0 + V(rho - h * g)) / (h * h)
    if not np.isfinite(out):
        raise NonFiniteError(f"generator evaluation produced {out!r}")
    return float(out)


def noise_gain(V: Callable[[np.ndarray], float], rho, ops: OperatorSet,
               params: ModelParams, channel: int,
               h: float = DEFAULT_FD_STEP) -> float:
    """g_j = sqrt(eta_j) dV[G_j] / V, the relative diffusion gain of V."""
    v0 = V(rho)
    if v0 <= 1e-12:
        raise ZeroDivisionError(f"V(rho) = {v0:.3e} too small for a noise gain")
    g = measurement_diffusion(rho, ops.measurements[channel - 1])
    deriv = (V(rho + h * g) - V(rho - h * g)) / (2.0 * h)
    return float(np.sqrt(params.efficiencies[channel - 1]) * deriv / v0)


def fit_sample_exponent(series: ScalarSeries,
                        window: tuple[float, float]) -> ExponentFit:
    """Least-squares slope of log(values) against time over the window."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError(f"empty fit window {window}")
    mask = (series.times >= t_lo) & (series.times <= t_hi)
    if int(mask.sum()) < 2:
        raise ValueError(f"fewer than two samples in window {window}")
    vals = series.values[mask]
    if np.any(vals <= 0.0):
        raise NonPositiveValueError(
            f"{int(np.sum(vals <= 0.0))} non-positive values in fit window")
    t = series.times[mask]
    logv = np.log(vals)
    slope, intercept = np.polyfit(t, logv, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return ExponentFit(float(slope), float(intercept), (float(t_lo), float(t_hi)), r2)


def classify_limit(rho, tol: float = DEFAULT_CLASSIFY_TOL) -> str | None:
    """Label of the nearest Bell state if within `tol` Bures distance."""
    best, best_d = None, np.inf
    for name in BELL_LABELS:
        d = bures_to_pure(rho, bell(name).vector)
        if d < best_d:
            best, best_d = name, d
    return best if best_d < tol else None


def first_hit_time(series: ScalarSeries, r: float) -> float | None:
    """First recorded time at which the series falls below `r`."""
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    hits = np.nonzero(series.values < r)[0]
    if hits.size == 0:
        return None
    return float(series.times[hits[0]])
