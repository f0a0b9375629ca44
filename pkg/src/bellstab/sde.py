"""Time integration of the conditioned state equation.

Euler-Maruyama with a per-step physicality projection for the stochastic
dynamics, and classical Runge-Kutta for the deterministic reachability
equation driven by piecewise-constant inputs. Wiener increments come from
counter-based Philox streams keyed by (master seed, trajectory index), so
ensembles are reproducible regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .control import Controller, control_signal
from .linalg import max_abs
from .model import ModelParams, OperatorSet, validate_density

__all__ = [
    "SdeConfig",
    "TrajectoryRecord",
    "SupportTrajectory",
    "NonFiniteError",
    "ProjectionError",
    "IntegrationError",
    "wiener_increments",
    "project_to_physical",
    "em_step",
    "integrate_trajectory",
    "integrate_support_ode",
    "run_reachability_demo",
]

PROJECTION_HERMITIAN_ATOL = 1e-6

_KIND_CODES = {"zero": _kernels.KIND_ZERO,
               "two_channel": _kernels.KIND_TWO_CHANNEL,
               "one_channel": _kernels.KIND_ONE_CHANNEL}


class NonFiniteError(ArithmeticError):
    """A state entry became NaN or infinite during integration."""


class ProjectionError(ArithmeticError):
    """The physicality projection had to repair more than it is allowed to."""


class IntegrationError(RuntimeError):
    """A trajectory failed; carries the time at which the step failed."""

    def __init__(self, message: str, time: float, cause: Exception | None = None):
        super().__init__(message)
        self.time = time
        self.cause = cause


@dataclass(frozen=True)
class SdeConfig:
    dt: float = 1e-3
    t_final: float = 10.0
    scheme: str = "euler_maruyama"
    projection_tol: float = 1e-10
    rng_master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dt <= 1e-2:
            raise ValueError(f"dt must lie in (0, 1e-2], got {self.dt}")
        if self.t_final <= 0.0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.scheme != "euler_maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 1e-12 <= self.projection_tol <= 1e-6:
            raise ValueError(
                f"projection_tol must lie in [1e-12, 1e-6], got {self.projection_tol}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    noise_path: np.ndarray = field(repr=False)
    clipped_total: float = 0.0
    clipped_max: float = 0.0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class SupportTrajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def wiener_increments(master_seed: int, traj_index: int, n_steps: int,
                      n_channels: int, dt: float) -> np.ndarray:
    """Normal(0, dt) increments from a Philox stream keyed by (seed, index)."""
    key = (int(master_seed) & 0xFFFFFFFFFFFFFFFF) | (int(traj_index) << 64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.normal(0.0, np.sqrt(dt), size=(n_steps, n_channels))


def project_to_physical(m, tol: float = 1e-10,
                        max_clip: float | None = None) -> tuple[np.ndarray, float]:
    """Repair Hermiticity/positivity/trace; returns (state, clipped mass).

    Raises ProjectionError when the trace had collapsed below 0.5, or when
    the clipped eigenvalue mass exceeds `max_clip` (no limit by default;
    the integration step enforces its own per-step budget). Inputs further
    than 1e-6 from Hermitian are corruption, not roundoff: ValueError.
    """
    m = np.ascontiguousarray(m, dtype=np.complex128)
    asym = max_abs(m - m.conj().T)
    if asym > PROJECTION_HERMITIAN_ATOL:
        raise ValueError(f"matrix too far from Hermitian to project: {asym:.3e}")
    rho = m.copy()
    scratch = np.empty((4, 4), dtype=np.complex128)
    w = np.empty(4, dtype=np.float64)
    v = np.empty((4, 4), dtype=np.complex128)
    limit = np.inf if max_clip is None else max_clip
    clipped, status = _kernels.project_density4(rho, tol, limit, scratch, w, v)
    if status == _kernels.STATUS_CLIP_MASS:
        raise ProjectionError(
            f"clipped eigenvalue mass {clipped:.3e} exceeds {limit:.3e}")
    if status == _kernels.STATUS_TRACE_LOST:
        raise ProjectionError("trace below 0.5 before renormalization")
    return rho, float(clipped)


def _kernel_arrays(ops: OperatorSet, params: ModelParams):
    n_ch = params.n_channels
    L = np.zeros((2, 4, 4), dtype=np.complex128)
    Lsq = np.zeros((2, 4, 4), dtype=np.complex128)
    for k, lk in enumerate(ops.measurements):
        L[k] = lk
        Lsq[k] = lk @ lk
    eta = np.zeros(2)
    eta[:n_ch] = params.efficiencies
    hc = np.zeros((2, 4, 4), dtype=np.complex128)
    for m, h in enumerate(ops.controls):
        hc[m] = h
    return n_ch, L, Lsq, eta, hc, len(ops.controls)


def _raise_for_status(status: int, step: int, dt: float):
    t = (step + 1) * dt
    if status == _kernels.STATUS_NONFINITE:
        raise IntegrationError(f"non-finite state entry at t={t:.6g}", t,
                               NonFiniteError())
    if status == _kernels.STATUS_CLIP_MASS:
        raise IntegrationError(
            f"projection clipped more than the per-step budget at t={t:.6g}", t,
            ProjectionError())
    if status == _kernels.STATUS_TRACE_LOST:
        raise IntegrationError(f"state trace collapsed at t={t:.6g}", t,
                               ProjectionError())


def em_step(rho, ctl: Controller, ops: OperatorSet, params: ModelParams,
            dW, dt: float, projection_tol: float = 1e-10) -> np.ndarray:
    """One Euler-Maruyama update followed by the physicality projection.

    dW holds the actual Wiener increments for this step, one per channel.
    """
    from .model import hamiltonian_drift, lindblad_drift, measurement_diffusion

    dW = np.atleast_1d(np.asarray(dW, dtype=float))
    if dW.size != params.n_channels:
        raise ValueError(f"expected {params.n_channels} increments, got {dW.size}")
    u = control_signal(rho, ctl, ops)
    new = rho + hamiltonian_drift(rho, u, ops) * dt
    for k, lk in enumerate(ops.measurements):
        new = new + lindblad_drift(rho, lk) * dt
        new = new + np.sqrt(params.efficiencies[k]) * measurement_diffusion(rho, lk) * dW[k]
    if not np.all(np.isfinite(new.view(float))):
        raise NonFiniteError("non-finite entry after Euler-Maruyama update")
    projected, _ = project_to_physical(new, projection_tol)
    return projected


def _log_grid(n_steps: int, stride: int, dt: float) -> np.ndarray:
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx, dtype=float) * dt


def integrate_trajectory(rho0, ctl: Controller, ops: OperatorSet,
                         params: ModelParams, cfg: SdeConfig,
                         traj_index: int = 0, dW: np.ndarray | None = None,
                         log_stride: int = 1) -> TrajectoryRecord:
    """Integrate one realization of the conditioned dynamics.

    The Wiener path is drawn from the stream keyed by
    (cfg.rng_master_seed, traj_index) unless increments are supplied
    explicitly. States and control values are recorded every `log_stride`
    steps.
    """
    rho0 = validate_density(rho0)
    if ctl.target != params.target:
        raise ValueError(
            f"controller target {ctl.target!r} != model target {params.target!r}")
    if log_stride < 1:
        raise ValueError("log_stride must be >= 1")
    n_steps = cfg.n_steps
    if dW is None:
        dW = wiener_increments(cfg.rng_master_seed, traj_index, n_steps,
                               params.n_channels, cfg.dt)
    else:
        dW = np.ascontiguousarray(dW, dtype=float)
        if dW.shape != (n_steps, params.n_channels):
            raise ValueError(
                f"noise shape {dW.shape} != {(n_steps, params.n_channels)}")
    n_ch, L, Lsq, eta, hc, n_controls = _kernel_arrays(ops, params)
    times = _log_grid(n_steps, log_stride, cfg.dt)
    out_states = np.empty((len(times), 4, 4), dtype=np.complex128)
    out_u = np.zeros((len(times), 2))
    status, step, n_log, clipped_total, clipped_max = _kernels.integrate_em_kernel(
        rho0, cfg.dt, n_steps, dW, n_ch, L, Lsq, eta, ops.H0,
        n_controls, hc, _KIND_CODES[ctl.kind], ctl.kernel_params(),
        ops.target.projector, cfg.projection_tol, log_stride, out_states, out_u)
    _raise_for_status(status, step, cfg.dt)
    assert n_log == len(times)
    return TrajectoryRecord(times, out_states, out_u[:, :max(n_controls, 1)],
                            dW, float(clipped_total), float(clipped_max))


def integrate_support_ode(rho0, v, ctl: Controller, ops: OperatorSet,
                          params: ModelParams, dt: float, t_final: float,
                          projection_tol: float = 1e-10,
                          log_stride: int = 1) -> SupportTrajectory:
    """Runge-Kutta integration of the reachability equation.

    `v` gives the piecewise-constant inputs per step, shape
    (n_steps, n_channels); each row is held constant over its step.
    """
    rho0 = validate_density(rho0)
    n_steps = int(round(t_final / dt))
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (n_steps, params.n_channels):
        raise ValueError(f"input shape {v.shape} != {(n_steps, params.n_channels)}")
    vpad = np.zeros((n_steps, 2))
    vpad[:, :params.n_channels] = v
    return _run_support(rho0, vpad, ctl, ops, params, dt, n_steps,
                        projection_tol, log_stride, demo_gain=0.0, demo_cap=0.0)


def run_reachability_demo(ctl: Controller, ops: OperatorSet, params: ModelParams,
                          rho0=None, gain: float = 5.0, cap: float = 1e3,
                          dt: float = 1e-3, t_final: float = 50.0,
                          projection_tol: float = 1e-10,
                          log_stride: int = 10) -> SupportTrajectory:
    """Drive the reachability equation toward the target with the
    constructive inputs v_j = K (lam_j - Tr(L_j rho)) / X(rho), capped at
    `cap` to survive the X = 0 start."""
    from .model import maximally_mixed

    rho0 = maximally_mixed() if rho0 is None else validate_density(rho0)
    n_steps = int(round(t_final / dt))
    vpad = np.zeros((1, 2))
    return _run_support(rho0, vpad, ctl, ops, params, dt, n_steps,
                        projection_tol, log_stride, demo_gain=gain, demo_cap=cap)


def _run_support(rho0, vpad, ctl, ops, params, dt, n_steps, projection_tol,
                 log_stride, demo_gain, demo_cap) -> SupportTrajectory:
    n_ch, L, _, eta, hc, n_controls = _kernel_arrays(ops, params)
    strengths = np.zeros(2)
    strengths[:n_ch] = params.strengths
    L_unit = np.zeros((2, 4, 4), dtype=np.complex128)
    lam_bar = np.zeros(2)
    L_unit[0] = ops.L1 / np.sqrt(params.M1)
    lam_bar[0] = ops.target.zz_eigenvalue
    if n_ch == 2:
        L_unit[1] = ops.L2 / np.sqrt(params.M2)
        lam_bar[1] = ops.target.xx_eigenvalue
    times = _log_grid(n_steps, log_stride, dt)
    out_states = np.empty((len(times), 4, 4), dtype=np.complex128)
    status, step, n_log = _kernels.integrate_support_kernel(
        rho0, dt, n_steps, vpad, n_ch, L, eta, strengths, ops.H0,
        n_controls, hc, _KIND_CODES[ctl.kind], ctl.kernel_params(),
        ops.target.projector, L_unit, lam_bar, demo_gain, demo_cap,
        projection_tol, log_stride, out_states)
    _raise_for_status(status, step, dt)
    assert n_log == len(times)
    return SupportTrajectory(times, out_states)
