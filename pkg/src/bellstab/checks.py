"""Pointwise verification suites over random density matrices.

Each suite samples states, evaluates an inequality or identity the
dynamics must satisfy, and reports the worst margin observed. They back
the `check` CLI subcommand; the acceptance tests run them at the sample
counts fixed there.

Batched closed forms carry the heavy sweeps; the module-level scalar
functions are cross-checked against them on subsamples in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import Controller, theta_u
from .ensemble import reference_curve  # noqa: F401  (re-exported for the CLI)
from .metrics import (FB_SANDWICH_HIGH, FB_SANDWICH_LOW, QSR_SANDWICH_HIGH,
                      QSR_SANDWICH_LOW, bures_to_pure, generator_apply,
                      lyapunov_feedback, lyapunov_qsr)
from .model import ModelParams, bell, operators

__all__ = [
    "CheckResult",
    "check_qsr_lyapunov",
    "check_bures_sandwich",
    "check_feedback_sandwich",
    "check_feedback_theta",
    "check_martingale",
    "SUITES",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict[str, float] = field(default_factory=dict)
    detail: str = ""

    def describe(self) -> str:
        status = "ok" if self.passed else "VIOLATED"
        parts = ", ".join(f"{k}={v:.6g}" for k, v in self.metrics.items())
        return f"{self.name}: {status} ({parts})"


def _default_params() -> ModelParams:
    return ModelParams(n_channels=2, eta1=0.3, M1=1.0, eta2=0.4, M2=0.9,
                       omega=0.3, target="psi_plus")


def _random_states(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    w = g @ np.conj(np.swapaxes(g, 1, 2))
    tr = np.einsum("nii->n", w).real
    return w / tr[:, None, None]


def _batch_coordinates(rho: np.ndarray):
    lam1 = (rho[:, 0, 0] + rho[:, 3, 3]).real
    lam2 = (rho[:, 1, 1] + rho[:, 2, 2]).real
    gam = 2.0 * rho[:, 1, 2].real + 2.0 * rho[:, 0, 3].real
    delta = lam1 * rho[:, 1, 2].real - lam2 * rho[:, 0, 3].real
    return lam1, lam2, gam, delta


def _batch_bell_distance(rho: np.ndarray) -> np.ndarray:
    from .model import BELL_LABELS

    vecs = np.stack([bell(name).vector for name in BELL_LABELS])
    fids = np.clip(np.einsum("bi,nij,bj->nb", vecs.conj(), rho, vecs).real, 0.0, 1.0)
    return np.sqrt(np.maximum(2.0 - 2.0 * np.sqrt(fids.max(axis=1)), 0.0))


def check_qsr_lyapunov(n_samples: int = 10_000, seed: int = 20_240,
                       tol: float = 1e-3, h: float = 1e-5,
                       params: ModelParams | None = None) -> CheckResult:
    """Generator inequality of the uncontrolled dynamics:
    LV(rho) + C V(rho) <= tol with C = min_k eta_k M_k, V the reduction
    Lyapunov function, sampled at random interior states."""
    params = params or _default_params()
    ops = operators(params)
    ctl = Controller.zero(target=params.target)
    rate = params.contraction_rate
    rng = np.random.default_rng(seed)
    states = _random_states(n_samples, rng)
    worst = -np.inf
    for rho in states:
        margin = generator_apply(lyapunov_qsr, rho, ctl, ops, params, h=h)
        margin += rate * lyapunov_qsr(rho)
        if margin > worst:
            worst = float(margin)
    return CheckResult(
        name="qsr-lyapunov", passed=worst <= tol,
        metrics={"max_margin": worst, "tolerance": tol, "samples": n_samples},
        detail="max over samples of LV + C*V (should be <= tolerance)")


def check_bures_sandwich(n_samples: int = 100_000, seed: int = 20_241,
                         violation_tol: float = 1e-9) -> CheckResult:
    """Two-sided bound of the reduction Lyapunov function by the Bures
    distance to the Bell set, constants 1/sqrt(6) and 2 sqrt(2)."""
    rng = np.random.default_rng(seed)
    states = _random_states(n_samples, rng)
    lam1, lam2, gam, _ = _batch_coordinates(states)
    v = np.sqrt(np.maximum(lam1 * lam2 + 1.0 - gam * gam, 0.0))
    d = _batch_bell_distance(states)
    low_viol = float(np.max(QSR_SANDWICH_LOW * d - v))
    high_viol = float(np.max(v - QSR_SANDWICH_HIGH * d))
    worst = max(low_viol, high_viol)
    return CheckResult(
        name="bures-sandwich", passed=worst <= violation_tol,
        metrics={"max_violation": worst, "lower_margin": low_viol,
                 "upper_margin": high_viol, "samples": n_samples},
        detail="violations of (1/sqrt6) d <= V_qsr <= 2 sqrt2 d")


def check_feedback_sandwich(n_samples: int = 100_000, seed: int = 20_242,
                            violation_tol: float = 1e-9,
                            target: str = "psi_plus") -> CheckResult:
    """Bound of sqrt(1 - X) by the Bures distance to the target:
    d / sqrt(2) <= V <= d."""
    rng = np.random.default_rng(seed)
    states = _random_states(n_samples, rng)
    tgt = bell(target)
    x = np.clip(np.einsum("nij,ji->n", states, tgt.projector).real, 0.0, 1.0)
    v = np.sqrt(1.0 - x)
    d = np.sqrt(np.maximum(2.0 - 2.0 * np.sqrt(x), 0.0))
    low_viol = float(np.max(FB_SANDWICH_LOW * d - v))
    high_viol = float(np.max(v - FB_SANDWICH_HIGH * d))
    worst = max(low_viol, high_viol)
    return CheckResult(
        name="feedback-sandwich", passed=worst <= violation_tol,
        metrics={"max_violation": worst, "samples": n_samples},
        detail="violations of d/sqrt2 <= sqrt(1-X) <= d")


def check_feedback_theta(n_samples: int = 100_000, n_directions: int = 100,
                         seed: int = 20_243, ratio_bound: float = 1e-2,
                         target: str = "psi_plus",
                         controller: Controller | None = None) -> CheckResult:
    """Feedback-law conditions for the scalar two-channel design.

    Part 1: sup |Theta_u| / (1 - X) over random states is finite (its value
    is reported). Part 2: along rho_s = (1-s) tgt + s sigma the ratio
    Theta_u / d_B^2 at s = 1e-4 is at most ratio_bound times its value at
    s = 1e-1, for random directions sigma (the ratio vanishes at the
    target, which is what makes the exponent of the closed loop survive).
    """
    params = _default_params()
    if params.target != target:
        params = ModelParams(n_channels=2, eta1=params.eta1, M1=params.M1,
                             eta2=params.eta2, M2=params.M2, omega=params.omega,
                             target=target)
    ops = operators(params)
    ctl = controller or Controller.two_channel(target)
    rng = np.random.default_rng(seed)

    states = _random_states(n_samples, rng)
    tgt_proj = ops.target.projector
    x = np.clip(np.einsum("nij,ji->n", states, tgt_proj).real, 0.0, 1.0)
    t1 = -2.0 * np.einsum("ij,njk,ki->n", ops.H1, states, tgt_proj).imag
    u = ctl.alpha * (1.0 - x) ** ctl.beta - ctl.gamma * t1
    theta = u * t1
    ratios = np.abs(theta) / np.maximum(1.0 - x, 1e-300)
    sup_ratio = float(np.max(ratios))

    s_small, s_large = 1e-4, 1e-1
    worst_pair = 0.0
    failed_dirs = 0
    for _ in range(n_directions):
        sigma = _random_states(1, rng)[0]

        def _ratio(s: float) -> float:
            rho_s = (1.0 - s) * tgt_proj + s * sigma
            d = bures_to_pure(rho_s, ops.target.vector)
            return theta_u(rho_s, ctl, ops) / (d * d)

        r_small = abs(_ratio(s_small))
        r_large = abs(_ratio(s_large))
        if r_small > ratio_bound * r_large:
            failed_dirs += 1
        if r_large > 0.0:
            worst_pair = max(worst_pair, r_small / r_large)

    return CheckResult(
        name="feedback-theta",
        passed=np.isfinite(sup_ratio) and failed_dirs == 0,
        metrics={"sup_theta_over_gap": sup_ratio,
                 "worst_interpolation_ratio": worst_pair,
                 "ratio_bound": ratio_bound, "samples": n_samples,
                 "directions": n_directions},
        detail="empirical sup |Theta_u|/(1-X) and the vanishing of "
               "Theta_u/d_B^2 toward the target")


def check_martingale(n_samples: int = 10_000, seed: int = 20_244,
                     drift_tol: float = 1e-12, diffusion_tol: float = 1e-10,
                     params: ModelParams | None = None) -> CheckResult:
    """Uncontrolled dynamics of the parity coordinates.

    Lambda2 and Gamma must be driftless, and their diffusion coefficients
    must match the closed forms -4 sqrt(e1 M1) L1 L2, 4 sqrt(e2 M2) Delta
    (for Lambda2) and -8 sqrt(e1 M1) Delta, 2 sqrt(e2 M2)(1 - Gamma^2)
    (for Gamma).
    """
    params = params or _default_params()
    ops = operators(params)
    rng = np.random.default_rng(seed)
    rho = _random_states(n_samples, rng)
    lam1, lam2, gam, delta = _batch_coordinates(rho)

    L1, L2 = ops.L1, ops.L2
    h0 = ops.H0
    drift = (-1j) * (h0 @ rho - rho @ h0)
    for lk in (L1, L2):
        lsq = lk @ lk
        drift = drift + lk @ rho @ lk - 0.5 * (lsq @ rho + rho @ lsq)
    g1 = L1 @ rho + rho @ L1 - 2.0 * np.einsum("nij,ji->n", rho, L1).real[:, None, None] * rho
    g2 = L2 @ rho + rho @ L2 - 2.0 * np.einsum("nij,ji->n", rho, L2).real[:, None, None] * rho

    def lam2_of(m):
        return (m[:, 1, 1] + m[:, 2, 2]).real

    def gamma_of(m):
        return 2.0 * m[:, 1, 2].real + 2.0 * m[:, 0, 3].real

    e1, e2 = params.eta1, params.eta2
    m1, m2 = params.M1, params.M2
    drift_err = max(float(np.max(np.abs(lam2_of(drift)))),
                    float(np.max(np.abs(gamma_of(drift)))))
    diff_err = max(
        float(np.max(np.abs(np.sqrt(e1) * lam2_of(g1) + 4.0 * np.sqrt(e1 * m1) * lam1 * lam2))),
        float(np.max(np.abs(np.sqrt(e2) * lam2_of(g2) - 4.0 * np.sqrt(e2 * m2) * delta))),
        float(np.max(np.abs(np.sqrt(e1) * gamma_of(g1) + 8.0 * np.sqrt(e1 * m1) * delta))),
        float(np.max(np.abs(np.sqrt(e2) * gamma_of(g2) - 2.0 * np.sqrt(e2 * m2) * (1.0 - gam ** 2)))),
    )
    return CheckResult(
        name="martingale", passed=drift_err <= drift_tol and diff_err <= diffusion_tol,
        metrics={"max_drift": drift_err, "max_diffusion_mismatch": diff_err,
                 "samples": n_samples},
        detail="driftlessness and diffusion coefficients of the parity coordinates")


SUITES = {
    "qsr-lyapunov": check_qsr_lyapunov,
    "bures-sandwich": check_bures_sandwich,
    "feedback-sandwich": check_feedback_sandwich,
    "feedback-theta": check_feedback_theta,
    "martingale": check_martingale,
}
