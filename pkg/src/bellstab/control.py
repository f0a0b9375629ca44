"""Feedback laws driving the system toward a target Bell state.

Two designs are implemented besides the zero control:

* two_channel: scalar law u = alpha (1 - X)^beta - gamma Tr(i[H1, rho] tgt)
  acting through the single coupling Hamiltonian H1;
* one_channel: pair (u1, u2) = (gamma1 - T1, f(X) (gamma2 - T2)) acting
  through H1 and the target-dependent secondary Hamiltonian, with the
  smoothing gate f switching the second input off at low fidelity.

X denotes Tr(rho tgt). The sign of gamma2 relative to gamma1 is fixed by
requiring gamma1 H1 + gamma2 H2 to annihilate the target vector (otherwise
the closed loop keeps rotating the target and cannot converge); that sign
equals the product of the target's two parity eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BellState, OperatorSet, bell

__all__ = [
    "Controller",
    "gamma_sign",
    "fidelity",
    "smoothing_f",
    "control_signal",
    "theta_u",
]

CONTROLLER_KINDS = ("zero", "two_channel", "one_channel")


def gamma_sign(target: str | BellState) -> float:
    """Required sign of gamma2/gamma1 for the one-channel law."""
    tgt = target if isinstance(target, BellState) else bell(target)
    return tgt.zz_eigenvalue * tgt.xx_eigenvalue


@dataclass(frozen=True)
class Controller:
    kind: str = "zero"
    target: str = "psi_plus"
    alpha: float = 10.0
    beta: float = 12.0
    gamma: float = 1.0
    gamma1: float = 4.0
    gamma2: float | None = None
    epsilon: float = 0.15

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "two_channel":
            if self.alpha <= 0.0:
                raise ValueError(f"alpha must be > 0, got {self.alpha}")
            if self.beta <= 1.0:
                raise ValueError(f"beta must be > 1, got {self.beta}")
            if self.gamma <= 0.0:
                raise ValueError(f"gamma must be > 0, got {self.gamma}")
        elif self.kind == "one_channel":
            if not 0.0 < self.epsilon < 0.5:
                raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
            sign = gamma_sign(self.target)
            if self.gamma2 is None:
                object.__setattr__(self, "gamma2", sign * self.gamma1)
            if abs(abs(self.gamma1) - abs(self.gamma2)) > 1e-12:
                raise ValueError(
                    f"|gamma1| must equal |gamma2|, got {self.gamma1} / {self.gamma2}"
                )
            if self.gamma1 * self.gamma2 * sign <= 0.0:
                raise ValueError(
                    f"gamma2/gamma1 must have sign {sign:+.0f} for target "
                    f"{self.target} (the combined drive must leave the target "
                    f"invariant), got {self.gamma1} / {self.gamma2}"
                )

    @classmethod
    def zero(cls, target: str = "psi_plus") -> "Controller":
        return cls(kind="zero", target=target)

    @classmethod
    def two_channel(cls, target: str, alpha: float = 10.0, beta: float = 12.0,
                    gamma: float = 1.0) -> "Controller":
        return cls(kind="two_channel", target=target, alpha=alpha, beta=beta,
                   gamma=gamma)

    @classmethod
    def one_channel(cls, target: str, gamma1: float = 4.0,
                    gamma2: float | None = None,
                    epsilon: float = 0.15) -> "Controller":
        return cls(kind="one_channel", target=target, gamma1=gamma1,
                   gamma2=gamma2, epsilon=epsilon)

    def kernel_params(self) -> np.ndarray:
        """Parameter vector consumed by the compiled integrators."""
        return np.array([
            self.alpha, self.beta, self.gamma,
            self.gamma1, 0.0 if self.gamma2 is None else self.gamma2,
            self.epsilon,
        ])


def fidelity(rho, target: str | BellState) -> float:
    """X(rho) = Tr(rho tgt), the population on the target Bell state."""
    tgt = target if isinstance(target, BellState) else bell(target)
    return float(np.einsum("ij,ji->", rho, tgt.projector).real)


def smoothing_f(x: float, epsilon: float) -> float:
    """C1 ramp: 0 on [0, eps), sine bridge on [eps, 1-eps), 1 above."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"smoothing argument must lie in [0, 1], got {x}")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if x < epsilon:
        return 0.0
    if x >= 1.0 - epsilon:
        return 1.0
    return 0.5 * np.sin(np.pi * (x - 0.5) / (1.0 - 2.0 * epsilon)) + 0.5


def _commutator_trace(h, rho, tgt_proj) -> float:
    # Tr(i[H, rho] tgt) evaluated as -2 Im Tr(H rho tgt): exactly real.
    return -2.0 * float(np.einsum("ij,jk,ki->", h, rho, tgt_proj).imag)


def control_signal(rho, ctl: Controller, ops: OperatorSet) -> np.ndarray:
    """Feedback inputs at `rho`, one entry per control Hamiltonian in `ops`."""
    m = len(ops.controls)
    if ctl.kind == "zero":
        return np.zeros(m)
    tgt = ops.target.projector
    x = fidelity(rho, ops.target)
    t1 = _commutator_trace(ops.H1, rho, tgt)
    if ctl.kind == "two_channel":
        if m != 1:
            raise ValueError("two_channel law needs exactly one control Hamiltonian")
        return np.array([ctl.alpha * (1.0 - x) ** ctl.beta - ctl.gamma * t1])
    if m != 2:
        raise ValueError("one_channel law needs two control Hamiltonians")
    t2 = _commutator_trace(ops.H2, rho, tgt)
    u1 = ctl.gamma1 - t1
    u2 = smoothing_f(min(max(x, 0.0), 1.0), ctl.epsilon) * (ctl.gamma2 - t2)
    return np.array([u1, u2])


def theta_u(rho, ctl: Controller, ops: OperatorSet) -> float:
    """u(rho) Tr(i[H1, rho] tgt) for the scalar two-channel law."""
    if ctl.kind != "two_channel":
        raise ValueError("theta_u is defined for the two_channel law")
    u = control_signal(rho, ctl, ops)[0]
    return u * _commutator_trace(ops.H1, rho, ops.target.projector)
