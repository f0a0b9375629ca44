"""Physical model of a two-qubit system under continuous measurement.

Builds the Pauli/Bell constructions, the measurement operators
L1 = sqrt(M1) sigma_z x sigma_z and L2 = sqrt(M2) sigma_x x sigma_x, the
free and control Hamiltonians, and evaluates the drift and diffusion maps
of the conditioned master equation

    d rho = F0(rho) dt + sum_k Fk(rho) dt + sum_k sqrt(eta_k) Gk(rho) dW_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import commutator, dagger, kron, max_abs

__all__ = [
    "BELL_LABELS",
    "BellState",
    "ModelParams",
    "OperatorSet",
    "pauli",
    "bell",
    "bell_states",
    "operators",
    "hamiltonian_drift",
    "lindblad_drift",
    "measurement_diffusion",
    "support_drift",
    "random_density",
    "validate_density",
    "maximally_mixed",
]

DENSITY_ATOL = 1e-9

_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

BELL_LABELS = ("psi_plus", "psi_minus", "phi_plus", "phi_minus")

_BELL_VECTORS = {
    "psi_plus": np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2),
    "psi_minus": np.array([1, 0, 0, -1], dtype=np.complex128) / np.sqrt(2),
    "phi_plus": np.array([0, 1, 1, 0], dtype=np.complex128) / np.sqrt(2),
    "phi_minus": np.array([0, 1, -1, 0], dtype=np.complex128) / np.sqrt(2),
}

_BELL_ALIASES = {
    "psi+": "psi_plus", "psi-": "psi_minus",
    "phi+": "phi_plus", "phi-": "phi_minus",
}


def pauli(axis: str) -> np.ndarray:
    """Pauli matrix for axis 'x', 'y' or 'z'."""
    try:
        return _SIGMA[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


@dataclass(frozen=True)
class BellState:
    label: str
    vector: np.ndarray
    projector: np.ndarray

    # eigenvalues under the parity observables sigma_z x sigma_z / sigma_x x sigma_x
    @property
    def zz_eigenvalue(self) -> float:
        return 1.0 if self.label.startswith("psi") else -1.0

    @property
    def xx_eigenvalue(self) -> float:
        return 1.0 if self.label.endswith("plus") else -1.0


def canonical_bell_label(label: str) -> str:
    name = label.strip().lower()
    name = _BELL_ALIASES.get(name, name)
    if name not in BELL_LABELS:
        raise ValueError(f"unknown Bell state label {label!r}")
    return name


def bell(label: str) -> BellState:
    """Bell state by label ('psi_plus', 'psi_minus', 'phi_plus', 'phi_minus')."""
    name = canonical_bell_label(label)
    vec = _BELL_VECTORS[name].copy()
    # build the projector from the unnormalized integer vector so its
    # entries are exact multiples of 1/2 (outer(vec, vec) picks up 1e-16
    # noise that the sqrt in the Lyapunov functions amplifies)
    unnormalized = np.round(vec * np.sqrt(2.0)).astype(np.complex128)
    projector = np.outer(unnormalized, unnormalized.conj()) / 2.0
    return BellState(name, vec, projector)


def bell_states() -> tuple[BellState, ...]:
    return tuple(bell(name) for name in BELL_LABELS)


@dataclass(frozen=True)
class ModelParams:
    """Measurement channels, strengths and efficiencies, and the target state.

    With one channel only the z-parity measurement is active and eta2/M2
    are ignored.
    """

    n_channels: int = 2
    eta1: float = 0.3
    M1: float = 1.0
    eta2: float = 0.4
    M2: float = 0.9
    omega: float = 0.3
    target: str = "psi_plus"

    def __post_init__(self):
        if self.n_channels not in (1, 2):
            raise ValueError(f"n_channels must be 1 or 2, got {self.n_channels}")
        for name in ("eta1", "eta2")[: self.n_channels]:
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {val}")
        for name in ("M1", "M2")[: self.n_channels]:
            val = getattr(self, name)
            if val <= 0.0:
                raise ValueError(f"{name} must be positive, got {val}")
        if self.omega < 0.0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        object.__setattr__(self, "target", canonical_bell_label(self.target))

    @property
    def efficiencies(self) -> tuple[float, ...]:
        return (self.eta1,) if self.n_channels == 1 else (self.eta1, self.eta2)

    @property
    def strengths(self) -> tuple[float, ...]:
        return (self.M1,) if self.n_channels == 1 else (self.M1, self.M2)

    @property
    def contraction_rate(self) -> float:
        """min_k eta_k M_k over the active channels."""
        return min(e * m for e, m in zip(self.efficiencies, self.strengths))


@dataclass(frozen=True)
class OperatorSet:
    """Concrete operators for a given ModelParams."""

    L1: np.ndarray
    L2: np.ndarray | None
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray | None
    target: BellState
    measurements: tuple[np.ndarray, ...] = field(repr=False, default=())
    controls: tuple[np.ndarray, ...] = field(repr=False, default=())


def _parity_zz() -> np.ndarray:
    return kron(_SIGMA["z"], _SIGMA["z"])


def _parity_xx() -> np.ndarray:
    return kron(_SIGMA["x"], _SIGMA["x"])


def coupling_hamiltonian() -> np.ndarray:
    """H1 = sigma_z x sigma_y - 3 (1 x sigma_y); couples the two parity sectors."""
    eye = np.eye(2, dtype=np.complex128)
    return kron(_SIGMA["z"], _SIGMA["y"]) - 3.0 * kron(eye, _SIGMA["y"])


def secondary_hamiltonian(target: str) -> np.ndarray:
    """Second control Hamiltonian of the single-channel design.

    Psi targets use -sigma_y x sigma_z - 3 (sigma_y x 1); Phi targets flip
    the sign of the first term.
    """
    eye = np.eye(2, dtype=np.complex128)
    a = kron(_SIGMA["y"], _SIGMA["z"])
    b = 3.0 * kron(_SIGMA["y"], eye)
    return -a - b if canonical_bell_label(target).startswith("psi") else a - b


def operators(params: ModelParams) -> OperatorSet:
    target = bell(params.target)
    lz = _parity_zz()
    lx = _parity_xx()
    L1 = np.sqrt(params.M1) * lz
    H0 = params.omega * lz
    H1 = coupling_hamiltonian()
    if params.n_channels == 2:
        L2 = np.sqrt(params.M2) * lx
        return OperatorSet(L1, L2, H0, H1, None, target,
                           measurements=(L1, L2), controls=(H1,))
    H2 = secondary_hamiltonian(params.target)
    return OperatorSet(L1, None, H0, H1, H2, target,
                       measurements=(L1,), controls=(H1, H2))


def hamiltonian_drift(rho, u, ops: OperatorSet) -> np.ndarray:
    """-i[H0, rho] - i sum_j u_j [H_j, rho]."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size != len(ops.controls):
        raise ValueError(
            f"control vector has {u.size} entries, expected {len(ops.controls)}"
        )
    h = ops.H0.copy()
    for uj, hj in zip(u, ops.controls):
        h = h + uj * hj
    return -1j * commutator(h, rho)


def lindblad_drift(rho, L) -> np.ndarray:
    """L rho L - L^2 rho / 2 - rho L^2 / 2 for a Hermitian L."""
    lsq = L @ L
    return L @ rho @ L - 0.5 * (lsq @ rho + rho @ lsq)


def measurement_diffusion(rho, L) -> np.ndarray:
    """L rho + rho L - 2 Tr(L rho) rho for a Hermitian L."""
    return L @ rho + rho @ L - 2.0 * np.trace(L @ rho).real * rho


def support_drift(rho, channel: int, ops: OperatorSet, params: ModelParams) -> np.ndarray:
    """Deterministic drift replacing the Lindblad term in the reachability ODE.

    (1 - eta)(L rho L - M rho) + 2 eta Tr(L rho) G(rho). The M rho term
    keeps the field traceless for any measurement strength.
    """
    if channel not in (1, 2)[: params.n_channels]:
        raise ValueError(f"channel {channel} not active for this model")
    L = ops.measurements[channel - 1]
    eta = params.efficiencies[channel - 1]
    strength = params.strengths[channel - 1]
    ell = np.trace(L @ rho).real
    return ((1.0 - eta) * (L @ rho @ L - strength * rho)
            + 2.0 * eta * ell * measurement_diffusion(rho, L))


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=np.complex128) / 4.0


def random_density(rng: np.random.Generator) -> np.ndarray:
    """Full-rank random state: G G* / Tr(G G*) with iid complex Gaussian G."""
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    w = g @ g.conj().T
    return w / np.trace(w).real


def validate_density(rho, atol: float = DENSITY_ATOL) -> np.ndarray:
    """Check Hermiticity, unit trace, and positivity up to `atol`."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got shape {rho.shape}")
    asym = max_abs(rho - dagger(rho))
    if asym > atol:
        raise ValueError(f"density matrix not Hermitian: asymmetry {asym:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix trace {tr:.12g} != 1")
    evals = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if evals[0] < -atol:
        raise ValueError(f"density matrix has negative eigenvalue {evals[0]:.3e}")
    return rho
