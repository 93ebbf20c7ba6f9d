"""Two-qubit states, system parameters and physicality diagnostics.

Density matrices are plain ``(4, 4)`` complex numpy arrays in the basis
order ``|11>, |10>, |01>, |00>`` (indices 0..3 in numpy, 1..4 in the usual
matrix-element labelling).  Qubit state ``1`` is the excited level.
"""
from dataclasses import dataclass

import numpy as np

# basis labels, in storage order
BASIS = ("11", "10", "01", "00")
KET11, KET10, KET01, KET00 = range(4)


class UnphysicalStateError(ValueError):
    """Raised when an input density matrix fails a physicality check."""


@dataclass(frozen=True)
class SystemParams:
    """Qubit splitting ``epsilon`` and exchange strength ``coupling_K``."""

    epsilon: float = 1.0
    coupling_K: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not np.isfinite(self.coupling_K) or self.coupling_K < 0:
            raise ValueError(f"coupling_K must be >= 0, got {self.coupling_K}")

    @property
    def K(self) -> float:
        return self.coupling_K


@dataclass(frozen=True)
class PhysicalityReport:
    trace_error: float
    hermiticity_error: float
    min_eigenvalue: float

    def ok(self, tol: float) -> bool:
        return (self.trace_error <= tol and self.hermiticity_error <= tol
                and self.min_eigenvalue >= -tol)


def as_density(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    return rho


def basis_ket(label: str) -> np.ndarray:
    """Unit vector for a basis label such as ``"10"``."""
    psi = np.zeros(4, dtype=complex)
    psi[BASIS.index(label)] = 1.0
    return psi


def density_from_pure(psi) -> np.ndarray:
    """Return ``|psi><psi|`` for a normalised 4-component state vector."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (4,):
        raise ValueError(f"expected 4 amplitudes, got {psi.shape[0]}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state vector not normalised (|psi|^2 = {norm!r})")
    return np.outer(psi, psi.conj())


def bell_psi_minus() -> np.ndarray:
    """Density matrix of (|10> - |01>)/sqrt(2)."""
    s = 1 / np.sqrt(2)
    return density_from_pure([0, s, -s, 0])


def check_physical(rho, tol: float = 1e-10) -> PhysicalityReport:
    """Measure how far ``rho`` is from a valid density matrix.

    Never raises on unphysical input; ``tol`` is only validated, the caller
    compares the report against it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = as_density(rho)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace_err = float(abs(np.trace(rho) - 1.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return PhysicalityReport(trace_err, herm, min_eig)


def require_physical(rho, tol: float, what: str = "density matrix") -> np.ndarray:
    rho = as_density(rho)
    rep = check_physical(rho, tol)
    if not rep.ok(tol):
        raise UnphysicalStateError(
            f"{what} is not physical at tol={tol:g}: trace error "
            f"{rep.trace_error:.3g}, hermiticity error {rep.hermiticity_error:.3g}, "
            f"min eigenvalue {rep.min_eigenvalue:.3g}")
    return rho


def random_density(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Random state from the induced (Hilbert-Schmidt for rank 4) measure."""
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)
