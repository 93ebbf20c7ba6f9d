"""Concurrence, populations and purity of two-qubit states."""
from dataclasses import dataclass

import numpy as np

from .baths import CorrelationProfile
from .core import as_density, require_physical

# sigma_y (x) sigma_y; identical in the (|1>,|0>) and (|0>,|1>) single-qubit orders
SPIN_FLIP = np.array([[0, 0, 0, -1],
                      [0, 0, 1, 0],
                      [0, 1, 0, 0],
                      [-1, 0, 0, 0]], dtype=complex)

CLAMP = 1e-10
ILL_CONDITIONED = 1e12


def _sqrtm_psd(rho):
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.where((w < 0) & (w >= -CLAMP), 0.0, w)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _clamped_roots(ev):
    ev = np.where((ev < 0) & (ev >= -CLAMP), 0.0, ev)
    return np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1]


def concurrence(rho, tol: float = 1e-6) -> float:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    The ``l_i`` are the decreasing square roots of the eigenvalues of
    ``rho (Y x Y) rho* (Y x Y)``.  For nearly singular ``rho`` the spectrum is
    taken from the Hermitian form ``sqrt(rho) (YY rho* YY) sqrt(rho)`` instead.

    Raises
    ------
    UnphysicalStateError
        If ``rho`` fails the physicality check at ``tol``.
    """
    rho = require_physical(rho, tol)
    flipped = SPIN_FLIP @ rho.conj() @ SPIN_FLIP
    if np.linalg.cond(rho) > ILL_CONDITIONED:
        s = _sqrtm_psd(rho)
        ev = np.linalg.eigvalsh(s @ flipped @ s)
    else:
        try:
            ev = np.linalg.eigvals(rho @ flipped).real
        except np.linalg.LinAlgError:
            s = _sqrtm_psd(rho)
            ev = np.linalg.eigvalsh(s @ flipped @ s)
    lam = _clamped_roots(ev)
    return float(min(max(0.0, lam[0] - lam[1:].sum()), 1.0))


def x_state_concurrence(rho) -> float:
    """``2 max(0, |r23| - sqrt(r11 r44), |r14| - sqrt(r22 r33))`` for X-shaped states.

    No physicality check: this is the closed form traditionally plotted for
    states started in a single-excitation basis state.
    """
    r = as_density(rho)
    p = np.clip(np.diag(r).real, 0.0, None)
    return float(2 * max(0.0, abs(r[1, 2]) - np.sqrt(p[0] * p[3]),
                         abs(r[0, 3]) - np.sqrt(p[1] * p[2])))


def concurrence_bell(profile: CorrelationProfile, t):
    """``exp(-G(t))``, the concurrence of the evolved singlet-like Bell state."""
    c = np.exp(-np.asarray(profile.G(t), dtype=float))
    return c.item() if np.ndim(t) == 0 else c


def population(rho, index: int) -> float:
    """Diagonal element ``rho[index, index]`` with 1-based ``index`` (1 = |11>, 4 = |00>)."""
    if index not in (1, 2, 3, 4):
        raise IndexError(f"basis index must be 1..4, got {index}")
    return float(as_density(rho)[index - 1, index - 1].real)


def populations(rho) -> np.ndarray:
    return np.diagonal(np.asarray(rho), axis1=-2, axis2=-1).real.copy()


def purity(rho) -> float:
    rho = as_density(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


@dataclass(frozen=True)
class ObservableSample:
    t: float
    concurrence: float
    populations: tuple
    purity: float


def observe(rho, t: float) -> ObservableSample:
    return ObservableSample(t, concurrence(rho), tuple(populations(rho)), purity(rho))
