"""Brute-force integration of the second-order (Born) master equation.

    d rho/dt = -i [H_s, rho(0)] - t [H_s, [H_s, rho(t)]]
               + sum_j  B(t) [s-_j rho, s+_j] + conj(B(t)) [s-_j, rho s+_j]

with ``H_s = K (s+_1 s-_2 + s-_1 s+_2)``.  This module knows nothing about the
closed-form solution and is used to check it.
"""
from dataclasses import dataclass

import numpy as np

from .baths import CorrelationProfile, make_profile
from .core import as_density

# single-qubit operators in the (|1>, |0>) order: s- maps |1> -> |0>
_SM = np.array([[0, 0], [1, 0]], dtype=complex)
_SP = _SM.T.copy()
_I2 = np.eye(2, dtype=complex)

SIGMA_MINUS = (np.kron(_SM, _I2), np.kron(_I2, _SM))
SIGMA_PLUS = (np.kron(_SP, _I2), np.kron(_I2, _SP))

# slot order of the vectorised state, as (row, col) index pairs
R_ORDER = ((0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (2, 1), (0, 1), (2, 3),
           (1, 0), (3, 2), (0, 2), (1, 3), (2, 0), (3, 1), (0, 3), (3, 0))

DRIFT_LIMIT = 1e-4


class OracleError(RuntimeError):
    pass


def exchange_hamiltonian(K: float) -> np.ndarray:
    return K * (SIGMA_PLUS[0] @ SIGMA_MINUS[1] + SIGMA_MINUS[0] @ SIGMA_PLUS[1])


def to_R(rho) -> np.ndarray:
    """16-component vector in the population/coherence-pair slot order."""
    rho = as_density(rho)
    return np.array([rho[i, j] for i, j in R_ORDER])


def from_R(r) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    rho = np.empty((4, 4), dtype=complex)
    for k, (i, j) in enumerate(R_ORDER):
        rho[i, j] = r[k]
    return rho


def _comm(a, b):
    return a @ b - b @ a


def _dissipator_B(rho):
    """Part of the two dissipators multiplying ``B(t)``."""
    return sum(_comm(sm @ rho, sp) for sm, sp in zip(SIGMA_MINUS, SIGMA_PLUS))


def _dissipator_Bbar(rho):
    """Part of the two dissipators multiplying ``conj(B(t))``."""
    return sum(_comm(sm, rho @ sp) for sm, sp in zip(SIGMA_MINUS, SIGMA_PLUS))


def me_rhs(params, profile: CorrelationProfile, t, rho, rho0, inhomogeneous=True):
    """Right-hand side ``d rho/dt`` at time ``t``."""
    B = complex(profile.B(t))
    if not np.isfinite(B):
        raise FloatingPointError(f"non-finite B({t})")
    rho = as_density(rho)
    H = exchange_hamiltonian(params.K)
    out = -t * _comm(H, _comm(H, rho)) + B * _dissipator_B(rho) + B.conjugate() * _dissipator_Bbar(rho)
    if inhomogeneous:
        out = out - 1j * _comm(H, as_density(rho0))
    return out


def _superoperator(fn):
    """16x16 matrix of a linear map acting on row-major flattened 4x4 matrices."""
    cols = []
    for k in range(16):
        e = np.zeros(16, dtype=complex)
        e[k] = 1.0
        cols.append(fn(e.reshape(4, 4)).reshape(16))
    return np.array(cols).T


def generator_parts(params):
    """``(S, D, Dbar)`` with ``L(t) = t S + B(t) D + conj(B(t)) Dbar``."""
    H = exchange_hamiltonian(params.K)
    S = _superoperator(lambda r: -_comm(H, _comm(H, r)))
    return S, _superoperator(_dissipator_B), _superoperator(_dissipator_Bbar)


def lambda_matrix(params, profile: CorrelationProfile, t) -> np.ndarray:
    """Population generator at zero temperature (absorption rates vanish)."""
    beta = 2.0 * complex(profile.B(t)).real
    x = 2 * params.K ** 2 * t
    return np.array([
        [-2 * beta, 0.0, 0.0, 0.0],
        [beta, -x - beta, x, 0.0],
        [beta, x, -x - beta, 0.0],
        [0.0, beta, beta, 0.0],
    ])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray   # (n, 4, 4)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.shape != (self.times.size, 4, 4):
            raise ValueError("states must have shape (len(times), 4, 4)")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")


def max_deviation(a: Trajectory, b: Trajectory) -> float:
    """Largest elementwise ``|a - b|`` over all times."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=1e-12, atol=1e-14):
        raise ValueError("trajectories are on different time grids")
    return float(np.max(np.abs(a.states - b.states)))


def _snapshot_times(t_end, dt, times):
    if times is None:
        n = int(np.ceil(t_end / dt - 1e-9))
        return np.linspace(0.0, t_end, n + 1)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("snapshot times must be increasing and non-negative")
    return times


def step_bound(params, profile: CorrelationProfile, t_end: float) -> float:
    """Largest admissible step: ``(rate + K^2 t_end) dt <= 0.05``."""
    return 0.05 / (profile.rate + params.K ** 2 * t_end)


def integrate_me(rho0, params, bath, t_end: float, dt: float, times=None,
                 inhomogeneous=True, check_step=True) -> Trajectory:
    """Fixed-step RK4 integration from 0 to ``t_end``.

    ``bath`` is a bath model or a ready ``CorrelationProfile``.  States are
    recorded at ``times`` (default: every step); steps between snapshots are
    equal and no longer than ``dt``.
    """
    rho0 = as_density(rho0)
    profile = bath if isinstance(bath, CorrelationProfile) else make_profile(bath, t_max=t_end)
    if not (t_end > 0 and dt > 0):
        raise ValueError("t_end and dt must be positive")
    if check_step and dt > step_bound(params, profile, t_end) * (1 + 1e-12):
        raise ValueError(
            f"step {dt:g} violates (rate + K^2 t_end) dt <= 0.05 "
            f"(max {step_bound(params, profile, t_end):g})")
    snaps = _snapshot_times(t_end, dt, times)
    if snaps[-1] > t_end * (1 + 1e-12):
        raise ValueError("snapshot beyond t_end")

    S, D, Db = generator_parts(params)
    H = exchange_hamiltonian(params.K)
    drive = (-1j * _comm(H, rho0)).reshape(16) if inhomogeneous else np.zeros(16, complex)

    def rhs(t, r):
        B = complex(profile.B(t))
        return (t * S + B * D + B.conjugate() * Db) @ r + drive

    r = rho0.reshape(16).copy()
    t = 0.0
    out = []
    for target in snaps:
        n = int(np.ceil((target - t) / dt - 1e-9))
        if n > 0:
            h = (target - t) / n
            for _ in range(n):
                k1 = rhs(t, r)
                k2 = rhs(t + 0.5 * h, r + 0.5 * h * k1)
                k3 = rhs(t + 0.5 * h, r + 0.5 * h * k2)
                k4 = rhs(t + h, r + h * k3)
                r = r + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
                m = r.reshape(4, 4)
                r = (0.5 * (m + m.conj().T)).reshape(16)
            t = target
        if not np.all(np.isfinite(r)):
            raise OracleError(f"non-finite state at t={t:g}")
        drift = abs(np.trace(r.reshape(4, 4)) - np.trace(rho0))
        if drift > DRIFT_LIMIT:
            raise OracleError(f"trace drifted by {drift:.3g} at t={t:g}; reduce the step")
        out.append(r.reshape(4, 4).copy())
    return Trajectory(snaps, np.array(out))


def integrate_populations(params, profile: CorrelationProfile, p0, t_end: float, dt: float):
    """RK4 solution of ``dp/dt = Lambda(t) p`` sampled at every step."""
    n = int(np.ceil(t_end / dt))
    h = t_end / n
    p = np.asarray(p0, dtype=float).copy()
    ts, ps = [0.0], [p.copy()]
    for k in range(n):
        t = k * h
        k1 = lambda_matrix(params, profile, t) @ p
        lm = lambda_matrix(params, profile, t + 0.5 * h)
        k2 = lm @ (p + 0.5 * h * k1)
        k3 = lm @ (p + 0.5 * h * k2)
        k4 = lambda_matrix(params, profile, t + h) @ (p + h * k3)
        p = p + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append((k + 1) * h)
        ps.append(p.copy())
    return np.array(ts), np.array(ps)
