"""Closed-form solution of the second-order master equation at zero temperature.

The populations evolve with the 4x4 block ``u4``, the coherence pairs with
the 2x2 blocks ``u2_1`` / ``u2_2``, and the inhomogeneous exchange term adds
three exponent-weighted time integrals.  Those integrals are kept in product
form (``AuxIntegrals``): the bare integrands ``exp(2 K^2 t^2 + G)`` overflow
long before the products do.
"""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .baths import BathModel, CorrelationProfile, make_profile
from .core import SystemParams, as_density, bell_psi_minus, require_physical

# RK4 substep rule: max|f'| * h <= SUBSTEP_LIMIT (a stability/accuracy bound, <= 0.1)
SUBSTEP_LIMIT = 0.05
# substeps evaluated per vectorised batch
BATCH = 200_000


def _as_times(t):
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or not np.all(np.isfinite(tt)):
        raise ValueError("time must be finite and non-negative")
    return tt


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite correlation profile value")


def u4(params: SystemParams, profile: CorrelationProfile, t):
    """Population propagator; columns sum to one.  Shape ``(..., 4, 4)``."""
    tt = _as_times(t)
    G = np.asarray(profile.G(tt), dtype=float)
    _finite(G)
    e = np.exp(-G)
    g = np.exp(-2 * params.K ** 2 * tt ** 2)
    feed = e * -np.expm1(-G)
    out = np.zeros(tt.shape + (4, 4))
    out[..., 0, 0] = e * e
    out[..., 1, 0] = out[..., 2, 0] = feed
    out[..., 1, 1] = out[..., 2, 2] = 0.5 * e * (1 + g)
    out[..., 1, 2] = out[..., 2, 1] = 0.5 * e * (1 - g)
    out[..., 3, 0] = np.expm1(-G) ** 2
    out[..., 3, 1] = out[..., 3, 2] = -np.expm1(-G)
    out[..., 3, 3] = 1.0
    return out


def u2_1(params: SystemParams, profile: CorrelationProfile, t):
    """Propagator of the ``(rho23, rho32)`` pair."""
    tt = _as_times(t)
    G = np.asarray(profile.G(tt), dtype=float)
    _finite(G)
    e = 0.5 * np.exp(-G)
    g = np.exp(-2 * params.K ** 2 * tt ** 2)
    out = np.empty(tt.shape + (2, 2))
    out[..., 0, 0] = out[..., 1, 1] = e * (1 + g)
    out[..., 0, 1] = out[..., 1, 0] = e * (1 - g)
    return out


def u2_2(params: SystemParams, profile: CorrelationProfile, t):
    """Propagator of the ``(rho12, rho34)`` and ``(rho13, rho24)`` pairs.

    Normalised so that ``u2_2(0)`` is the identity.
    """
    tt = _as_times(t)
    G = np.asarray(profile.G(tt), dtype=float)
    phi = np.asarray(profile.Phi(tt), dtype=complex)
    _finite(G, phi)
    pre = np.exp(-phi - 0.5 * params.K ** 2 * tt ** 2)
    out = np.zeros(tt.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = pre * np.exp(-G)
    out[..., 1, 0] = pre * -np.expm1(-G)
    out[..., 1, 1] = pre
    return out


# --- auxiliary integrals -----------------------------------------------------

def _exponent_rates(K, B, t):
    """d/dt of the three growing exponents at times ``t``; shape ``(3, n)``."""
    beta = 2.0 * B.real
    return np.stack([4 * K * K * t + beta + 0j, K * K * t + beta + B, K * K * t + B])


class AuxIntegrals:
    """Product-form exponent-weighted integrals on a time grid.

    ``I1(t) = exp(-f1(t)) int_0^t exp(f1)`` with ``f1 = 2K^2t^2 + G``,
    ``I2`` with ``f2 = K^2t^2/2 + G + Phi`` and ``I3`` with
    ``f3 = K^2t^2/2 + Phi``.  Each solves ``dI/dt = 1 - f'(t) I``,
    ``I(0) = 0``, stepped with classical RK4.  Off-grid values come from cubic
    Hermite interpolation using the exact derivative.
    """

    def __init__(self, params: SystemParams, profile: CorrelationProfile, t_grid,
                 substep_limit: float = SUBSTEP_LIMIT):
        grid = np.asarray(t_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
            raise ValueError("time grid must be 1-d, start at 0 and have >= 2 points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not 0 < substep_limit <= 0.1:
            raise ValueError("substep limit must lie in (0, 0.1]")
        self.params = params
        self.profile = profile
        self.substep_limit = substep_limit
        self.t = grid[:1]
        self.values = np.zeros((3, 1), dtype=complex)
        self._append(grid[1:])

    def _rates(self, t):
        B = np.asarray(self.profile.B(t), dtype=complex)
        _finite(B)
        return _exponent_rates(self.params.K, B, t)

    def _substeps(self, nodes):
        """RK4 substep count per interval; ``|f'|`` bounded by endpoints and midpoint."""
        h_grid = np.diff(nodes)
        n = nodes.size
        probe = np.concatenate([nodes, nodes[:-1] + 0.5 * h_grid])
        r = np.abs(self._rates(probe))
        rmax = np.max(np.stack([r[:, :n - 1], r[:, 1:n], r[:, n:]]), axis=(0, 1))
        nsub = np.maximum(np.ceil(rmax * h_grid / self.substep_limit), 1).astype(int)
        if np.any(h_grid / nsub <= np.spacing(nodes[1:])):
            raise FloatingPointError("RK4 substep underflow")
        return nsub

    def _append(self, new_nodes):
        nodes = np.concatenate([self.t[-1:], new_nodes])
        nsub = self._substeps(nodes)
        # bounded batches keep the substep arrays small on long horizons
        cut = np.searchsorted(np.cumsum(nsub), np.arange(1, nsub.sum() // BATCH + 1) * BATCH)
        bounds = np.unique(np.concatenate([[0], cut + 1, [nsub.size]]))
        bounds = bounds[bounds <= nsub.size]
        for a, b in zip(bounds[:-1], bounds[1:]):
            self._append_batch(nodes[a:b + 1], nsub[a:b])
        self._interp = None

    def _append_batch(self, nodes, nsub):
        h_grid = np.diff(nodes)
        h = np.repeat(h_grid / nsub, nsub)
        starts = np.repeat(nodes[:-1], nsub) + h * (
            np.arange(nsub.sum()) - np.repeat(np.cumsum(nsub) - nsub, nsub))
        a0 = self._rates(starts)
        am = self._rates(starts + 0.5 * h)
        a1 = self._rates(starts + h)
        # RK4 for y' = 1 - a(t) y is affine: y_next = P y + Q
        half = 0.5 * h
        k1p, k1q = -a0, np.ones_like(a0)
        k2p, k2q = -am * (1 + half * k1p), 1 - am * half * k1q
        k3p, k3q = -am * (1 + half * k2p), 1 - am * half * k2q
        k4p, k4q = -a1 * (1 + h * k3p), 1 - a1 * h * k3q
        P = 1 + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        Q = h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)

        # compose the substeps of each interval into one affine map y -> A y + C;
        # |h f'| <= 0.05 keeps every P near 1, so the log-sums are well conditioned
        ends = np.cumsum(nsub) - 1
        first = ends - nsub + 1
        logP = np.log(P)
        L = np.cumsum(logP, axis=1)
        suffix = np.exp(np.repeat(L[:, ends], nsub, axis=1) - L)
        C = np.add.reduceat(Q * suffix, first, axis=1)
        A = np.exp(L[:, ends] - L[:, first] + logP[:, first])

        out = np.empty((3, nodes.size - 1), dtype=complex)
        for c in range(3):
            y = complex(self.values[c, -1])
            Ac, Cc = A[c].tolist(), C[c].tolist()
            ys = [0j] * len(Ac)
            for i in range(len(Ac)):
                y = Ac[i] * y + Cc[i]
                ys[i] = y
            out[c] = ys
        _finite(out)
        self.t = np.concatenate([self.t, nodes[1:]])
        self.values = np.concatenate([self.values, out], axis=1)

    def extend(self, t_end: float):
        """Continue the grid with the current spacing until it covers ``t_end``."""
        if t_end <= self.t[-1]:
            return
        step = self.t[-1] - self.t[-2]
        n = int(np.ceil((t_end - self.t[-1]) / step))
        self._append(self.t[-1] + step * np.arange(1, n + 1))

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def derivatives(self):
        return 1.0 - self._rates(self.t) * self.values

    def _splines(self):
        if self._interp is None:
            d = self.derivatives()
            self._interp = [
                (CubicHermiteSpline(self.t, self.values[c].real, d[c].real),
                 CubicHermiteSpline(self.t, self.values[c].imag, d[c].imag))
                for c in range(3)]
        return self._interp

    def __call__(self, t):
        """``(I1, I2, I3)`` at ``t``; extends the grid if needed."""
        tt = _as_times(t)
        if tt.size and tt.max() > self.t_max:
            self.extend(float(tt.max()))
        res = []
        for re_s, im_s in self._splines():
            res.append(re_s(tt) + 1j * im_s(tt))
        I1, I2, I3 = res
        return I1.real, I2, I3

    def I1(self, t):
        return self(t)[0]

    def I2(self, t):
        return self(t)[1]

    def I3(self, t):
        return self(t)[2]


def default_grid_step(params: SystemParams, profile: CorrelationProfile) -> float:
    h = 0.01 / profile.rate
    if params.K > 0:
        h = min(h, 0.1 / params.K)
    return h


def aux_integrals(params: SystemParams, profile: CorrelationProfile, t_grid=None,
                  t_max: float = None) -> AuxIntegrals:
    """Build the product-form integrals on ``t_grid`` (or a default uniform grid)."""
    if t_grid is None:
        if t_max is None:
            t_max = 1.0
        h = default_grid_step(params, profile)
        t_grid = np.linspace(0.0, t_max, max(int(np.ceil(t_max / h)), 1) + 1)
    return AuxIntegrals(params, profile, t_grid)


# --- full solution -----------------------------------------------------------

@dataclass
class Propagator:
    """Everything needed to map ``rho(0)`` to ``rho(t)`` for one system and bath.

    ``profile`` may be given instead of a bath model (e.g. for a tabulated
    spectrum sampled elsewhere).
    """

    params: SystemParams
    profile: CorrelationProfile
    aux: AuxIntegrals = None

    def integrals(self) -> AuxIntegrals:
        if self.aux is None:
            horizon = self.profile.t_max if np.isfinite(self.profile.t_max) else 1.0
            self.aux = aux_integrals(self.params, self.profile, t_max=horizon)
        return self.aux

    @classmethod
    def from_bath(cls, params: SystemParams, bath: BathModel, t_max: float = 1.0):
        return cls(params, make_profile(bath, t_max=t_max))

    def u4(self, t):
        return u4(self.params, self.profile, t)

    def u2_1(self, t):
        return u2_1(self.params, self.profile, t)

    def u2_2(self, t):
        return u2_2(self.params, self.profile, t)

    def evolve(self, rho0, t):
        """Density matrix at ``t`` (scalar -> ``(4,4)``, array -> ``(..., 4, 4)``)."""
        p = require_physical(rho0, 1e-8, "initial state")
        tt = _as_times(t)
        K = self.params.K
        G = np.asarray(self.profile.G(tt), dtype=float)
        phi = np.asarray(self.profile.Phi(tt), dtype=complex)
        _finite(G, phi)
        I1, I2, I3 = self.integrals()(tt)

        eG = np.exp(-G)
        gK = np.exp(-2 * K * K * tt ** 2)
        E2 = np.exp(-0.5 * K * K * tt ** 2 - G - phi)
        E3 = np.exp(-0.5 * K * K * tt ** 2 - phi)
        feed = eG * -np.expm1(-G)
        c0 = p[1, 2]

        r = np.zeros(tt.shape + (4, 4), dtype=complex)
        r[..., 0, 0] = eG * eG * p[0, 0].real
        r[..., 1, 1] = (feed * p[0, 0].real + 0.5 * eG * (1 + gK) * p[1, 1].real
                        + 0.5 * eG * (1 - gK) * p[2, 2].real - 2 * K * c0.imag * I1)
        r[..., 2, 2] = (feed * p[0, 0].real + 0.5 * eG * (1 - gK) * p[1, 1].real
                        + 0.5 * eG * (1 + gK) * p[2, 2].real + 2 * K * c0.imag * I1)
        r[..., 3, 3] = 1 - r[..., 0, 0] - r[..., 1, 1] - r[..., 2, 2]
        r[..., 0, 1] = E2 * p[0, 1] + 1j * K * p[0, 2] * I2
        r[..., 0, 2] = E2 * p[0, 2] + 1j * K * p[0, 1] * I2
        r[..., 0, 3] = np.exp(-2 * phi) * p[0, 3]
        r[..., 1, 2] = (eG * (c0.real + 1j * gK * c0.imag)
                        + 1j * K * (p[1, 1] - p[2, 2]).real * I1)
        r[..., 1, 3] = (E3 * (p[0, 2] - eG * p[0, 2] + p[1, 3])
                        + 1j * K * (p[0, 1] - p[2, 3]) * I3 - 1j * K * p[0, 1] * I2)
        # qubit-swap image of the rho24 line
        r[..., 2, 3] = (E3 * (p[0, 1] - eG * p[0, 1] + p[2, 3])
                        + 1j * K * (p[0, 2] - p[1, 3]) * I3 - 1j * K * p[0, 2] * I2)
        iu = np.triu_indices(4, 1)
        r[..., iu[1], iu[0]] = r[..., iu[0], iu[1]].conj()
        return r

    def evolve_bell(self, t):
        tt = _as_times(t)
        e = np.exp(-np.asarray(self.profile.G(tt), dtype=float))
        _finite(e)
        bell = bell_psi_minus()
        ground = np.zeros((4, 4), dtype=complex)
        ground[3, 3] = 1.0
        return e[..., None, None] * bell + (1 - e)[..., None, None] * ground


def _bundle(params, bath, t):
    horizon = float(np.max(_as_times(t))) if np.size(t) else 1.0
    return Propagator.from_bath(params, bath, t_max=max(horizon, 1e-9))


def evolve(rho0, params: SystemParams, bath: BathModel, t):
    """One-shot ``rho(t)`` from ``rho(0)``; build a ``Propagator`` for repeated calls."""
    as_density(rho0)
    return _bundle(params, bath, t).evolve(rho0, t)


def evolve_bell(bath: BathModel, params: SystemParams, t):
    """``e^{-G} |Psi-><Psi-| + (1 - e^{-G}) |00><00|``."""
    return _bundle(params, bath, t).evolve_bell(t)
