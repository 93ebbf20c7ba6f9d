"""Spectral densities and their zero-temperature correlation functions.

For every bath model three functions of time are provided:

``B(t)``
    the integrated bath response ``i sum_n |g_n|^2 (1 - e^{i D t}) / D`` with
    detuning ``D = eps - omega_n``,
``Phi(t)``
    its running integral ``int_0^t B``,
``G(t)``
    the decoherence exponent ``2 Re Phi(t)``.

The Lorentzian and Ohmic (Lorentz-Drude) families use their resonant closed
forms.  A tabulated spectrum is handled by quadrature over the continuum.
"""
from dataclasses import dataclass, field
from typing import Callable, Union
import re

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .quadrature import QuadratureError, gk_integrate

TAYLOR_SWITCH = 1e-4   # |D| t below which the resonant kernel is series-expanded
TRUNCATION = 1e-12     # spectral weight cut relative to max J


@dataclass(frozen=True)
class Lorentzian:
    """Lorentzian spectral density of width ``gamma`` and strength ``gamma0``."""

    gamma: float
    gamma0: float

    def __post_init__(self):
        _positive(gamma=self.gamma, gamma0=self.gamma0)

    @property
    def rate(self) -> float:
        return max(self.gamma, self.gamma0)


@dataclass(frozen=True)
class OhmicLorentzDrude:
    """Ohmic density with Lorentz-Drude cut-off ``omega_c``; ``omega0 = eps/2``."""

    omega_c: float
    omega0: float

    def __post_init__(self):
        _positive(omega_c=self.omega_c, omega0=self.omega0)

    @property
    def rate(self) -> float:
        z = abs(complex(self.omega_c, -self.omega0))
        return max(z, 4 * self.omega_c ** 2 / z)


@dataclass(frozen=True)
class MarkovianFlat:
    """Memoryless reference: ``B(t) = gamma0 / 2`` for all ``t > 0``."""

    gamma0: float

    def __post_init__(self):
        _positive(gamma0=self.gamma0)

    @property
    def rate(self) -> float:
        return self.gamma0


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Sampled spectral density ``J(omega)``.

    ``epsilon`` is the frequency entering the detuning ``epsilon - omega``.
    Between samples ``J`` is a cubic spline clipped at zero.
    """

    omega: np.ndarray
    J: np.ndarray
    epsilon: float
    _spline: Callable = field(init=False, repr=False)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        J = np.asarray(self.J, dtype=float)
        if omega.ndim != 1 or omega.size == 0:
            raise ValueError("empty spectral table")
        if omega.shape != J.shape:
            raise ValueError("omega and J must have the same length")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(J))):
            raise ValueError("spectral table contains non-finite values")
        if omega.size > 1 and np.any(np.diff(omega) <= 0):
            raise ValueError("spectral table must be strictly sorted by omega")
        if np.any(J < 0):
            raise ValueError("spectral density must be non-negative")
        _positive(epsilon=self.epsilon)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "J", J)
        if omega.size >= 2:
            spl = CubicSpline(omega, J)
            object.__setattr__(self, "_spline", lambda w: np.clip(spl(w), 0.0, None))
        else:
            object.__setattr__(self, "_spline", lambda w: np.zeros_like(w))

    def density(self, w):
        return self._spline(np.asarray(w, dtype=float))

    def support(self):
        """Sample range where J exceeds the truncation threshold, or None."""
        jmax = self.J.max()
        if self.omega.size < 2 or jmax <= 0:
            return None
        idx = np.nonzero(self.J >= TRUNCATION * jmax)[0]
        lo, hi = idx[0], idx[-1]
        # keep one neighbouring sample so the spline tail is not clipped abruptly
        lo, hi = max(lo - 1, 0), min(hi + 1, self.omega.size - 1)
        if lo == hi:
            return None
        return self.omega[lo], self.omega[hi]

    @property
    def rate(self) -> float:
        """Detuning below which 99 % of the spectral weight lies."""
        sup = self.support()
        if sup is None:
            return 1.0
        w = np.linspace(sup[0], sup[1], 4001)
        d = np.abs(self.epsilon - w)
        order = np.argsort(d)
        weight = np.cumsum(self.density(w)[order])
        if weight[-1] <= 0:
            return 1.0
        k = np.searchsorted(weight, 0.99 * weight[-1])
        return max(d[order][min(k, d.size - 1)], 1e-3 * d.max(), 1e-12)


BathModel = Union[Lorentzian, OhmicLorentzDrude, MarkovianFlat, Tabulated]


def _positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive finite number, got {v!r}")


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("time must be finite and non-negative")
    return t


def _out(x, t):
    return x.item() if np.ndim(t) == 0 else x


# --- closed forms ------------------------------------------------------------

def _ohmic_z(m: OhmicLorentzDrude) -> complex:
    return complex(m.omega_c, -m.omega0)


def correlation_B(model: BathModel, t):
    """Integrated response ``B(t)`` (complex); ``t`` may be an array."""
    tt = _times(t)
    if isinstance(model, Lorentzian):
        b = 0.5 * model.gamma0 * -np.expm1(-model.gamma * tt) + 0j
    elif isinstance(model, OhmicLorentzDrude):
        z = _ohmic_z(model)
        b = -2j * model.omega_c ** 2 / z * -np.expm1(-z * tt)
    elif isinstance(model, MarkovianFlat):
        b = np.full(tt.shape, 0.5 * model.gamma0, dtype=complex)
    elif isinstance(model, Tabulated):
        b = correlation_B_numeric(model, tt)
    else:
        raise TypeError(f"unknown bath model {model!r}")
    return _out(np.asarray(b), t)


def correlation_Phi(model: BathModel, t):
    """``Phi(t) = int_0^t B``.

    For a tabulated bath this builds a correlation profile up to ``max(t)``
    first, so batch the times in one call.
    """
    tt = _times(t)
    if isinstance(model, Lorentzian):
        g = model.gamma
        phi = 0.5 * model.gamma0 * (tt + np.expm1(-g * tt) / g) + 0j
    elif isinstance(model, OhmicLorentzDrude):
        z = _ohmic_z(model)
        phi = -2j * model.omega_c ** 2 / z * (tt + np.expm1(-z * tt) / z)
    elif isinstance(model, MarkovianFlat):
        phi = 0.5 * model.gamma0 * tt + 0j
    elif isinstance(model, Tabulated):
        t_max = float(np.max(tt)) if tt.size else 0.0
        phi = tabulated_profile(model, max(t_max, 1e-12)).Phi(tt)
    else:
        raise TypeError(f"unknown bath model {model!r}")
    return _out(np.asarray(phi), t)


def decoherence_G(model: BathModel, t):
    """Decoherence exponent ``G(t) >= 0`` (real)."""
    tt = _times(t)
    if isinstance(model, Lorentzian):
        g0, g = model.gamma0, model.gamma
        G = g0 * tt + (g0 / g) * np.expm1(-g * tt)
    elif isinstance(model, OhmicLorentzDrude):
        wc, w0 = model.omega_c, model.omega0
        s = wc ** 2 + w0 ** 2
        decay = np.exp(-wc * tt)
        G = (4 * wc ** 2 * w0 / s * tt
             + 4 * wc ** 2 * (wc ** 2 - w0 ** 2) / s ** 2 * decay * np.sin(w0 * tt)
             + 8 * wc ** 3 * w0 / s ** 2 * (decay * np.cos(w0 * tt) - 1.0))
    elif isinstance(model, MarkovianFlat):
        G = model.gamma0 * tt
    elif isinstance(model, Tabulated):
        G = 2.0 * np.real(correlation_Phi(model, tt))
    else:
        raise TypeError(f"unknown bath model {model!r}")
    return _out(np.asarray(G, dtype=float), t)


# --- continuum quadrature ----------------------------------------------------

def resonant_kernel(detuning, t):
    """``i (1 - exp(i D t)) / D`` with its ``D -> 0`` limit ``t``.

    Broadcasts over ``detuning`` and ``t``.
    """
    d, t = np.broadcast_arrays(np.asarray(detuning, float), np.asarray(t, float))
    x = d * t
    small = np.abs(x) < TAYLOR_SWITCH
    safe = np.where(small, 1.0, d)
    # sin(x)/D + i (1 - cos x)/D, the latter as 2 sin^2(x/2)/D to avoid cancellation
    far = (np.sin(x) + 2j * np.sin(0.5 * x) ** 2) / safe
    near = t * (1 + 0.5j * x - x * x / 6 - 1j * x ** 3 / 24)
    return np.where(small, near, far)


def _partition(model: Tabulated, t_max: float):
    lo, hi = model.support()
    pts = [lo, hi]
    if lo < model.epsilon < hi:
        pts.append(model.epsilon)
    # half an oscillation period per panel at the largest time
    if t_max > 0:
        n = int(np.ceil((hi - lo) * t_max / np.pi))
        pts.extend(np.linspace(lo, hi, min(max(n, 1), 20000) + 1))
    return np.unique(pts)


def correlation_B_numeric(model: Tabulated, t, epsabs=1e-10, epsrel=1e-9,
                          with_derivative=False):
    """Continuum ``B(t) = i int J(w) (1 - e^{i(eps-w)t}) / (eps-w) dw``.

    ``t`` may be an array; all times share the adaptive partition.  With
    ``with_derivative`` the bath correlation ``dB/dt = int J e^{i(eps-w)t}``
    is returned as well.
    """
    tt = np.atleast_1d(_times(t)).astype(float)
    sup = model.support()
    if sup is None:
        zero = np.zeros(tt.shape, dtype=complex)
        res = _out(zero, t)
        return (res, _out(zero.copy(), t)) if with_derivative else res
    eps = model.epsilon

    def integrand(w):
        d = eps - w
        jw = model.density(w)
        x = tt[:, None] * d[None, :]
        phase = np.exp(1j * x)
        small = np.abs(x) < TAYLOR_SWITCH
        safe = np.where(small, 1.0, d[None, :])
        k = (phase.imag + 1j * (1.0 - phase.real)) / safe
        if small.any():
            k[small] = resonant_kernel(np.broadcast_to(d, x.shape)[small],
                                       np.broadcast_to(tt[:, None], x.shape)[small])
        k *= jw[None, :]
        if with_derivative:
            k = np.concatenate([k, phase * jw[None, :]])
        return np.concatenate([k.real, k.imag])

    n = tt.size * (2 if with_derivative else 1)
    val, _ = gk_integrate(integrand, _partition(model, float(tt.max())),
                          epsabs=epsabs, epsrel=epsrel)
    val = val[:n] + 1j * val[n:]
    if not np.all(np.isfinite(val)):
        raise QuadratureError("non-finite correlation function")
    b = val[:tt.size].reshape(np.shape(t)) if np.ndim(t) else val[:1]
    b = _out(b, t)
    if with_derivative:
        db = val[tt.size:].reshape(np.shape(t)) if np.ndim(t) else val[tt.size:]
        return b, _out(db, t)
    return b


# --- profiles ----------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationProfile:
    """``B``, ``Phi`` and ``G`` as callables of time.

    ``rate`` is the model's characteristic inverse time scale and ``t_max``
    the largest time at which the profile may be evaluated.
    """

    B: Callable
    Phi: Callable
    G: Callable
    rate: float
    t_max: float = np.inf
    model: object = None


def make_profile(model: BathModel, t_max: float = None, dt: float = None) -> CorrelationProfile:
    """Correlation profile of ``model``.

    Closed-form models need no horizon; a tabulated model is sampled on a
    grid up to ``t_max`` (required) with spacing ``dt``.
    """
    if isinstance(model, Tabulated):
        if t_max is None:
            raise ValueError("a tabulated bath needs a horizon t_max")
        return tabulated_profile(model, t_max, dt)
    return CorrelationProfile(
        B=lambda t: correlation_B(model, t),
        Phi=lambda t: correlation_Phi(model, t),
        G=lambda t: decoherence_G(model, t),
        rate=model.rate,
        model=model,
    )


def tabulated_profile(model: Tabulated, t_max: float, dt: float = None) -> CorrelationProfile:
    """Sample ``B`` and ``dB/dt`` on a grid and interpolate (cubic Hermite).

    ``Phi`` is the exact antiderivative of the Hermite interpolant of ``B``.
    """
    if not (np.isfinite(t_max) and t_max > 0):
        raise ValueError("t_max must be positive")
    if dt is None:
        dt = min(t_max / 200, 0.02 / model.rate)
    n = max(int(np.ceil(t_max / dt)), 2)
    grid = np.linspace(0.0, t_max, n + 1)
    b = np.empty(grid.size, dtype=complex)
    db = np.empty(grid.size, dtype=complex)
    for chunk in np.array_split(np.arange(grid.size), max(grid.size // 64, 1)):
        b[chunk], db[chunk] = correlation_B_numeric(model, grid[chunk], with_derivative=True)
    b_re = CubicHermiteSpline(grid, b.real, db.real)
    b_im = CubicHermiteSpline(grid, b.imag, db.imag)
    phi_re, phi_im = b_re.antiderivative(), b_im.antiderivative()

    def check(t):
        tt = _times(t)
        if np.any(tt > t_max * (1 + 1e-12)):
            raise ValueError(f"time beyond tabulated profile horizon {t_max}")
        return tt

    def B(t):
        tt = check(t)
        return _out(np.asarray(b_re(tt) + 1j * b_im(tt)), t)

    def Phi(t):
        tt = check(t)
        return _out(np.asarray(phi_re(tt) + 1j * phi_im(tt)), t)

    def G(t):
        tt = check(t)
        return _out(np.asarray(2.0 * phi_re(tt)), t)

    return CorrelationProfile(B=B, Phi=Phi, G=G, rate=model.rate, t_max=t_max, model=model)


def scaled_profile(profile: CorrelationProfile, g_scale: float) -> CorrelationProfile:
    """Profile with ``G`` multiplied by ``g_scale`` (fault injection for validation)."""
    G = profile.G
    return CorrelationProfile(B=profile.B, Phi=profile.Phi,
                              G=lambda t: g_scale * np.asarray(G(t)),
                              rate=profile.rate, t_max=profile.t_max, model=profile.model)


# --- spectrum files ----------------------------------------------------------

_UNITS = re.compile(r"#\s*units\s*:\s*(\w+)", re.IGNORECASE)


def load_spectrum(path, epsilon: float, detuning_epsilon: float = None) -> Tabulated:
    """Read a two-column ``omega J`` table.

    Values are in units of ``epsilon`` unless the file carries a
    ``# units: absolute`` header.  ``detuning_epsilon`` (absolute units,
    default ``epsilon``) is the frequency used in the detuning.
    """
    absolute = False
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            m = _UNITS.match(line.strip())
            if m:
                unit = m.group(1).lower()
                if unit not in ("absolute", "epsilon"):
                    raise ValueError(f"{path}:{lineno}: unknown units {unit!r}")
                absolute = unit == "absolute"
                continue
            body = line.split("#", 1)[0].split()
            if not body:
                continue
            if len(body) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(body)}")
            try:
                rows.append((float(body[0]), float(body[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry {line.strip()!r}") from None
    if not rows:
        raise ValueError(f"{path}: empty spectral table")
    data = np.array(rows)
    scale = 1.0 if absolute else epsilon
    return Tabulated(omega=data[:, 0] * scale, J=data[:, 1] * scale,
                     epsilon=epsilon if detuning_epsilon is None else detuning_epsilon)
