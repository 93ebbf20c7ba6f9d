"""Flat ``key=value`` run and sweep configurations.

Example::

    # Bell state in a Lorentzian bath
    system.epsilon = 2.0
    system.K = 1.0
    bath.kind = lorentzian
    bath.gamma0 = 1.0
    bath.gamma_ratio = 0.1
    initial_state = bell_psi_minus
    horizon.t_end = 5        # in units of the time scale below
    horizon.samples = 51
    time.unit = gamma0
    outputs = concurrence, populations

Sweeps add ``sweep.axis``, ``sweep.values`` (explicit list,
``linspace(a, b, n)`` or ``logspace(a, b, n)``) and optionally
``sweep.stem`` and ``sweep.plot`` (column to overlay).
"""
from dataclasses import dataclass, field
import os
import re

import numpy as np

from .baths import Lorentzian, MarkovianFlat, OhmicLorentzDrude, load_spectrum
from .core import (SystemParams, UnphysicalStateError, basis_ket, bell_psi_minus,
                   density_from_pure, require_physical)

BATH_KINDS = ("lorentzian", "ohmic", "markovian", "tabulated")
STATES = ("bell_psi_minus", "ket10", "ket01", "ket11", "ket00", "custom")
OBSERVABLES = ("concurrence", "concurrence_x", "populations", "purity",
               "min_eigenvalue", "density")
TIME_UNITS = ("gamma0", "omega0", "K", "absolute")

KNOWN_KEYS = {
    "system.epsilon", "system.K", "system.coupling_K",
    "bath.kind", "bath.gamma", "bath.gamma0", "bath.gamma_ratio", "bath.gamma0_over_K",
    "bath.omega_c", "bath.omega0", "bath.cutoff_ratio",
    "bath.file", "bath.epsilon", "bath.dt",
    "initial_state", "initial_state.re", "initial_state.im",
    "horizon.t_end", "horizon.samples", "time.unit", "outputs",
    "validate", "validate.tolerance", "validate.dt", "debug.g_scale",
    "sweep.axis", "sweep.values", "sweep.stem", "sweep.plot",
}


class ConfigError(ValueError):
    pass


@dataclass
class RawConfig:
    """Ordered key/value pairs plus the line each key came from."""

    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    source: str = "<config>"
    base_dir: str = "."

    def get(self, key, default=None):
        return self.values.get(key, default)

    def where(self, key) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else self.source

    def with_value(self, key, value) -> "RawConfig":
        vals = dict(self.values)
        vals[key] = str(value)
        lines = dict(self.lines)
        lines.setdefault(key, None)
        return RawConfig(vals, lines, self.source, self.base_dir)


def parse_text(text: str, source="<config>", base_dir=".") -> RawConfig:
    cfg = RawConfig(source=source, base_dir=base_dir)
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in cfg.values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        cfg.values[key] = value
        cfg.lines[key] = lineno
    return cfg


def load(path) -> RawConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(text, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)))


def apply_overrides(cfg: RawConfig, overrides) -> RawConfig:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r} in override")
        cfg = cfg.with_value(key, value)
    return cfg


def _float(cfg, key, default=None, positive=False, nonneg=False):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"{cfg.where(key)}: missing required key {key!r}")
        return float(default)
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{cfg.where(key)}: {key} must be a number, got {raw!r}") from None
    if not np.isfinite(v) or (positive and v <= 0) or (nonneg and v < 0):
        cond = "> 0" if positive else ">= 0" if nonneg else "finite"
        raise ConfigError(f"{cfg.where(key)}: {key} must be {cond}, got {raw!r}")
    return v


def _bool(cfg, key, default=False):
    raw = cfg.get(key)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{cfg.where(key)}: {key} must be true/false, got {raw!r}")


def _numbers(cfg, key, n):
    raw = cfg.get(key)
    if raw is None:
        raise ConfigError(f"{cfg.where(key)}: custom initial state needs {key!r}")
    try:
        vals = [float(x) for x in re.split(r"[,\s]+", raw.strip()) if x]
    except ValueError:
        raise ConfigError(f"{cfg.where(key)}: {key} must hold numbers") from None
    if len(vals) != n:
        raise ConfigError(f"{cfg.where(key)}: {key} needs {n} numbers, got {len(vals)}")
    return np.array(vals)


@dataclass
class RunConfig:
    system: SystemParams
    bath: object
    bath_kind: str
    initial_state: str
    rho0: np.ndarray
    t_end: float          # in scaled units
    samples: int
    time_unit: str
    time_scale: float     # physical time = scaled time / time_scale
    outputs: tuple
    validate: bool = False
    tolerance: float = 1e-6
    oracle_dt: float = None
    g_scale: float = 1.0
    profile_dt: float = None

    @property
    def scaled_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.scaled_times / self.time_scale


def _initial_state(cfg, name):
    if name not in STATES:
        raise ConfigError(f"{cfg.where('initial_state')}: unknown initial state {name!r}; "
                          f"choose from {', '.join(STATES)}")
    if name == "bell_psi_minus":
        return bell_psi_minus()
    if name == "custom":
        re_ = _numbers(cfg, "initial_state.re", 16)
        im_ = _numbers(cfg, "initial_state.im", 16)
        rho = (re_ + 1j * im_).reshape(4, 4)
        try:
            return require_physical(rho, 1e-8, "custom initial state")
        except UnphysicalStateError as exc:
            raise ConfigError(f"{cfg.where('initial_state.re')}: {exc}") from None
    return density_from_pure(basis_ket(name[3:]))


def build_run(cfg: RawConfig) -> RunConfig:
    """Validate a raw configuration and turn it into a ``RunConfig``."""
    try:
        system = SystemParams(_float(cfg, "system.epsilon", 1.0, positive=True),
                              _float(cfg, "system.K", cfg.get("system.coupling_K", 0.0),
                                     nonneg=True))
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: {exc}") from None
    K = system.K

    kind = cfg.get("bath.kind")
    if kind is None:
        raise ConfigError(f"{cfg.source}: missing required key 'bath.kind'")
    kind = kind.lower()
    if kind not in BATH_KINDS:
        raise ConfigError(f"{cfg.where('bath.kind')}: unknown bath kind {kind!r}; "
                          f"choose from {', '.join(BATH_KINDS)}")

    def gamma0():
        if cfg.get("bath.gamma0_over_K") is not None:
            if K <= 0:
                raise ConfigError(f"{cfg.where('bath.gamma0_over_K')}: needs system.K > 0")
            return _float(cfg, "bath.gamma0_over_K", positive=True) * K
        return _float(cfg, "bath.gamma0", positive=True)

    profile_dt = None
    if kind == "lorentzian":
        g0 = gamma0()
        if cfg.get("bath.gamma_ratio") is not None:
            g = _float(cfg, "bath.gamma_ratio", positive=True) * g0
        else:
            g = _float(cfg, "bath.gamma", positive=True)
        bath, natural = Lorentzian(gamma=g, gamma0=g0), ("gamma0", g0)
    elif kind == "markovian":
        g0 = gamma0()
        bath, natural = MarkovianFlat(gamma0=g0), ("gamma0", g0)
    elif kind == "ohmic":
        w0 = _float(cfg, "bath.omega0", system.epsilon / 2, positive=True)
        if cfg.get("bath.cutoff_ratio") is not None:
            wc = _float(cfg, "bath.cutoff_ratio", positive=True) * w0
        else:
            wc = _float(cfg, "bath.omega_c", positive=True)
        bath, natural = OhmicLorentzDrude(omega_c=wc, omega0=w0), ("omega0", w0)
    else:
        path = cfg.get("bath.file")
        if path is None:
            raise ConfigError(f"{cfg.source}: tabulated bath needs 'bath.file'")
        path = os.path.join(cfg.base_dir, path)
        det = _float(cfg, "bath.epsilon", system.epsilon, positive=True)
        try:
            bath = load_spectrum(path, system.epsilon, det)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{cfg.where('bath.file')}: {exc}") from None
        natural = ("absolute", 1.0)
        if cfg.get("bath.dt") is not None:
            profile_dt = _float(cfg, "bath.dt", positive=True)

    unit = cfg.get("time.unit", natural[0])
    if unit not in TIME_UNITS:
        raise ConfigError(f"{cfg.where('time.unit')}: unknown time unit {unit!r}")
    if unit == natural[0]:
        scale = natural[1]
    elif unit == "K":
        if K <= 0:
            raise ConfigError(f"{cfg.where('time.unit')}: time unit K needs system.K > 0")
        scale = K
    elif unit == "absolute":
        scale = 1.0
    elif unit == "gamma0" and cfg.get("bath.gamma0") is not None:
        scale = _float(cfg, "bath.gamma0", positive=True)
    else:
        raise ConfigError(f"{cfg.where('time.unit')}: unit {unit!r} does not apply to a {kind} bath")

    t_end = _float(cfg, "horizon.t_end", positive=True)
    try:
        samples = int(cfg.get("horizon.samples", "101"))
    except ValueError:
        raise ConfigError(f"{cfg.where('horizon.samples')}: samples must be an integer") from None
    if samples < 2:
        raise ConfigError(f"{cfg.where('horizon.samples')}: need at least 2 samples")

    outputs = tuple(s.strip() for s in cfg.get("outputs", "concurrence").split(",") if s.strip())
    for o in outputs:
        if o not in OBSERVABLES:
            raise ConfigError(f"{cfg.where('outputs')}: unknown observable {o!r}; "
                              f"choose from {', '.join(OBSERVABLES)}")
    if not outputs:
        raise ConfigError(f"{cfg.where('outputs')}: no observables selected")

    state = cfg.get("initial_state", "bell_psi_minus")
    rho0 = _initial_state(cfg, state)
    oracle_dt = _float(cfg, "validate.dt", positive=True) if cfg.get("validate.dt") else None
    return RunConfig(
        system=system, bath=bath, bath_kind=kind, initial_state=state, rho0=rho0,
        t_end=t_end, samples=samples, time_unit=unit, time_scale=scale,
        outputs=outputs, validate=_bool(cfg, "validate"),
        tolerance=_float(cfg, "validate.tolerance", 1e-6, positive=True),
        oracle_dt=oracle_dt, g_scale=_float(cfg, "debug.g_scale", 1.0, positive=True),
        profile_dt=profile_dt,
    )


_SPACE = re.compile(r"^(linspace|logspace)\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def sweep_values(cfg: RawConfig):
    raw = cfg.get("sweep.values")
    if raw is None:
        raise ConfigError(f"{cfg.source}: sweep needs 'sweep.values'")
    m = _SPACE.match(raw.strip())
    if m:
        try:
            a, b, n = float(m.group(2)), float(m.group(3)), int(m.group(4))
        except ValueError:
            raise ConfigError(f"{cfg.where('sweep.values')}: bad {m.group(1)} arguments") from None
        if n < 1:
            raise ConfigError(f"{cfg.where('sweep.values')}: need at least one value")
        fn = np.linspace if m.group(1) == "linspace" else np.logspace
        return [format(float(v), ".12g") for v in fn(a, b, n)]
    vals = [v.strip() for v in raw.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"{cfg.where('sweep.values')}: empty value list")
    return vals


def sweep_axis(cfg: RawConfig) -> str:
    axis = cfg.get("sweep.axis")
    if axis is None:
        raise ConfigError(f"{cfg.source}: sweep needs 'sweep.axis'")
    if axis not in KNOWN_KEYS or axis.startswith("sweep.") or axis in ("outputs",):
        raise ConfigError(f"{cfg.where('sweep.axis')}: cannot sweep over {axis!r}")
    return axis
