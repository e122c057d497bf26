"""Lattice system, reversible classical dynamics, and state-index encoding.

A configuration assigns an integer in ``{-L..+L}`` to every (site, field)
slot of a 1-D periodic ring of ``n_sites`` sites carrying ``n_fields``
fields. Slots are flattened site-major: ``slot = site * n_fields + field``.

The classical update is the second-order additive rule over ``Z_base``::

    next[i, j] = sum_{0 < |d| <= r} current[i + d, j] - previous[i, j]   (mod base)

Ring offsets are counted with multiplicity, so on rings shorter than
``2r + 1`` a site may contribute more than once. Because ``next`` depends on
``previous`` only through subtraction, the rule is invertible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, IndexOverflowError, StateSpaceTooLarge

INDEX_MAX = 2**63 - 1
DENSE_STATE_CAP = 10**6

LATTICE_KEYS = (
    "n_sites",
    "n_fields",
    "half_range",
    "n_timesteps",
    "neighbor_radius",
    "phase_rate",
)


@dataclass(frozen=True)
class LatticeConfig:
    n_sites: int
    n_fields: int
    half_range: int
    n_timesteps: int = 1
    neighbor_radius: int = 1
    phase_rate: float = 0.0

    def __post_init__(self):
        for name in ("n_sites", "n_fields", "n_timesteps", "neighbor_radius"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        hr = self.half_range
        if isinstance(hr, bool) or not isinstance(hr, (int, np.integer)) or hr < 0:
            raise ConfigError(f"half_range must be a nonnegative integer, got {hr!r}")
        if not isinstance(self.phase_rate, (int, float, np.floating)) or not math.isfinite(
            self.phase_rate
        ):
            raise ConfigError(f"phase_rate must be a finite real, got {self.phase_rate!r}")
        object.__setattr__(self, "phase_rate", float(self.phase_rate))
        if self.base ** self.n_slots > INDEX_MAX:
            raise IndexOverflowError(
                f"configuration count {self.base}^{self.n_slots} does not fit a 64-bit index"
            )

    @property
    def base(self) -> int:
        return 2 * self.half_range + 1

    @property
    def n_slots(self) -> int:
        return self.n_sites * self.n_fields

    def to_text(self) -> str:
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in LATTICE_KEYS)

    @classmethod
    def from_mapping(cls, values: dict, linenos: dict | None = None) -> "LatticeConfig":
        linenos = linenos or {}
        kwargs = {}
        for key in LATTICE_KEYS:
            if key not in values:
                continue
            v = values[key]
            if key == "phase_rate":
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{key} must be a number", linenos.get(key))
                kwargs[key] = float(v)
            else:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"{key} must be an integer", linenos.get(key))
                kwargs[key] = v
        for key in ("n_sites", "n_fields", "half_range"):
            if key not in kwargs:
                raise ConfigError(f"missing required key {key!r}")
        try:
            return cls(**kwargs)
        except ConfigError as exc:
            bad = next((k for k in kwargs if k in str(exc)), None)
            if bad is not None and exc.lineno is None and bad in linenos:
                raise type(exc)(str(exc), linenos[bad]) from None
            raise

    @classmethod
    def from_text(cls, text: str) -> "LatticeConfig":
        values, linenos = parse_config_text(text, allowed=LATTICE_KEYS)
        return cls.from_mapping(values, linenos)


def parse_config_text(text: str, allowed=None):
    """Parse ``key = value`` lines into ``(values, linenos)``.

    Values are decoded as JSON when possible and otherwise kept as bare
    strings. Blank lines and ``#`` comments are ignored. Duplicate or
    (when ``allowed`` is given) unknown keys raise ``ConfigError`` carrying
    the offending line number.
    """
    values, linenos = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        if allowed is not None and key not in allowed:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not val:
            raise ConfigError(f"missing value for {key!r}", lineno)
        try:
            values[key] = json.loads(val)
        except json.JSONDecodeError:
            values[key] = val
        linenos[key] = lineno
    return values, linenos


def configuration_count(cfg: LatticeConfig) -> int:
    """Number of single-time configurations, ``(2L+1)^(M*N)``."""
    return cfg.base**cfg.n_slots


def dynamical_count(cfg: LatticeConfig) -> int:
    """Number of (current, previous) pairs: ``configuration_count**2``."""
    return configuration_count(cfg) ** 2


def require_dense(size: int, cfg: LatticeConfig | None = None, cap: int = DENSE_STATE_CAP):
    if size > cap:
        count = configuration_count(cfg) if cfg is not None else None
        raise StateSpaceTooLarge(size, cap, count)


@dataclass(frozen=True)
class RegisterReport:
    classical_registers: int
    classical_register_capacity: int
    statistical_registers: int
    quantum_registers: int

    def to_dict(self) -> dict:
        return {
            "classical_registers": self.classical_registers,
            "classical_register_capacity": self.classical_register_capacity,
            "statistical_registers": self.statistical_registers,
            "quantum_registers": self.quantum_registers,
        }


def register_accounting(cfg: LatticeConfig) -> RegisterReport:
    statistical = configuration_count(cfg)
    return RegisterReport(
        classical_registers=cfg.n_slots,
        classical_register_capacity=cfg.base,
        statistical_registers=statistical,
        quantum_registers=2 * statistical,
    )


@dataclass(frozen=True)
class FieldConfiguration:
    cfg: LatticeConfig
    values: tuple = field(default=())

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if len(vals) != self.cfg.n_slots:
            raise ValueError(f"expected {self.cfg.n_slots} values, got {len(vals)}")
        L = self.cfg.half_range
        if any(v < -L or v > L for v in vals):
            raise ValueError(f"field values must lie in [-{L}, {L}]")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, cfg: LatticeConfig) -> "FieldConfiguration":
        return cls(cfg, (0,) * cfg.n_slots)

    def value(self, site: int, fld: int) -> int:
        return self.values[site * self.cfg.n_fields + fld]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int64).reshape(self.cfg.n_sites, self.cfg.n_fields)

    def to_json(self) -> str:
        return json.dumps(list(self.values))

    @classmethod
    def from_json(cls, cfg: LatticeConfig, text: str) -> "FieldConfiguration":
        return cls(cfg, json.loads(text))


@dataclass(frozen=True)
class DynamicalState:
    current: FieldConfiguration
    previous: FieldConfiguration

    def __post_init__(self):
        if self.current.cfg != self.previous.cfg:
            raise ValueError("current and previous must share one LatticeConfig")

    @property
    def cfg(self) -> LatticeConfig:
        return self.current.cfg

    @classmethod
    def zeros(cls, cfg: LatticeConfig) -> "DynamicalState":
        z = FieldConfiguration.zeros(cfg)
        return cls(z, z)

    @classmethod
    def from_values(cls, cfg: LatticeConfig, current, previous=None) -> "DynamicalState":
        if previous is None:
            previous = (0,) * cfg.n_slots
        return cls(FieldConfiguration(cfg, current), FieldConfiguration(cfg, previous))


def _encode_values(values, cfg: LatticeConfig) -> int:
    m = 0
    for v in reversed(values):
        m = m * cfg.base + (v + cfg.half_range)
    return m


def encode(state) -> int:
    """Little-endian mixed-radix index with digit ``value + L``.

    A ``DynamicalState`` encodes as ``encode(current) + count * encode(previous)``.
    """
    if isinstance(state, DynamicalState):
        cfg = state.cfg
        return _encode_values(state.current.values, cfg) + configuration_count(cfg) * (
            _encode_values(state.previous.values, cfg)
        )
    if isinstance(state, FieldConfiguration):
        return _encode_values(state.values, state.cfg)
    raise TypeError(f"cannot encode {type(state).__name__}")


def _decode_values(m: int, cfg: LatticeConfig) -> tuple:
    out = []
    for _ in range(cfg.n_slots):
        m, digit = divmod(m, cfg.base)
        out.append(digit - cfg.half_range)
    return tuple(out)


def decode(m: int, cfg: LatticeConfig, dynamical: bool = False):
    count = configuration_count(cfg)
    limit = count * count if dynamical else count
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or not 0 <= m < limit:
        raise ValueError(f"state index {m!r} out of range [0, {limit})")
    m = int(m)
    if not dynamical:
        return FieldConfiguration(cfg, _decode_values(m, cfg))
    prev_idx, cur_idx = divmod(m, count)
    return DynamicalState(
        FieldConfiguration(cfg, _decode_values(cur_idx, cfg)),
        FieldConfiguration(cfg, _decode_values(prev_idx, cfg)),
    )


def _wrap(x, cfg: LatticeConfig):
    return (x + cfg.half_range) % cfg.base - cfg.half_range


def _neighbor_sum(cur: np.ndarray, radius: int) -> np.ndarray:
    # cur has the site axis at -2; roll(cur, -d)[i] == cur[i + d]
    total = np.zeros_like(cur)
    for d in range(1, radius + 1):
        total += np.roll(cur, -d, axis=-2) + np.roll(cur, d, axis=-2)
    return total


def step_classical(state: DynamicalState) -> DynamicalState:
    cfg = state.cfg
    cur = state.current.as_array()
    nxt = _wrap(_neighbor_sum(cur, cfg.neighbor_radius) - state.previous.as_array(), cfg)
    return DynamicalState(FieldConfiguration(cfg, nxt.ravel().tolist()), state.current)


def step_backward(state: DynamicalState) -> DynamicalState:
    """Inverse of ``step_classical``: recovers the predecessor pair."""
    cfg = state.cfg
    prev_cur = state.previous.as_array()
    prev_prev = _wrap(_neighbor_sum(prev_cur, cfg.neighbor_radius) - state.current.as_array(), cfg)
    return DynamicalState(state.previous, FieldConfiguration(cfg, prev_prev.ravel().tolist()))


def evolve_classical(initial: DynamicalState, steps: int) -> list:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    traj = [initial]
    for _ in range(steps):
        traj.append(step_classical(traj[-1]))
    return traj


# Vectorized tables over the whole dynamical index space. Used by the dense
# ensemble/amplitude tiers; cached per config since LatticeConfig is hashable.


def _all_digits(cfg: LatticeConfig, size: int, n_digits: int) -> np.ndarray:
    idx = np.arange(size, dtype=np.int64)
    digits = np.empty((size, n_digits), dtype=np.int64)
    for k in range(n_digits):
        idx, digits[:, k] = np.divmod(idx, cfg.base)
    return digits - cfg.half_range


def _encode_digits(values: np.ndarray, cfg: LatticeConfig) -> np.ndarray:
    weights = cfg.base ** np.arange(values.shape[-1], dtype=np.int64)
    return (values + cfg.half_range) @ weights


@lru_cache(maxsize=32)
def _dynamical_tables(cfg: LatticeConfig):
    size = dynamical_count(cfg)
    require_dense(size, cfg)
    S = cfg.n_slots
    vals = _all_digits(cfg, size, 2 * S)
    cur = vals[:, :S].reshape(size, cfg.n_sites, cfg.n_fields)
    prev = vals[:, S:].reshape(size, cfg.n_sites, cfg.n_fields)
    nsum = _neighbor_sum(cur, cfg.neighbor_radius)

    nxt = _wrap(nsum - prev, cfg).reshape(size, S)
    fwd = _encode_digits(np.concatenate([nxt, cur.reshape(size, S)], axis=1), cfg)
    fwd.setflags(write=False)

    diff = cur - np.roll(cur, -1, axis=1)
    energy = (diff.astype(np.float64) ** 2).sum(axis=(1, 2))
    energy.setflags(write=False)
    return fwd, energy


def successor_table(cfg: LatticeConfig) -> np.ndarray:
    """``table[m] = encode(step_classical(decode(m, cfg, dynamical=True)))``."""
    return _dynamical_tables(cfg)[0]


def predecessor_table(cfg: LatticeConfig) -> np.ndarray:
    fwd = successor_table(cfg)
    inv = np.empty_like(fwd)
    inv[fwd] = np.arange(fwd.size, dtype=fwd.dtype)
    return inv


def energy_table(cfg: LatticeConfig) -> np.ndarray:
    """Sum over ring-adjacent site pairs ``(i, i+1)`` of squared field differences
    in the current configuration, for every dynamical index."""
    return _dynamical_tables(cfg)[1]


def site_value_table(cfg: LatticeConfig, site: int, fld: int, dynamical: bool) -> np.ndarray:
    """Value of ``psi_fld(x_site)`` in the (current) configuration of every index."""
    if not (0 <= site < cfg.n_sites and 0 <= fld < cfg.n_fields):
        raise ValueError(f"site/field ({site}, {fld}) out of range")
    count = configuration_count(cfg)
    size = count * count if dynamical else count
    require_dense(size, cfg)
    idx = np.arange(size, dtype=np.int64) % count
    slot = site * cfg.n_fields + fld
    return (idx // cfg.base**slot) % cfg.base - cfg.half_range
