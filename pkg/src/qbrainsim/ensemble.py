"""Statistical tier: probability vectors over state indices.

Evolution is push-forward through the classical bijection; sampling is
inverse-CDF over index order driven by a caller-owned
``numpy.random.Generator``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config_state import require_dense

NORM_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ensemble:
    probabilities: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probabilities)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty 1-D array")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probabilities", p)

    @property
    def space_size(self) -> int:
        return self.probabilities.size

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return np.array_equal(self.probabilities, other.probabilities)

    def to_json(self) -> str:
        return json.dumps(self.probabilities.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Ensemble":
        return cls(np.array(json.loads(text), dtype=np.float64))


def point_ensemble(m: int, size: int) -> Ensemble:
    if not 0 <= m < size:
        raise ValueError(f"index {m} out of range [0, {size})")
    require_dense(size)
    p = np.zeros(size)
    p[m] = 1.0
    return Ensemble(p)


def uniform_ensemble(size: int) -> Ensemble:
    if size < 1:
        raise ValueError("size must be >= 1")
    require_dense(size)
    return Ensemble(np.full(size, 1.0 / size))


def check_bijection(mapping, size: int) -> np.ndarray:
    mapping = np.asarray(mapping, dtype=np.int64)
    if mapping.shape != (size,):
        raise ValueError(f"map must have length {size}")
    if size and (mapping.min() < 0 or mapping.max() >= size):
        raise ValueError("map image out of range")
    if not np.all(np.bincount(mapping, minlength=size) == 1):
        raise ValueError("map is not a bijection (duplicate image)")
    return mapping


def push_forward(e: Ensemble, mapping) -> Ensemble:
    """``P'[mapping[m]] = P[m]``. Mass is moved, never summed, so it is preserved."""
    mapping = check_bijection(mapping, e.space_size)
    out = np.empty_like(e.probabilities)
    out[mapping] = e.probabilities
    return Ensemble(out)


def sample_indices(weights, rng: np.random.Generator, n: int | None = None):
    """Inverse-CDF draw(s) over index order.

    ``weights`` need only be nonnegative with a positive sum. Drawing ``n``
    at once consumes the generator exactly like ``n`` single draws.
    """
    w = np.asarray(weights, dtype=np.float64)
    cdf = np.cumsum(w)
    total = cdf[-1]
    if not total > 0:
        raise ValueError("cannot sample from zero total weight")
    u = rng.random(n) * total
    idx = np.searchsorted(cdf, u, side="right")
    # float round-off at the top end: fall back to the last index with mass
    last = int(np.flatnonzero(w > 0)[-1])
    idx = np.minimum(idx, last)
    return int(idx) if n is None else idx


def sample(e: Ensemble, rng: np.random.Generator) -> int:
    return sample_indices(e.probabilities, rng)


def quantize(e: Ensemble, k_levels: int) -> Ensemble:
    """Round every probability to a multiple of ``1/(k_levels-1)``.

    Nearest rounding is followed by on-grid renormalization: surplus or
    missing quanta are taken from or given to the entries with the largest
    rounding residuals (ties by index), so the result stays on the grid and
    the operation is idempotent.
    """
    if k_levels < 2:
        raise ValueError("k_levels must be >= 2")
    q = k_levels - 1
    x = e.probabilities * q
    k = np.rint(x).astype(np.int64)
    if not k.any():
        raise ValueError(f"all probabilities round to zero with K={k_levels}")
    residual = x - k
    deficit = q - int(k.sum())
    if deficit > 0:
        order = np.argsort(-residual, kind="stable")
        k[order[:deficit]] += 1
    elif deficit < 0:
        candidates = np.flatnonzero(k > 0)
        order = candidates[np.argsort(residual[candidates], kind="stable")]
        k[order[:-deficit]] -= 1
    return Ensemble(k / q)
