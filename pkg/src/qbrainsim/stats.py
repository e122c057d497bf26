"""Goodness-of-fit and sign-test helpers used by the trial harnesses."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

SIGNIFICANCE = 1e-3


@dataclass(frozen=True)
class ChiSquareReport:
    statistic: float
    dof: int
    critical_value: float
    passed: bool
    n: int
    counts: tuple = ()

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "critical_value": self.critical_value,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def chi_square_test(counts, probabilities, significance: float = SIGNIFICANCE) -> ChiSquareReport:
    """Pearson chi-square of observed ``counts`` against ``probabilities``.

    Cells with zero expected probability are excluded from the degrees of
    freedom; any observation landing in such a cell makes the statistic
    infinite and the test fail.
    """
    counts = np.asarray(counts, dtype=np.int64)
    p = np.asarray(probabilities, dtype=np.float64)
    if counts.shape != p.shape:
        raise ValueError("counts and probabilities must have the same shape")
    n = int(counts.sum())
    support = p > 0
    if np.any(counts[~support] > 0):
        statistic = math.inf
    else:
        expected = n * p[support]
        statistic = float(np.sum((counts[support] - expected) ** 2 / expected))
    dof = int(support.sum()) - 1
    critical = float(stats.chi2.ppf(1.0 - significance, dof)) if dof > 0 else 0.0
    return ChiSquareReport(
        statistic=statistic,
        dof=dof,
        critical_value=critical,
        passed=bool(statistic <= critical),
        n=n,
        counts=tuple(int(c) for c in counts),
    )


def binomial_band(p: float, n: int, n_sigma: float = 3.0) -> tuple:
    """``n_sigma`` band for a binomial frequency with success probability ``p``."""
    sd = math.sqrt(p * (1.0 - p) / n)
    return p - n_sigma * sd, p + n_sigma * sd


def sign_test(a, b, alternative: str = "greater") -> dict:
    """One-sided paired sign test of ``a`` vs ``b``; ties are dropped."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    wins = int(np.sum(a > b))
    losses = int(np.sum(a < b))
    ties = int(a.size - wins - losses)
    n = wins + losses
    if n == 0:
        p_value = 1.0
    else:
        k = wins if alternative == "greater" else losses
        p_value = float(stats.binomtest(k, n, 0.5, alternative="greater").pvalue)
    return {"wins": wins, "losses": losses, "ties": ties, "p_value": p_value}
