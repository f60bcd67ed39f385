"""Chance-corrected agreement statistics for categorical ratings.

Implements the proportion of observed agreement, chance agreement from
marginal totals, Cohen's kappa with its maximum attainable value under
fixed marginals, a large-sample standard error with normal 95% confidence
intervals, and the Landis-Koch strength-of-agreement labels.  Works for
K x K tables, K >= 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ContingencyTable",
    "KappaResult",
    "contingency",
    "observed_agreement",
    "chance_agreement",
    "max_observed_agreement",
    "kappa",
    "interpret",
]

# Strength-of-agreement bands.  Each interval is closed on its upper
# endpoint: a value of exactly 0.20 is Slight, 0.205 is Fair.
_STRENGTH_BANDS = (
    (0.20, "Slight"),
    (0.40, "Fair"),
    (0.60, "Moderate"),
    (0.80, "Substantial"),
    (1.00, "AlmostPerfect"),
)

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ContingencyTable:
    """K x K cross-classification of paired categorical ratings.

    Rows index the first measurement (original signal, first rater, or
    first presentation depending on the analysis); columns index the
    second.  ``counts[i, j]`` is the number of items the first measurement
    placed in category i and the second in category j.
    """

    categories: tuple[str, ...]
    counts: np.ndarray  # shape (K, K), nonnegative integers

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.categories)
        if counts.shape != (k, k):
            raise ValueError(
                f"counts shape {counts.shape} does not match {k} categories"
            )
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        if counts.sum() == 0:
            raise ValueError("table must contain at least one observation")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        """Total number of paired observations."""
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.categories, self.counts.T.copy())

    def permute(self, order: Sequence[int]) -> "ContingencyTable":
        """Reorder categories; agreement statistics are invariant to this."""
        idx = np.asarray(order)
        cats = tuple(self.categories[i] for i in idx)
        return ContingencyTable(cats, self.counts[np.ix_(idx, idx)].copy())

    def to_dict(self) -> dict:
        return {"categories": list(self.categories),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ContingencyTable":
        return cls(tuple(d["categories"]), np.asarray(d["counts"]))


@dataclass
class KappaResult:
    """Agreement statistics for one contingency table.

    ``kappa`` and ``kappa_max`` are None when the chance denominator
    1 - p_c is zero (``na`` is then True); ``p_o`` is still reported.
    """

    p_o: float
    p_c: float
    kappa: Optional[float]
    kappa_max: Optional[float]
    se: Optional[float]
    ci95: tuple[Optional[float], Optional[float]]
    interpretation: Optional[str]
    na: bool = False
    n: int = 0
    table: Optional[ContingencyTable] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "p_o": self.p_o,
            "p_c": self.p_c,
            "kappa": self.kappa,
            "kappa_max": self.kappa_max,
            "se": self.se,
            "ci95": list(self.ci95),
            "interpretation": self.interpretation,
            "na": self.na,
            "n": self.n,
        }
        if self.table is not None:
            d["table"] = self.table.to_dict()
        return d


def contingency(pairs: Sequence[tuple[str, str]],
                categories: Sequence[str]) -> ContingencyTable:
    """Tally (label_A, label_B) pairs into a contingency table.

    Raises ValueError on an empty pair list or a label missing from
    ``categories``.
    """
    cats = tuple(categories)
    if not pairs:
        raise ValueError("at least one pair is required (n must be > 0)")
    index = {c: i for i, c in enumerate(cats)}
    counts = np.zeros((len(cats), len(cats)), dtype=np.int64)
    for pos, (a, b) in enumerate(pairs):
        if a not in index:
            raise ValueError(f"unknown label {a!r} at pair {pos}")
        if b not in index:
            raise ValueError(f"unknown label {b!r} at pair {pos}")
        counts[index[a], index[b]] += 1
    return ContingencyTable(cats, counts)


def observed_agreement(table: ContingencyTable) -> float:
    """Proportion of items on which both measurements agree."""
    return float(np.trace(table.counts)) / table.n


def chance_agreement(table: ContingencyTable) -> float:
    """Agreement expected by chance from the marginal totals.

    sum_i f_i * g_i / n^2, where f and g are the column and row totals.
    """
    n = table.n
    return float(table.row_totals @ table.col_totals) / (n * n)


def max_observed_agreement(table: ContingencyTable) -> float:
    """Largest observed agreement attainable with the marginals fixed."""
    return float(np.minimum(table.row_totals, table.col_totals).sum()) / table.n


def kappa(table: ContingencyTable, *,
          printed_denominator: bool = False) -> KappaResult:
    """Cohen's kappa with kappa_max, standard error, and 95% CI.

    The denominator is the classical 1 - p_c.  ``printed_denominator``
    switches to 1 - p_o, provided for comparison with sources that quote
    that variant; both coincide whenever p_o = p_c.

    Degenerate tables (chance denominator zero) are flagged via ``na``
    rather than raised: p_o is still reported, everything else is None.
    """
    p_o = observed_agreement(table)
    p_c = chance_agreement(table)
    n = table.n

    denom = (1.0 - p_o) if printed_denominator else (1.0 - p_c)
    if denom == 0.0:
        return KappaResult(p_o=p_o, p_c=p_c, kappa=None, kappa_max=None,
                           se=None, ci95=(None, None), interpretation=None,
                           na=True, n=n, table=table)

    k = (p_o - p_c) / denom
    p_o_max = max_observed_agreement(table)
    k_max_denom = (1.0 - p_o_max) if printed_denominator else (1.0 - p_c)
    k_max = None if k_max_denom == 0.0 else (p_o_max - p_c) / k_max_denom

    se = float(np.sqrt(p_o * (1.0 - p_o) / (n * denom * denom)))
    lo = max(-1.0, k - _Z95 * se)
    hi = min(1.0, k + _Z95 * se)

    return KappaResult(p_o=p_o, p_c=p_c, kappa=k, kappa_max=k_max, se=se,
                       ci95=(lo, hi), interpretation=interpret(k),
                       na=False, n=n, table=table)


def interpret(value: float) -> str:
    """Landis-Koch strength-of-agreement label for a kappa value."""
    if not -1.0 - 1e-12 <= value <= 1.0 + 1e-12:
        raise ValueError(f"kappa value {value} outside [-1, 1]")
    if value < 0.0:
        return "Poor"
    for upper, label in _STRENGTH_BANDS:
        if value <= upper:
            return label
    return "AlmostPerfect"
