"""Objective distortion measures between an original and a processed signal.

Three measures are provided:

* PRD   -- percent root-mean-square difference over the raw samples.
* WWPRD -- PRD computed per wavelet subband and combined with a
           caller-supplied weight profile.
* WEDD  -- the same subband PRDs weighted by the original signal's
           relative subband energies, so low-energy subbands (typically
           high-frequency noise) contribute little.

The wavelet engine is a critically sampled orthogonal filter bank with
periodic extension.  Daubechies filters are built by spectral
factorization, giving perfect reconstruction and energy conservation to
machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb

__all__ = [
    "WaveletConfig",
    "DistortionResult",
    "prd",
    "wavelet_filters",
    "dwt",
    "idwt",
    "subband_names",
    "wwprd",
    "wedd",
    "uniform_weights",
]


@dataclass(frozen=True)
class WaveletConfig:
    """Decomposition depth and filter choice for the subband measures.

    ``filter`` names a Daubechies family member ("dbN", N vanishing
    moments, 2N taps).  Extension is periodic, so the signal length must
    be divisible by 2**levels.
    """

    levels: int = 5
    filter: str = "db4"

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        wavelet_filters(self.filter)  # validate the name eagerly

    @property
    def n_subbands(self) -> int:
        return self.levels + 1


@dataclass
class DistortionResult:
    """PRD, WWPRD, and WEDD for one signal pair, with the subband detail."""

    prd: float
    wwprd: float | None
    wedd: float
    subband_prds: list[float]
    wwprd_weights: list[float] | None
    wedd_weights: list[float]

    def to_dict(self) -> dict:
        return {
            "prd_percent": self.prd,
            "wwprd_percent": self.wwprd,
            "wedd_percent": self.wedd,
            "subband_prds_percent": self.subband_prds,
            "wwprd_weights": self.wwprd_weights,
            "wedd_weights": self.wedd_weights,
        }


def prd(x: np.ndarray, y: np.ndarray, mean_removed: bool = True) -> float:
    """Percent root-mean-square difference, 100 * ||x - y|| / ||x||.

    With ``mean_removed`` (the default) the denominator is the energy of
    x about its mean, removing any DC-offset dependence.  Raises on a
    zero denominator (x constant, or identically zero in raw mode).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("signals must have at least 2 samples")
    ref = x - x.mean() if mean_removed else x
    denom = float(ref @ ref)
    if denom == 0.0:
        raise ValueError("PRD undefined: reference signal has zero energy")
    diff = x - y
    return 100.0 * float(np.sqrt((diff @ diff) / denom))


@lru_cache(maxsize=None)
def wavelet_filters(name: str) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal analysis filter pair (lowpass, highpass) for "dbN".

    The scaling filter is obtained by spectral factorization of the
    Daubechies polynomial, keeping the roots inside the unit circle
    (minimum phase).  Taps sum to sqrt(2); the highpass is the quadrature
    mirror of the lowpass.
    """
    if not name.startswith("db"):
        raise ValueError(f"unknown wavelet filter {name!r} (expected 'dbN')")
    try:
        p = int(name[2:])
    except ValueError:
        raise ValueError(f"unknown wavelet filter {name!r} (expected 'dbN')")
    if not 1 <= p <= 20:
        raise ValueError(f"wavelet order {p} out of supported range 1..20")

    if p == 1:
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
    else:
        k = np.arange(p)
        # roots of P(y) = sum_k C(p-1+k, k) y^k
        yroots = np.roots(comb(p - 1 + k, k)[::-1])
        zroots = []
        for y in yroots:
            # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
            r = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            zroots.append(r[np.argmin(np.abs(r))])
        poly = np.poly(np.concatenate([np.full(p, -1.0 + 0j),
                                       np.asarray(zroots)]))
        h = np.real(poly)
        h *= np.sqrt(2.0) / h.sum()

    g = h[::-1].copy()
    g[1::2] *= -1.0
    h.setflags(write=False)
    g.setflags(write=False)
    return h, g


def _check_length(n: int, cfg: WaveletConfig):
    if n < 2 ** cfg.levels:
        raise ValueError(
            f"signal of length {n} too short for {cfg.levels} levels "
            f"(needs >= {2 ** cfg.levels})"
        )
    if n % (2 ** cfg.levels) != 0:
        raise ValueError(
            f"signal length {n} not divisible by 2**{cfg.levels}; "
            "periodic extension needs an even length at every level"
        )


def dwt(x: np.ndarray, cfg: WaveletConfig = WaveletConfig()) -> list[np.ndarray]:
    """Periodized orthogonal wavelet decomposition.

    Returns ``[detail_1, ..., detail_L, approximation_L]`` from finest to
    coarsest.  The transform is orthogonal, so subband energies sum to
    the signal energy and ``idwt`` inverts it exactly.
    """
    x = np.asarray(x, dtype=float)
    _check_length(x.size, cfg)
    h, g = wavelet_filters(cfg.filter)
    taps = np.arange(h.size)
    a = x
    subbands = []
    for _ in range(cfg.levels):
        n = a.size
        idx = (2 * np.arange(n // 2)[:, None] + taps[None, :]) % n
        windows = a[idx]
        subbands.append(windows @ g)
        a = windows @ h
    subbands.append(a)
    return subbands


def idwt(subbands: list[np.ndarray],
         cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Invert :func:`dwt` (transpose of the orthogonal analysis)."""
    if len(subbands) != cfg.levels + 1:
        raise ValueError(
            f"expected {cfg.levels + 1} subbands, got {len(subbands)}"
        )
    h, g = wavelet_filters(cfg.filter)
    taps = np.arange(h.size)
    a = np.asarray(subbands[-1], dtype=float)
    for d in reversed(subbands[:-1]):
        d = np.asarray(d, dtype=float)
        n = 2 * a.size
        y = np.zeros(n)
        idx = (2 * np.arange(a.size)[:, None] + taps[None, :]) % n
        np.add.at(y, idx, a[:, None] * h[None, :])
        np.add.at(y, idx, d[:, None] * g[None, :])
        a = y
    return a


def subband_names(cfg: WaveletConfig) -> list[str]:
    return [f"D{j}" for j in range(1, cfg.levels + 1)] + [f"A{cfg.levels}"]


def uniform_weights(cfg: WaveletConfig) -> np.ndarray:
    """Documented default weight profile: equal weight per subband."""
    return np.full(cfg.n_subbands, 1.0 / cfg.n_subbands)


def _subband_prds(x: np.ndarray, y: np.ndarray,
                  cfg: WaveletConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-subband raw PRDs and the reference subband energies."""
    bx = dwt(x, cfg)
    by = dwt(y, cfg)
    names = subband_names(cfg)
    prds = np.empty(len(bx))
    energies = np.empty(len(bx))
    for j, (cx, cy) in enumerate(zip(bx, by)):
        e = float(cx @ cx)
        if e == 0.0:
            raise ValueError(
                f"subband {names[j]} of the reference signal has zero "
                "energy; its PRD is undefined"
            )
        d = cx - cy
        prds[j] = 100.0 * np.sqrt(float(d @ d) / e)
        energies[j] = e
    return prds, energies


def wwprd(x: np.ndarray, y: np.ndarray, weights: np.ndarray,
          cfg: WaveletConfig = WaveletConfig()) -> float:
    """Weighted sum of per-subband PRDs with a caller-supplied profile.

    ``weights`` must be nonnegative, one per subband (details finest to
    coarsest, then the approximation), summing to 1.  No clinical weight
    table ships with this module; see :func:`uniform_weights` for the
    documented neutral profile.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (cfg.n_subbands,):
        raise ValueError(
            f"expected {cfg.n_subbands} weights, got shape {weights.shape}"
        )
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights.sum()}")
    prds, _ = _subband_prds(np.asarray(x, float), np.asarray(y, float), cfg)
    return float(weights @ prds)


def wedd(x: np.ndarray, y: np.ndarray,
         cfg: WaveletConfig = WaveletConfig()) -> tuple[float, np.ndarray]:
    """Energy-weighted subband distortion and the weights used.

    The weight of subband j is its share of the reference signal's total
    energy, so the weights always sum to 1.
    """
    x = np.asarray(x, dtype=float)
    if float(x @ x) == 0.0:
        raise ValueError("WEDD undefined for a zero-energy reference signal")
    prds, energies = _subband_prds(x, np.asarray(y, float), cfg)
    weights = energies / energies.sum()
    return float(weights @ prds), weights


def evaluate(x: np.ndarray, y: np.ndarray,
             cfg: WaveletConfig = WaveletConfig(),
             wwprd_weights: np.ndarray | None = None,
             prd_mean_removed: bool = True) -> DistortionResult:
    """All three measures for one signal pair, in a single result."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prds, energies = _subband_prds(x, y, cfg)
    wedd_weights = energies / energies.sum()
    ww = None
    if wwprd_weights is not None:
        ww = wwprd(x, y, wwprd_weights, cfg)
        wwprd_weights = list(np.asarray(wwprd_weights, float))
    return DistortionResult(
        prd=prd(x, y, mean_removed=prd_mean_removed),
        wwprd=ww,
        wedd=float(wedd_weights @ prds),
        subband_prds=list(prds),
        wwprd_weights=wwprd_weights,
        wedd_weights=list(wedd_weights),
    )
