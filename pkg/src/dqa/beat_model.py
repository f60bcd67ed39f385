"""Low-dimensional per-beat ECG representation and segmentation.

A beat is modeled as a linear combination of adaptive basis functions:
orthonormal Hermite functions for the P, QRS, and T waves (each wave
with its own translation tau and dilation lambda), sigmoid transitions
for ST-level shifts, and a clamped B-spline for the baseline.  For
fixed nonlinear parameters the optimal linear coefficients are a linear
least-squares solve; the nonlinear parameters are refined by
derivative-free simplex descent with a small multistart.  Segmentation
falls out of the fit by grouping terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.optimize import minimize
from scipy.special import expit

from .signal_io import Strip

__all__ = [
    "WAVE_NAMES",
    "BasisConfig",
    "WaveFit",
    "SigmoidFit",
    "BeatModelFit",
    "Segmentation",
    "IllConditionedError",
    "hermite_basis",
    "sigmoid_basis",
    "spline_design",
    "default_init",
    "fit_linear",
    "fit_beat",
    "reconstruct",
    "segment",
]

WAVE_NAMES = ("P", "QRS", "T")


class IllConditionedError(ValueError):
    """Design matrix condition number above the configured limit."""

    def __init__(self, message: str, config: "BasisConfig", condition: float):
        super().__init__(message)
        self.config = config
        self.condition = condition


@dataclass(frozen=True)
class BasisConfig:
    """Basis layout and fitter settings.

    ``spline_knots`` lists interior knot positions in seconds relative
    to the beat-window start; None places a single knot at the window
    midpoint.  The fitter runs ``n_starts`` simplex descents (the given
    init plus jittered copies) and keeps the best.
    """

    n_hermite: tuple[int, int, int] = (4, 6, 4)  # P, QRS, T
    n_sigmoid: int = 2
    spline_knots: Optional[tuple[float, ...]] = None
    spline_degree: int = 3
    max_iter: int = 500
    ftol_rel: float = 1e-8
    xtol: float = 1e-8
    n_starts: int = 3
    jitter_tau: float = 0.020
    jitter_lam: float = 0.20
    cond_limit: float = 1e10
    seed: int = 0

    def __post_init__(self):
        if len(self.n_hermite) != 3 or any(n < 0 for n in self.n_hermite):
            raise ValueError("n_hermite must be three counts >= 0")
        if self.n_sigmoid < 0:
            raise ValueError("n_sigmoid must be >= 0")
        if self.spline_degree < 0:
            raise ValueError("spline_degree must be >= 0")
        if sum(self.n_hermite) + self.n_sigmoid == 0 and self.spline_knots == ():
            raise ValueError("at least one basis term is required")
        if self.spline_knots is not None:
            ks = tuple(self.spline_knots)
            if any(b <= a for a, b in zip(ks, ks[1:])):
                raise ValueError("spline knots must be strictly increasing")

    def interior_knots(self, duration: float) -> np.ndarray:
        if self.spline_knots is None:
            return np.array([0.5 * duration])
        ks = np.asarray(self.spline_knots, dtype=float)
        if ks.size and (ks[0] <= 0.0 or ks[-1] >= duration):
            raise ValueError(
                f"interior knots must lie strictly inside (0, {duration})"
            )
        return ks


@dataclass(frozen=True)
class WaveFit:
    """One wave's nonlinear parameters and Hermite coefficients (mV)."""

    tau: float
    lam: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"dilation must be positive, got {self.lam}")


@dataclass(frozen=True)
class SigmoidFit:
    amplitude: float
    tau: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"sigmoid width must be positive, got {self.lam}")


@dataclass(frozen=True)
class BeatModelFit:
    """Full parameter set of one fitted beat.

    ``knots`` is the clamped knot vector in absolute seconds; the model
    is defined on the closed interval it spans.
    """

    waves: dict[str, WaveFit]
    sigmoids: tuple[SigmoidFit, ...]
    spline_coeffs: tuple[float, ...]
    knots: tuple[float, ...]
    spline_degree: int
    residual_rms: float
    converged: bool = True
    n_iter: int = 0

    def __post_init__(self):
        if set(self.waves) != set(WAVE_NAMES):
            raise ValueError(f"waves must be exactly {WAVE_NAMES}")
        taus = [self.waves[w].tau for w in WAVE_NAMES]
        if not (taus[0] < taus[1] < taus[2]):
            raise ValueError(
                f"wave centers must be ordered P < QRS < T, got {taus}"
            )
        if not math.isfinite(self.residual_rms):
            raise ValueError("residual RMS must be finite")

    @property
    def window(self) -> tuple[float, float]:
        return self.knots[0], self.knots[-1]

    def to_dict(self) -> dict:
        return {
            "waves": {
                w: {"tau": wf.tau, "lam": wf.lam, "coeffs": list(wf.coeffs)}
                for w, wf in self.waves.items()
            },
            "sigmoids": [
                {"amplitude": s.amplitude, "tau": s.tau, "lam": s.lam}
                for s in self.sigmoids
            ],
            "spline_coeffs": list(self.spline_coeffs),
            "knots": list(self.knots),
            "spline_degree": self.spline_degree,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BeatModelFit":
        return cls(
            waves={w: WaveFit(v["tau"], v["lam"], tuple(v["coeffs"]))
                   for w, v in d["waves"].items()},
            sigmoids=tuple(SigmoidFit(s["amplitude"], s["tau"], s["lam"])
                           for s in d["sigmoids"]),
            spline_coeffs=tuple(d["spline_coeffs"]),
            knots=tuple(d["knots"]),
            spline_degree=int(d["spline_degree"]),
            residual_rms=float(d["residual_rms"]),
            converged=bool(d.get("converged", True)),
            n_iter=int(d.get("n_iter", 0)),
        )


@dataclass(frozen=True)
class Segmentation:
    """Per-component curves on the evaluation grid; they sum to the
    full reconstruction."""

    p_wave: np.ndarray
    qrs: np.ndarray
    st_t: np.ndarray
    t_wave: np.ndarray
    baseline: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.p_wave + self.qrs + self.st_t + self.t_wave + self.baseline


def hermite_basis(n_max: int, time_grid, tau: float, lam: float) -> np.ndarray:
    """Columns h_n((t - tau) / lam), n = 0..n_max-1.

    h_0(x) = pi^(-1/4) exp(-x^2/2) and
    h_n(x) = x sqrt(2/n) h_{n-1}(x) - sqrt((n-1)/n) h_{n-2}(x),
    the orthonormal Hermite functions.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if lam <= 0:
        raise ValueError(f"dilation must be positive, got {lam}")
    x = (np.asarray(time_grid, dtype=float) - tau) / lam
    H = np.empty((x.size, n_max))
    H[:, 0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max > 1:
        H[:, 1] = x * np.sqrt(2.0) * H[:, 0]
    for n in range(2, n_max):
        H[:, n] = (x * np.sqrt(2.0 / n) * H[:, n - 1]
                   - np.sqrt((n - 1) / n) * H[:, n - 2])
    return H


def sigmoid_basis(time_grid, tau: float, lam: float) -> np.ndarray:
    """Logistic transition 1 / (1 + exp(-(t - tau) / lam))."""
    if lam <= 0:
        raise ValueError(f"sigmoid width must be positive, got {lam}")
    t = np.asarray(time_grid, dtype=float)
    return expit((t - tau) / lam)


def spline_design(time_grid, knots: Sequence[float], degree: int) -> np.ndarray:
    """B-spline design matrix on a clamped knot vector.

    ``knots`` are the breakpoints including both window endpoints; the
    endpoints are repeated to full multiplicity so the basis spans all
    polynomials of the given degree on the window.
    """
    knots = np.asarray(knots, dtype=float)
    t = np.asarray(time_grid, dtype=float)
    kv = np.concatenate([[knots[0]] * degree, knots, [knots[-1]] * degree])
    # Guard the closed right endpoint against floating grid round-off.
    tt = np.clip(t, knots[0], knots[-1])
    return BSpline.design_matrix(tt, kv, degree, extrapolate=False).toarray()


def _knot_vector(config: BasisConfig, t0: float, t1: float) -> np.ndarray:
    interior = config.interior_knots(t1 - t0)
    return np.concatenate([[t0], t0 + interior, [t1]])


def default_init(beat: Strip, config: BasisConfig) -> dict:
    """Heuristic nonlinear starting point for an R-centered window.

    Returns {"waves": ((tau, lam) for P, QRS, T), "sigmoids": (...)}.
    Callers with better landmarks should pass their own init.
    """
    t0 = beat.t_start
    dur = beat.duration
    waves = ((t0 + 0.30 * dur, 0.025),
             (t0 + 0.50 * dur, 0.015),
             (t0 + 0.75 * dur, 0.050))
    sig_taus = np.linspace(t0 + 0.55 * dur, t0 + 0.65 * dur,
                           max(config.n_sigmoid, 1))
    sigmoids = tuple((float(tau), 0.010 + 0.005 * k)
                     for k, tau in enumerate(sig_taus[:config.n_sigmoid]))
    return {"waves": waves, "sigmoids": sigmoids}


def _pack(init: dict) -> np.ndarray:
    theta = []
    for tau, lam in list(init["waves"]) + list(init["sigmoids"]):
        if lam <= 0:
            raise ValueError(f"init dilation must be positive, got {lam}")
        theta.extend([tau, math.log(lam)])
    return np.asarray(theta, dtype=float)


def _unpack(theta: np.ndarray, n_sigmoid: int):
    pairs = [(theta[2 * i], math.exp(theta[2 * i + 1]))
             for i in range(3 + n_sigmoid)]
    return pairs[:3], pairs[3:]


def _design(t, waves_nl, sigmoids_nl, config: BasisConfig,
            knots) -> np.ndarray:
    cols = []
    for (tau, lam), n in zip(waves_nl, config.n_hermite):
        if n > 0:
            cols.append(hermite_basis(n, t, tau, lam))
    for tau, lam in sigmoids_nl:
        cols.append(sigmoid_basis(t, tau, lam)[:, None])
    cols.append(spline_design(t, knots, config.spline_degree))
    return np.hstack(cols)


def _solve(A: np.ndarray, y: np.ndarray):
    """Least-squares solve plus the 2-norm condition number, taken from
    the singular values the solver computes anyway."""
    coeffs, _, _, s = np.linalg.lstsq(A, y, rcond=None)
    cond = float(s[0] / s[-1]) if s[-1] > 0.0 else math.inf
    return coeffs, cond


def _theta_valid(theta: np.ndarray, t0: float, t1: float) -> bool:
    taus = theta[0::2]
    if np.any(taus < t0) or np.any(taus > t1):
        return False
    # Wave centers keep their clinical order.
    return theta[0] < theta[2] < theta[4]


def fit_linear(beat: Strip, config: BasisConfig, init: dict,
               check_cond: bool = True) -> BeatModelFit:
    """Solve the linear coefficients at fixed nonlinear parameters."""
    t = beat.t_start + np.arange(beat.samples.size) / beat.fs
    knots = _knot_vector(config, t[0], t[-1])
    waves_nl = list(init["waves"])
    sigmoids_nl = list(init["sigmoids"])
    if len(sigmoids_nl) != config.n_sigmoid:
        raise ValueError(
            f"init has {len(sigmoids_nl)} sigmoids, config wants "
            f"{config.n_sigmoid}"
        )
    A = _design(t, waves_nl, sigmoids_nl, config, knots)
    coeffs, cond = _solve(A, beat.samples)
    if check_cond and cond > config.cond_limit:
        raise IllConditionedError(
            f"design matrix condition {cond:.3g} exceeds "
            f"{config.cond_limit:.3g}", config, cond)
    residual = beat.samples - A @ coeffs
    return _assemble(waves_nl, sigmoids_nl, coeffs, config, knots,
                     float(np.sqrt(np.mean(residual ** 2))))


def _assemble(waves_nl, sigmoids_nl, coeffs, config: BasisConfig, knots,
              residual_rms: float, converged: bool = True,
              n_iter: int = 0) -> BeatModelFit:
    i = 0
    waves = {}
    for name, (tau, lam), n in zip(WAVE_NAMES, waves_nl, config.n_hermite):
        waves[name] = WaveFit(float(tau), float(lam),
                              tuple(float(c) for c in coeffs[i:i + n]))
        i += n
    sigmoids = []
    for tau, lam in sigmoids_nl:
        sigmoids.append(SigmoidFit(float(coeffs[i]), float(tau), float(lam)))
        i += 1
    return BeatModelFit(
        waves=waves,
        sigmoids=tuple(sigmoids),
        spline_coeffs=tuple(float(c) for c in coeffs[i:]),
        knots=tuple(float(k) for k in knots),
        spline_degree=config.spline_degree,
        residual_rms=residual_rms,
        converged=converged,
        n_iter=n_iter,
    )


def fit_beat(beat: Strip, config: BasisConfig = BasisConfig(),
             init: Optional[dict] = None) -> BeatModelFit:
    """Fit the beat model by separable nonlinear least squares.

    The returned residual RMS never exceeds the residual RMS of the
    linear solve at the initial nonlinear parameters.  If no simplex
    descent converges within ``config.max_iter`` iterations the best
    parameters so far are returned with ``converged`` False.
    """
    if init is None:
        init = default_init(beat, config)
    t = beat.t_start + np.arange(beat.samples.size) / beat.fs
    t0, t1 = t[0], t[-1]
    knots = _knot_vector(config, t0, t1)
    y = beat.samples
    theta0 = _pack(init)
    if not _theta_valid(theta0, t0, t1):
        raise ValueError(
            "init centers must lie inside the beat window with P < QRS < T"
        )

    def objective(theta):
        if not _theta_valid(theta, t0, t1):
            return np.inf
        waves_nl, sigmoids_nl = _unpack(theta, config.n_sigmoid)
        A = _design(t, waves_nl, sigmoids_nl, config, knots)
        coeffs, cond = _solve(A, y)
        if cond > config.cond_limit:
            return np.inf
        r = y - A @ coeffs
        return float(np.sqrt(np.mean(r * r)))

    f0 = objective(theta0)
    if not np.isfinite(f0):
        # Distinguish the conditioning failure for the caller.
        waves_nl, sigmoids_nl = _unpack(theta0, config.n_sigmoid)
        A = _design(t, waves_nl, sigmoids_nl, config, knots)
        _, cond = _solve(A, y)
        raise IllConditionedError(
            f"design matrix condition {cond:.3g} exceeds "
            f"{config.cond_limit:.3g} at init", config, cond)

    rng = np.random.default_rng(config.seed)
    starts = [theta0]
    n_nl = 3 + config.n_sigmoid
    while len(starts) < max(config.n_starts, 1):
        jitter = theta0.copy()
        jitter[0::2] += rng.uniform(-config.jitter_tau, config.jitter_tau,
                                    size=n_nl)
        jitter[1::2] += np.log(1.0 + rng.uniform(-config.jitter_lam,
                                                 config.jitter_lam,
                                                 size=n_nl))
        if _theta_valid(jitter, t0, t1):
            starts.append(jitter)

    best_theta, best_f, best_nit, converged = theta0, f0, 0, False
    for start in starts:
        res = minimize(
            objective, start, method="Nelder-Mead",
            options={
                "maxiter": config.max_iter,
                "maxfev": 2 * config.max_iter * (2 * n_nl),
                "fatol": max(config.ftol_rel * f0, 1e-30),
                "xatol": config.xtol,
            },
        )
        if res.fun < best_f:
            best_theta, best_f, best_nit = res.x, float(res.fun), res.nit
            converged = bool(res.success)
        elif res.success and np.allclose(res.fun, best_f, rtol=1e-12,
                                         atol=1e-30):
            converged = True

    waves_nl, sigmoids_nl = _unpack(best_theta, config.n_sigmoid)
    A = _design(t, waves_nl, sigmoids_nl, config, knots)
    coeffs, _ = _solve(A, y)
    residual = y - A @ coeffs
    rms = float(np.sqrt(np.mean(residual ** 2)))
    # The init itself is always a candidate, so improvement is monotone.
    if rms > f0:
        waves_nl, sigmoids_nl = _unpack(theta0, config.n_sigmoid)
        A = _design(t, waves_nl, sigmoids_nl, config, knots)
        coeffs, _ = _solve(A, y)
        rms, converged = f0, False
    return _assemble(waves_nl, sigmoids_nl, coeffs, config, knots, rms,
                     converged=converged, n_iter=best_nit)


def _components(fit: BeatModelFit, time_grid) -> dict[str, np.ndarray]:
    t = np.asarray(time_grid, dtype=float)
    out = {}
    for name in WAVE_NAMES:
        wf = fit.waves[name]
        if wf.coeffs:
            H = hermite_basis(len(wf.coeffs), t, wf.tau, wf.lam)
            out[name] = H @ np.asarray(wf.coeffs)
        else:
            out[name] = np.zeros(t.size)
    st = np.zeros(t.size)
    for s in fit.sigmoids:
        st += s.amplitude * sigmoid_basis(t, s.tau, s.lam)
    out["ST"] = st
    if fit.spline_coeffs:
        S = spline_design(t, fit.knots, fit.spline_degree)
        out["baseline"] = S @ np.asarray(fit.spline_coeffs)
    else:
        out["baseline"] = np.zeros(t.size)
    return out


def reconstruct(fit: BeatModelFit, time_grid) -> np.ndarray:
    """Sampled model signal: all basis terms plus baseline (mV)."""
    comps = _components(fit, time_grid)
    return (comps["P"] + comps["QRS"] + comps["ST"] + comps["T"]
            + comps["baseline"])


def segment(fit: BeatModelFit, time_grid) -> Segmentation:
    """Group fitted terms into wave, ST, and baseline components."""
    comps = _components(fit, time_grid)
    return Segmentation(p_wave=comps["P"], qrs=comps["QRS"],
                        st_t=comps["ST"], t_wave=comps["T"],
                        baseline=comps["baseline"])
