"""Synthetic ECG signals built from the beat model's own parameters.

Real recordings cannot be redistributed, so the repository generates
its own: each beat is an exact linear combination of the model basis,
which doubles as a self-consistency oracle for the fitter (the truth
parameters are known).  Amplitudes are millivolts throughout.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .beat_model import (
    BasisConfig,
    BeatModelFit,
    SigmoidFit,
    WaveFit,
    reconstruct,
)
from .signal_io import Record, Strip

__all__ = [
    "synthetic_fit",
    "truth_init",
    "synthetic_beat",
    "synthetic_record",
    "sinusoidal_drift",
]

# Wave centers and dilations as fractions of the beat window, with base
# Hermite amplitudes in mV; chosen to look like a lead-II beat.
_WAVE_SHAPE = {
    "P": (0.214, 0.0286, (0.12, 0.02)),
    "QRS": (0.500, 0.0171, (1.10, -0.35, 0.18)),
    "T": (0.786, 0.0643, (0.32, 0.05)),
}
_SIGMOID_SHAPE = ((0.543, 0.0114, 0.06), (0.671, 0.0214, -0.04))


def synthetic_fit(t_start: float = 0.0, duration: float = 0.7,
                  config: Optional[BasisConfig] = None,
                  amplitude: float = 1.0, seed: Optional[int] = None,
                  ) -> BeatModelFit:
    """A plausible beat parameterization on the given window.

    With a seed, centers, dilations, and amplitudes are jittered a few
    percent so repeated beats differ slightly.
    """
    config = config or BasisConfig()
    rng = np.random.default_rng(seed)

    def jitter(scale):
        return 1.0 + rng.uniform(-scale, scale) if seed is not None else 1.0

    waves = {}
    for name, n in zip(("P", "QRS", "T"), config.n_hermite):
        frac, lam_frac, amps = _WAVE_SHAPE[name]
        tau = t_start + frac * duration * jitter(0.03)
        lam = lam_frac * duration * jitter(0.08)
        coeffs = [amplitude * a * jitter(0.08) for a in amps[:n]]
        coeffs += [0.0] * (n - len(coeffs))
        waves[name] = WaveFit(tau, lam, tuple(coeffs))

    sigmoids = []
    for k in range(config.n_sigmoid):
        frac, lam_frac, amp = _SIGMOID_SHAPE[k % len(_SIGMOID_SHAPE)]
        sigmoids.append(SigmoidFit(amplitude * amp * jitter(0.10),
                                   t_start + frac * duration * jitter(0.02),
                                   lam_frac * duration * jitter(0.08)))

    interior = config.interior_knots(duration)
    knots = np.concatenate([[t_start], t_start + interior,
                            [t_start + duration]])
    n_spline = knots.size + config.spline_degree - 1
    return BeatModelFit(
        waves=waves,
        sigmoids=tuple(sigmoids),
        spline_coeffs=(0.0,) * n_spline,
        knots=tuple(knots),
        spline_degree=config.spline_degree,
        residual_rms=0.0,
    )


def truth_init(fit: BeatModelFit) -> dict:
    """The fitter init corresponding to a generated fit's parameters."""
    return {
        "waves": tuple((fit.waves[w].tau, fit.waves[w].lam)
                       for w in ("P", "QRS", "T")),
        "sigmoids": tuple((s.tau, s.lam) for s in fit.sigmoids),
    }


def synthetic_beat(fs: float = 360.0, duration: float = 0.7,
                   t_start: float = 0.0,
                   config: Optional[BasisConfig] = None,
                   amplitude: float = 1.0, seed: Optional[int] = None,
                   record_id: str = "synthetic", lead: str = "II",
                   ) -> tuple[Strip, BeatModelFit]:
    """One sampled beat plus the exact parameters that generated it."""
    fit = synthetic_fit(t_start, duration, config, amplitude, seed)
    n = int(round(duration * fs))
    t = t_start + np.arange(n) / fs
    samples = reconstruct(fit, t)
    strip = Strip(record_id=record_id, lead=lead, t_start=t_start,
                  duration=n / fs, samples=samples, fs=fs)
    return strip, fit


def sinusoidal_drift(n: int, fs: float, amplitude: float = 0.3,
                     freq: float = 0.5, phase: float = 0.4) -> np.ndarray:
    """Low-frequency baseline wander to add onto a signal (mV)."""
    t = np.arange(n) / fs
    return amplitude * np.sin(2.0 * np.pi * freq * t + phase)


def synthetic_record(record_id: str, n_beats: int = 12, fs: float = 360.0,
                     leads: tuple[str, ...] = ("I", "II", "V5"),
                     beat_duration: float = 0.7, seed: int = 0,
                     noise_rms: float = 0.0, drift_amplitude: float = 0.0,
                     ) -> Record:
    """A multi-lead recording of consecutive synthetic beats.

    Leads carry the same beat sequence at different gains, which is
    enough for presentation and pipeline tests.  Samples land exactly
    on the int16 grid at gain 200 so the binary format round-trips.
    """
    rng = np.random.default_rng(seed)
    n_per_beat = int(round(beat_duration * fs))
    n = n_beats * n_per_beat
    base = np.zeros(n)
    for b in range(n_beats):
        fit = synthetic_fit(0.0, beat_duration, None, 1.0,
                            seed=rng.integers(0, 2 ** 31))
        t = np.arange(n_per_beat) / fs
        base[b * n_per_beat:(b + 1) * n_per_beat] = reconstruct(fit, t)
    if drift_amplitude > 0.0:
        base = base + sinusoidal_drift(n, fs, drift_amplitude)
    lead_gains = 1.0 - 0.15 * np.arange(len(leads))
    samples = np.outer(lead_gains, base)
    if noise_rms > 0.0:
        samples = samples + rng.normal(0.0, noise_rms, samples.shape)
    samples = np.rint(samples * 200.0) / 200.0
    return Record(id=record_id, leads=tuple(leads), samples=samples, fs=fs,
                  meta={"interpretation": "synthetic"})
