"""Tests for the adaptive Hermite/sigmoid/spline beat model."""

import json
import math

import numpy as np
import pytest

from dqa.beat_model import (
    BasisConfig,
    BeatModelFit,
    IllConditionedError,
    SigmoidFit,
    WaveFit,
    default_init,
    fit_beat,
    fit_linear,
    hermite_basis,
    reconstruct,
    segment,
    sigmoid_basis,
)
from dqa.distortion_metrics import prd
from dqa.signal_io import Strip
from dqa.synthetic import (
    sinusoidal_drift,
    synthetic_beat,
    synthetic_fit,
    truth_init,
)


def perturbed(init, tau_shift=0.010, lam_scale=1.2):
    return {
        "waves": tuple((tau + tau_shift, lam * lam_scale)
                       for tau, lam in init["waves"]),
        "sigmoids": tuple((tau + tau_shift, lam * lam_scale)
                          for tau, lam in init["sigmoids"]),
    }


class TestHermiteBasis:
    def test_h0_at_origin(self):
        H = hermite_basis(1, [0.0], tau=0.0, lam=1.0)
        assert H[0, 0] == pytest.approx(np.pi ** -0.25, abs=1e-12)
        assert H[0, 0] == pytest.approx(0.7511255, abs=1e-7)

    def test_h1_odd_at_origin(self):
        H = hermite_basis(2, [0.0], tau=0.0, lam=1.0)
        assert H[0, 1] == 0.0

    def test_orthonormal_under_quadrature(self):
        # Trapezoid rule on [-12, 12], step 1e-3, covers n <= 10.
        x = np.arange(-12.0, 12.0 + 1e-3, 1e-3)
        H = hermite_basis(11, x, tau=0.0, lam=1.0)
        gram = np.empty((11, 11))
        for i in range(11):
            for j in range(11):
                gram[i, j] = np.trapezoid(H[:, i] * H[:, j], x)
        assert np.max(np.abs(gram - np.eye(11))) < 1e-6

    def test_translation_and_dilation(self):
        t = np.linspace(-1.0, 1.0, 501)
        H = hermite_basis(3, t, tau=0.2, lam=0.05)
        ref = hermite_basis(3, (t - 0.2) / 0.05, tau=0.0, lam=1.0)
        np.testing.assert_allclose(H, ref, atol=1e-14)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError, match="dilation"):
            hermite_basis(2, [0.0], tau=0.0, lam=0.0)
        with pytest.raises(ValueError, match="n_max"):
            hermite_basis(0, [0.0], tau=0.0, lam=1.0)


class TestSigmoidBasis:
    def test_center_value(self):
        assert sigmoid_basis([0.3], tau=0.3, lam=0.01)[0] == pytest.approx(0.5)

    def test_monotone_saturation(self):
        t = np.linspace(-1.0, 1.0, 200)
        s = sigmoid_basis(t, tau=0.0, lam=0.05)
        assert np.all(np.diff(s) > 0)
        assert sigmoid_basis([-50.0], 0.0, 0.05)[0] < 1e-9
        assert sigmoid_basis([50.0], 0.0, 0.05)[0] > 1.0 - 1e-9

    def test_step_like_at_small_width(self):
        lam = 0.001
        val = sigmoid_basis([0.2 + 5 * lam], tau=0.2, lam=lam)[0]
        assert val > 0.993
        assert val == pytest.approx(1.0 / (1.0 + math.exp(-5.0)), abs=1e-12)

    def test_nonpositive_width_rejected(self):
        with pytest.raises(ValueError, match="width"):
            sigmoid_basis([0.0], tau=0.0, lam=-0.1)


class TestFitBeat:
    def test_self_consistency_from_perturbed_init(self):
        strip, truth = synthetic_beat(fs=500.0, duration=0.7)
        init = perturbed(truth_init(truth))
        fit = fit_beat(strip, BasisConfig(), init)
        recon = reconstruct(fit, strip.t_start
                            + np.arange(strip.samples.size) / strip.fs)
        assert prd(strip.samples, recon) < 1.0

    def test_flat_zero_beat(self):
        strip = Strip(record_id="z", lead="II", t_start=0.0, duration=0.5,
                      samples=np.zeros(250), fs=500.0)
        fit = fit_beat(strip, BasisConfig(max_iter=200))
        for wave in fit.waves.values():
            assert all(c == 0.0 for c in wave.coeffs)
        assert all(s.amplitude == 0.0 for s in fit.sigmoids)
        assert all(c == 0.0 for c in fit.spline_coeffs)
        assert fit.residual_rms == 0.0

    def test_monotone_improvement_over_init(self):
        rng = np.random.default_rng(11)
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=3)
        noisy = Strip(record_id=strip.record_id, lead=strip.lead,
                      t_start=strip.t_start, duration=strip.duration,
                      samples=strip.samples
                      + rng.normal(0.0, 0.02, strip.samples.size),
                      fs=strip.fs)
        init = perturbed(truth_init(truth), tau_shift=0.015, lam_scale=1.3)
        config = BasisConfig(max_iter=300)
        at_init = fit_linear(noisy, config, init)
        fit = fit_beat(noisy, config, init)
        assert fit.residual_rms <= at_init.residual_rms

    def test_best_so_far_flag_when_iterations_exhausted(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7)
        init = perturbed(truth_init(truth))
        config = BasisConfig(max_iter=1, n_starts=1)
        fit = fit_beat(strip, config, init)
        assert fit.converged is False
        at_init = fit_linear(strip, config, init)
        assert fit.residual_rms <= at_init.residual_rms

    def test_ill_conditioned_init_raises_with_configuration(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7)
        init = truth_init(truth)
        # Two identical sigmoid columns make the design singular.
        init = {"waves": init["waves"],
                "sigmoids": ((0.40, 0.010), (0.40, 0.010))}
        config = BasisConfig()
        with pytest.raises(IllConditionedError) as err:
            fit_beat(strip, config, init)
        assert err.value.config == config
        assert err.value.condition > config.cond_limit

    def test_disordered_init_rejected(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7)
        init = truth_init(truth)
        waves = list(init["waves"])
        waves[0], waves[2] = waves[2], waves[0]  # T before P
        with pytest.raises(ValueError, match="P < QRS < T"):
            fit_beat(strip, BasisConfig(),
                     {"waves": tuple(waves), "sigmoids": init["sigmoids"]})

    def test_default_init_is_valid_and_usable(self):
        strip, _ = synthetic_beat(fs=360.0, duration=0.7)
        init = default_init(strip, BasisConfig())
        (tp, _), (tq, _), (tt, _) = init["waves"]
        assert strip.t_start < tp < tq < tt < strip.t_start + strip.duration
        fit = fit_beat(strip, BasisConfig(max_iter=50, n_starts=1), init)
        assert fit.residual_rms < 1.0

    def test_nested_model_never_worse(self):
        for seed in range(5):
            strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=seed)
            init = perturbed(truth_init(truth), tau_shift=0.005)
            small = BasisConfig(n_hermite=(3, 5, 3))
            large = BasisConfig(n_hermite=(4, 6, 4))
            rms_small = fit_linear(strip, small, init).residual_rms
            rms_large = fit_linear(strip, large, init).residual_rms
            assert rms_large <= rms_small + 1e-15

    def test_drift_absorbed_by_spline(self):
        # A 0.3 mV, 0.5 Hz drift distorts the trace heavily, yet the
        # per-wave coefficients barely move once the baseline has enough
        # knots and the descent runs to convergence.
        fs, dur = 500.0, 0.7
        strip, truth = synthetic_beat(fs=fs, duration=dur)
        drift = sinusoidal_drift(strip.samples.size, fs, amplitude=0.3)
        drifted = Strip(record_id="d", lead=strip.lead, t_start=0.0,
                        duration=strip.duration,
                        samples=strip.samples + drift, fs=fs)
        assert prd(strip.samples, drifted.samples) > 15.0

        knots = tuple(np.linspace(0.0, dur, 9)[1:-1])
        config = BasisConfig(spline_knots=knots, max_iter=20000,
                             ftol_rel=1e-9, xtol=1e-11, n_starts=1)
        init = truth_init(truth)
        clean_fit = fit_linear(strip, config, init)
        drift_fit = fit_beat(drifted, config, init)
        for wave in ("P", "QRS", "T"):
            c = np.asarray(clean_fit.waves[wave].coeffs)
            d = np.asarray(drift_fit.waves[wave].coeffs)
            rel = np.linalg.norm(c - d) / np.linalg.norm(c)
            assert rel < 0.05, f"{wave} coefficients moved {100 * rel:.2f}%"


class TestReconstructAndSegment:
    def test_zero_coefficients_give_zero_signal(self):
        fit = BeatModelFit(
            waves={"P": WaveFit(0.1, 0.02, (0.0, 0.0)),
                   "QRS": WaveFit(0.3, 0.01, (0.0,)),
                   "T": WaveFit(0.5, 0.04, (0.0,))},
            sigmoids=(SigmoidFit(0.0, 0.35, 0.01),),
            spline_coeffs=(0.0,) * 5,
            knots=(0.0, 0.35, 0.7), spline_degree=3, residual_rms=0.0)
        t = np.linspace(0.0, 0.7, 100)
        np.testing.assert_array_equal(reconstruct(fit, t), np.zeros(100))

    def test_linear_solve_at_truth_matches_generator(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=7)
        fit = fit_linear(strip, BasisConfig(), truth_init(truth))
        t = strip.t_start + np.arange(strip.samples.size) / strip.fs
        rms = np.sqrt(np.mean((reconstruct(fit, t) - strip.samples) ** 2))
        assert rms < 1e-6

    def test_full_fit_at_truth_matches_generator(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=2)
        config = BasisConfig(max_iter=200, n_starts=1)
        fit = fit_beat(strip, config, truth_init(truth))
        t = strip.t_start + np.arange(strip.samples.size) / strip.fs
        rms = np.sqrt(np.mean((reconstruct(fit, t) - strip.samples) ** 2))
        assert rms < 1e-6

    def test_components_sum_to_reconstruction(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=4)
        fit = fit_linear(strip, BasisConfig(), truth_init(truth))
        t = strip.t_start + np.arange(strip.samples.size) / strip.fs
        seg = segment(fit, t)
        np.testing.assert_allclose(seg.total, reconstruct(fit, t),
                                   rtol=0, atol=1e-9)

    def test_reconstruction_minus_baseline_is_wave_sum(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=4)
        fit = fit_linear(strip, BasisConfig(), truth_init(truth))
        t = strip.t_start + np.arange(strip.samples.size) / strip.fs
        seg = segment(fit, t)
        np.testing.assert_allclose(
            reconstruct(fit, t) - seg.baseline,
            seg.p_wave + seg.qrs + seg.st_t + seg.t_wave,
            rtol=0, atol=1e-9)

    def test_zero_qrs_coefficients_give_zero_qrs_component(self):
        truth = synthetic_fit(0.0, 0.7)
        waves = dict(truth.waves)
        waves["QRS"] = WaveFit(waves["QRS"].tau, waves["QRS"].lam,
                               (0.0,) * len(waves["QRS"].coeffs))
        fit = BeatModelFit(waves=waves, sigmoids=truth.sigmoids,
                           spline_coeffs=truth.spline_coeffs,
                           knots=truth.knots,
                           spline_degree=truth.spline_degree,
                           residual_rms=0.0)
        seg = segment(fit, np.linspace(0.0, 0.7, 200))
        np.testing.assert_array_equal(seg.qrs, np.zeros(200))

    def test_p_energy_localized_around_center(self):
        strip, truth = synthetic_beat(fs=500.0, duration=0.7, seed=9)
        t = strip.t_start + np.arange(strip.samples.size) / strip.fs
        seg = segment(truth, t)
        p = truth.waves["P"]
        inside = np.abs(t - p.tau) <= 4.0 * p.lam
        total = np.sum(seg.p_wave ** 2)
        assert np.sum(seg.p_wave[inside] ** 2) >= 0.90 * total


class TestTypesAndSerialization:
    def test_wave_order_invariant_enforced(self):
        truth = synthetic_fit(0.0, 0.7)
        waves = dict(truth.waves)
        waves["P"], waves["T"] = (WaveFit(waves["T"].tau, waves["T"].lam,
                                          waves["P"].coeffs),
                                  WaveFit(waves["P"].tau, waves["P"].lam,
                                          waves["T"].coeffs))
        with pytest.raises(ValueError, match="ordered"):
            BeatModelFit(waves=waves, sigmoids=truth.sigmoids,
                         spline_coeffs=truth.spline_coeffs,
                         knots=truth.knots,
                         spline_degree=truth.spline_degree,
                         residual_rms=0.0)

    def test_nonpositive_dilation_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            WaveFit(0.1, 0.0, (1.0,))
        with pytest.raises(ValueError, match="positive"):
            SigmoidFit(1.0, 0.1, -0.01)

    def test_fit_round_trips_through_json(self):
        strip, truth = synthetic_beat(fs=360.0, duration=0.7, seed=5)
        fit = fit_linear(strip, BasisConfig(), truth_init(truth))
        back = BeatModelFit.from_dict(json.loads(json.dumps(fit.to_dict())))
        assert back == fit
        t = np.linspace(0.0, 0.7, 100)
        np.testing.assert_array_equal(reconstruct(back, t),
                                      reconstruct(fit, t))

    def test_config_validation(self):
        with pytest.raises(ValueError, match="n_hermite"):
            BasisConfig(n_hermite=(4, -1, 4))
        with pytest.raises(ValueError, match="increasing"):
            BasisConfig(spline_knots=(0.3, 0.2))
        with pytest.raises(ValueError, match="inside"):
            BasisConfig(spline_knots=(0.9,)).interior_knots(0.7)
