import numpy as np
import pytest

from dqa.distortion_metrics import (
    WaveletConfig,
    dwt,
    idwt,
    prd,
    subband_names,
    uniform_weights,
    wavelet_filters,
    wedd,
    wwprd,
)


def band_limited(cfg, subband_energies, n=1024, seed=0):
    """Random signal with prescribed energy in each subband."""
    rng = np.random.default_rng(seed)
    bands = dwt(np.zeros(n), cfg)
    out = []
    for b, e in zip(bands, subband_energies):
        v = rng.normal(size=b.size)
        if e == 0.0:
            out.append(np.zeros(b.size))
        else:
            out.append(v * np.sqrt(e / (v @ v)))
    return idwt(out, cfg)


class TestPrd:
    def test_identity_is_zero(self):
        x = np.sin(np.linspace(0, 6, 200))
        assert prd(x, x) == 0.0

    def test_hand_worked(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        assert prd(x, np.zeros(4)) == pytest.approx(100.0)

    def test_joint_scaling_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=128)
        y = x + 0.1 * rng.normal(size=128)
        assert prd(3 * x, 3 * y) == pytest.approx(prd(x, y), rel=1e-12)

    def test_mean_removed_vs_raw(self):
        x = np.array([1.0, 1.0, 1.0, 3.0])
        y = x + 0.5
        assert prd(x, y, mean_removed=False) < prd(x, y, mean_removed=True)

    def test_constant_reference_rejected(self):
        with pytest.raises(ValueError, match="zero energy"):
            prd(np.ones(10), np.zeros(10))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            prd(np.ones(10), np.ones(9))


class TestWaveletFilters:
    @pytest.mark.parametrize("order", [1, 2, 3, 4, 6, 8])
    def test_orthonormality_conditions(self, order):
        h, g = wavelet_filters(f"db{order}")
        assert len(h) == 2 * order
        assert h.sum() == pytest.approx(np.sqrt(2.0), abs=1e-12)
        assert h @ h == pytest.approx(1.0, abs=1e-12)
        for k in range(1, order):
            assert h[2 * k:] @ h[:-2 * k] == pytest.approx(0.0, abs=1e-12)
        # quadrature mirror: highpass orthogonal to lowpass at even shifts
        assert g @ h == pytest.approx(0.0, abs=1e-12)

    def test_db4_reference_taps(self):
        h, _ = wavelet_filters("db4")
        assert h[0] == pytest.approx(0.230377813309, abs=1e-10)
        assert h[1] == pytest.approx(0.714846570553, abs=1e-10)
        assert h[-1] == pytest.approx(-0.010597401785, abs=1e-10)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            wavelet_filters("sym4")


class TestDwt:
    def test_zero_signal(self):
        bands = dwt(np.zeros(64))
        assert all((b == 0).all() for b in bands)

    def test_impulse_parseval(self):
        x = np.zeros(64)
        x[13] = 1.0
        bands = dwt(x)
        assert sum(float(b @ b) for b in bands) == pytest.approx(1.0, abs=1e-12)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(5)
        cfg = WaveletConfig()
        x = rng.normal(size=1024)
        assert np.max(np.abs(idwt(dwt(x, cfg), cfg) - x)) < 1e-9

    def test_parseval_random(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=512)
        e = sum(float(b @ b) for b in dwt(x))
        assert abs(e - x @ x) / (x @ x) < 1e-9

    def test_subband_count_and_sizes(self):
        cfg = WaveletConfig(levels=3)
        bands = dwt(np.ones(80), cfg)
        assert [b.size for b in bands] == [40, 20, 10, 10]
        assert subband_names(cfg) == ["D1", "D2", "D3", "A3"]

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            dwt(np.ones(16), WaveletConfig(levels=5))

    def test_indivisible_length_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            dwt(np.ones(80), WaveletConfig(levels=5))


class TestWwprd:
    def test_identity_is_zero(self):
        cfg = WaveletConfig(levels=3)
        rng = np.random.default_rng(2)
        x = rng.normal(size=256)
        assert wwprd(x, x, uniform_weights(cfg), cfg) == 0.0

    def test_one_hot_equals_subband_prd(self):
        cfg = WaveletConfig(levels=3)
        rng = np.random.default_rng(3)
        x = rng.normal(size=256)
        y = x + 0.2 * rng.normal(size=256)
        w = np.zeros(cfg.n_subbands)
        w[1] = 1.0
        bx, by = dwt(x, cfg), dwt(y, cfg)
        d = bx[1] - by[1]
        expected = 100 * np.sqrt((d @ d) / (bx[1] @ bx[1]))
        assert wwprd(x, y, w, cfg) == pytest.approx(expected, rel=1e-12)

    def test_two_subband_hand_arithmetic(self):
        # construct subband PRDs of exactly 10% and 50%
        cfg = WaveletConfig(levels=1, filter="db1")
        x = band_limited(cfg, [4.0, 9.0], n=64, seed=9)
        bx = dwt(x, cfg)
        by = [bx[0] * (1 - 0.10), bx[1] * (1 - 0.50)]
        y = idwt(by, cfg)
        got = wwprd(x, y, np.array([0.8, 0.2]), cfg)
        assert got == pytest.approx(0.8 * 10 + 0.2 * 50, abs=1e-9)

    def test_zero_energy_subband_named(self):
        cfg = WaveletConfig(levels=2, filter="db1")
        with pytest.raises(ValueError, match="D1"):
            wwprd(np.zeros(64), np.ones(64), uniform_weights(cfg), cfg)

    def test_bad_weights(self):
        cfg = WaveletConfig(levels=2)
        x = np.random.default_rng(8).normal(size=64)
        with pytest.raises(ValueError, match="sum to 1"):
            wwprd(x, x, np.array([0.5, 0.2, 0.2]), cfg)
        with pytest.raises(ValueError, match="expected 3"):
            wwprd(x, x, np.array([0.5, 0.5]), cfg)


class TestWedd:
    def test_identity_zero_weights_sum_one(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=256)
        value, weights = wedd(x, x)
        assert value == 0.0
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_two_subband_hand_arithmetic(self):
        # energies (9, 1) -> weights (0.9, 0.1); PRDs (10%, 100%)
        cfg = WaveletConfig(levels=1, filter="db1")
        x = band_limited(cfg, [1.0, 9.0], n=64, seed=5)
        bx = dwt(x, cfg)
        y = idwt([np.zeros_like(bx[0]), bx[1] * 0.9], cfg)
        value, weights = wedd(x, y, cfg)
        assert weights[1] == pytest.approx(0.9, abs=1e-12)
        assert weights[0] == pytest.approx(0.1, abs=1e-12)
        assert value == pytest.approx(0.9 * 10 + 0.1 * 100, abs=1e-9)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError, match="zero-energy"):
            wedd(np.zeros(64), np.ones(64))

    def test_hf_noise_punished_more_by_uniform_wwprd(self):
        # reference with most energy in the low subbands, tiny HF floor
        cfg = WaveletConfig(levels=4)
        energies = [1e-4, 1e-3, 0.05, 0.3, 1.0]
        x = band_limited(cfg, energies, n=1024, seed=13)
        rng = np.random.default_rng(14)
        bands = dwt(x, cfg)
        noisy = [b.copy() for b in bands]
        noisy[0] = noisy[0] + 0.05 * rng.normal(size=noisy[0].size)
        y = idwt(noisy, cfg)
        ww = wwprd(x, y, uniform_weights(cfg), cfg)
        we, _ = wedd(x, y, cfg)
        assert ww > we


class TestScalingInvariance:
    def test_all_metrics_scale_invariant(self):
        cfg = WaveletConfig(levels=3)
        rng = np.random.default_rng(21)
        x = rng.normal(size=512)
        y = x + 0.05 * rng.normal(size=512)
        w = uniform_weights(cfg)
        for s in (0.25, 7.0):
            assert prd(s * x, s * y) == pytest.approx(prd(x, y), rel=1e-9)
            assert wwprd(s * x, s * y, w, cfg) == pytest.approx(
                wwprd(x, y, w, cfg), rel=1e-9)
            assert wedd(s * x, s * y, cfg)[0] == pytest.approx(
                wedd(x, y, cfg)[0], rel=1e-9)
