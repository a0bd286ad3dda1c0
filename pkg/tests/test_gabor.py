import math

import numpy as np
import pytest

from vesselseg.gabor import (
    GaborConfig,
    OrientationSet,
    apply_bank,
    derive_params,
    kernel_half_extent,
    make_kernel,
)


class TestDeriveParams:
    def test_defaults(self):
        p = derive_params(6, 0.5)
        assert p.f == pytest.approx(1 / 12)
        assert p.lam == pytest.approx(math.sqrt(2 * math.log(2) / math.pi))
        assert p.lam == pytest.approx(0.6643, abs=5e-4)
        assert p.sigma_x == pytest.approx(p.lam * 6 / (0.75 * math.pi))
        assert p.sigma_x == pytest.approx(1.6917, abs=5e-4)
        assert p.sigma_y == pytest.approx(0.85 * p.sigma_x)
        assert p.sigma_y == pytest.approx(1.4380, abs=5e-4)

    def test_frequency_is_exact_ratio(self):
        p = derive_params(4, 0.8)
        assert p.f == 0.8 / 4

    @pytest.mark.parametrize("beta", [0.49, 1.01])
    def test_beta_range(self, beta):
        with pytest.raises(ValueError, match="beta"):
            derive_params(6, beta)

    def test_thickness_range(self):
        with pytest.raises(ValueError, match="thickness"):
            derive_params(0.5, 0.5)

    def test_half_extent(self):
        assert kernel_half_extent(derive_params(6, 0.5)) == 6


class TestKernel:
    params = derive_params(6, 0.5)

    @pytest.mark.parametrize("theta", [0, 15, 37.5, 90, 165])
    def test_center_is_one(self, theta):
        k = make_kernel(self.params, theta, 6)
        assert k.samples.shape == (13, 13)
        assert k.samples[6, 6] == 1.0

    @pytest.mark.parametrize("theta", range(0, 180, 15))
    def test_pi_periodic(self, theta):
        a = make_kernel(self.params, theta, 6).samples
        b = make_kernel(self.params, theta + 180, 6).samples
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("theta", range(0, 180, 15))
    def test_point_symmetric(self, theta):
        k = make_kernel(self.params, theta, 6).samples
        assert np.allclose(k, k[::-1, ::-1], rtol=0, atol=1e-12)

    def test_zero_crossing(self):
        k = make_kernel(self.params, 0, 6).samples
        x = 1 / (4 * self.params.f)
        assert x == pytest.approx(3.0)
        assert abs(k[6, 6 + 3]) < 1e-9

    def test_finite(self):
        k = make_kernel(derive_params(10, 1.0), 45, 9).samples
        assert np.all(np.isfinite(k))

    def test_orientation_axis(self):
        # theta = 90 turns the carrier to run down the columns.
        k = make_kernel(self.params, 90, 6).samples
        assert np.allclose(k, make_kernel(self.params, 0, 6).samples.T, atol=1e-12)

    def test_radius_rejected(self):
        with pytest.raises(ValueError, match="half-extent"):
            make_kernel(self.params, 0, 0)


class TestOrientationSet:
    def test_default_has_twelve_angles(self):
        assert OrientationSet().angles == tuple(float(a) for a in range(0, 180, 15))
        assert len(OrientationSet()) == 12

    def test_evenly_spaced(self):
        assert OrientationSet.evenly_spaced(45).angles == (0.0, 45.0, 90.0, 135.0)

    def test_step_must_divide_180(self):
        with pytest.raises(ValueError, match="divide"):
            OrientationSet.evenly_spaced(7)


class TestApplyBank:
    params = derive_params(6, 0.5)

    def test_constant_image(self):
        img = np.full((20, 20), 4.0)
        out = apply_bank(img, self.params, OrientationSet.evenly_spaced(90))
        expected = 4.0 * max(
            make_kernel(self.params, 0, 6).samples.sum(),
            make_kernel(self.params, 90, 6).samples.sum(),
        )
        assert np.allclose(out, expected, rtol=1e-12)

    def test_impulse_reproduces_kernel(self):
        img = np.zeros((21, 21))
        img[10, 10] = 1.0
        for theta in (0.0, 30.0, 105.0):
            out = apply_bank(img, self.params, OrientationSet((theta,)), radius=6)
            kernel = make_kernel(self.params, theta, 6).samples
            assert np.allclose(out[4:17, 4:17], kernel, rtol=0, atol=1e-9)
            assert np.allclose(out[4:17, 4:17], np.rot90(kernel, 2), rtol=0, atol=1e-9)

    def test_fusion_dominates_each_orientation(self):
        img = np.random.default_rng(0).random((24, 24))
        bank = OrientationSet()
        fused = apply_bank(img, self.params, bank)
        for theta in bank:
            single = apply_bank(img, self.params, OrientationSet((theta,)))
            assert np.all(fused >= single)

    def test_adding_orientation_never_decreases(self):
        img = np.random.default_rng(1).random((24, 24))
        small = apply_bank(img, self.params, OrientationSet((0.0, 60.0)))
        large = apply_bank(img, self.params, OrientationSet((0.0, 60.0, 120.0)))
        assert np.all(large >= small)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            apply_bank(np.zeros((8, 8)), self.params, OrientationSet(()))

    def test_bright_bar_responds_above_background(self):
        img = np.zeros((64, 64))
        img[:, 29:35] = 100.0
        out = apply_bank(img, self.params, OrientationSet())
        assert out[32, 31:33].min() > out[32, :15].max()
        assert out[32, 31:33].min() > out[32, 50:].max()

    @pytest.mark.parametrize("angle", [0.0, 45.0, 90.0, 135.0])
    def test_thin_line_on_grid_axis_picks_matching_kernel(self, angle):
        size = 49
        c = size // 2
        img = np.zeros((size, size))
        idx = np.arange(size)
        if angle == 0.0:
            img[c, :] = 100.0
        elif angle == 90.0:
            img[:, c] = 100.0
        elif angle == 45.0:
            img[idx, idx] = 100.0
        else:
            img[idx, size - 1 - idx] = 100.0
        bank = OrientationSet()
        centre = [apply_bank(img, self.params, OrientationSet((theta,)))[c, c] for theta in bank]
        assert bank.angles[int(np.argmax(centre))] == angle
        assert sorted(centre)[-1] > sorted(centre)[-2]


def test_gabor_config_defaults():
    cfg = GaborConfig()
    assert cfg.radius == math.ceil(3 * cfg.params.sigma_x)
    assert len(cfg.orientations) == 12
    with pytest.raises(ValueError):
        GaborConfig(orientation_step=7)
