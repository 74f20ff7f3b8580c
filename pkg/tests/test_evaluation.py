import math

import numpy as np
import pytest

from ogan.data import DatasetSpec, mode_centers, sample_mixture
from ogan.evaluation import (EvalReport, coverage_of_points, density_ratio_check, evaluate_run,
                             interpolate, latent_stats, log_density_ratio, mode_coverage,
                             recon_rho, reconstruction)
from ogan.nets import Layer, MlpParams, build_mlp, enc_forward, encoder_spec, gen_forward, generator_spec
from ogan.ndnum import Rng

F32 = np.float32


def linear_net(*weights, biases=None):
    """An MLP with identity activations throughout."""
    biases = biases or [np.zeros(w.shape[1]) for w in weights]
    return MlpParams([Layer(np.asarray(w, F32), np.asarray(b, F32), "linear")
                      for w, b in zip(weights, biases)])


def circle_pair(r=0.8):
    """E(x) = [x1, x2, -x1, -x2]; for |x| = r, G inverts normalize(E(x)) exactly."""
    E = linear_net(np.eye(2), np.array([[1, 0, -1, 0], [0, 1, 0, -1]]))
    G = linear_net(np.eye(4), np.vstack([np.eye(2), np.zeros((2, 2))]) * r / math.sqrt(2))
    return E, G


def circle_points(n, r=0.8, seed=0):
    angle = 2 * np.pi * Rng(seed).uniform(n)
    return (r * np.stack([np.cos(angle), np.sin(angle)], axis=1)).astype(F32)


class TestReconstruction:
    def test_constructed_inverse(self):
        E, G = circle_pair()
        x = circle_points(200)
        np.testing.assert_allclose(reconstruction(E, G, x), x, atol=1e-5)

    def test_code_shift_does_not_change_reconstruction(self):
        E, G = circle_pair()
        x = circle_points(50)
        shifted = MlpParams([E.layers[0], Layer(E.layers[1].weight,
                                                E.layers[1].bias + F32(2.5), "linear")])
        assert not np.allclose(enc_forward(shifted, x), enc_forward(E, x))
        np.testing.assert_allclose(reconstruction(shifted, G, x), reconstruction(E, G, x),
                                   atol=1e-5)
        # decoding the raw codes would not be shift invariant
        raw = gen_forward(G, enc_forward(shifted, x))
        assert not np.allclose(raw, gen_forward(G, enc_forward(E, x)), atol=1e-2)

    def test_untrained_nets_stay_in_range(self):
        E = build_mlp(encoder_spec(2, 8, seed=1))
        G = build_mlp(generator_spec(8, 2, seed=2))
        x_hat = reconstruction(E, G, sample_mixture(DatasetSpec(), Rng(3), 300).x)
        assert np.isfinite(x_hat).all() and np.abs(x_hat).max() < 1

    def test_constant_codes_are_guarded(self):
        E = linear_net(np.zeros((2, 2)), np.zeros((2, 4)))
        G = build_mlp(generator_spec(4, 2, seed=2))
        x_hat = reconstruction(E, G, np.ones((3, 2), F32))
        assert np.isfinite(x_hat).all()


class TestInterpolate:
    def setup_method(self):
        self.E = build_mlp(encoder_spec(2, 8, seed=4))
        self.G = build_mlp(generator_spec(8, 2, seed=5))
        self.x = sample_mixture(DatasetSpec(), Rng(6), 2).x

    def test_endpoints_are_bit_exact_reconstructions(self):
        for steps in (2, 7):
            path = interpolate(self.E, self.G, self.x[0], self.x[1], steps)
            assert path.shape == (steps, 2)
            assert np.array_equal(path[0], reconstruction(self.E, self.G, self.x[:1])[0])
            assert np.array_equal(path[-1], reconstruction(self.E, self.G, self.x[1:])[0])

    def test_two_steps_are_exactly_the_reconstructions(self):
        path = interpolate(self.E, self.G, self.x[0], self.x[1], 2)
        assert np.array_equal(path, reconstruction(self.E, self.G, self.x))

    def test_same_endpoints_give_a_constant_path(self):
        path = interpolate(self.E, self.G, self.x[0], self.x[0], 5)
        assert all(np.array_equal(row, path[0]) for row in path)

    def test_too_few_steps(self):
        with pytest.raises(ValueError):
            interpolate(self.E, self.G, self.x[0], self.x[1], 1)


class TestReconRho:
    def test_identity_round_trip(self):
        I = np.eye(8)
        assert recon_rho(linear_net(I, I), linear_net(I, I), Rng(1), 500) == pytest.approx(1, abs=1e-6)

    def test_constant_encoder(self):
        E = linear_net(np.zeros((2, 4)), np.zeros((4, 8)), biases=[np.zeros(4), np.full(8, 3.0)])
        G = build_mlp(generator_spec(8, 2, seed=1))
        assert recon_rho(E, G, Rng(2), 200) == 0.0

    def test_needs_enough_samples(self):
        I = np.eye(8)
        with pytest.raises(ValueError):
            recon_rho(linear_net(I, I), linear_net(I, I), Rng(1), 99)


class TestLatentStats:
    def test_zero_encoder(self):
        E = linear_net(np.zeros((2, 3)), np.zeros((3, 8)))
        assert latent_stats(E, np.ones((10, 2), F32)) == (0.0, 0.0)

    def test_identity_on_whitened_inputs(self):
        I = np.eye(16)
        x = Rng(3).normal((5000, 16))
        x = ((x - x.mean(0)) / x.std(0)).astype(F32)
        lat_avg, lat_std = latent_stats(linear_net(I, I), x)
        assert abs(lat_avg) < 0.02
        # E std of n standard normals is ~ sqrt((n-1)/n) * c4 ~ 0.95 for n = 16
        assert abs(lat_std - 1) < 0.1

    def test_empty_dataset(self):
        I = np.eye(2)
        with pytest.raises(ValueError):
            latent_stats(linear_net(I, I), np.zeros((0, 2), F32))


class TestModeCoverage:
    @pytest.mark.parametrize("K", [1, 2, 3, 5, 8, 12, 16])
    def test_oracle_sampler_covers_every_mode(self, K):
        spec = DatasetSpec(n_modes=K)
        oracle = lambda rng, m: sample_mixture(spec, rng, m).x
        covered, fractions = mode_coverage(oracle, spec, Rng(K), 10_000)
        assert covered == K
        np.testing.assert_allclose(fractions, 1 / K, atol=0.25 / K)

    def test_collapsed_generator_covers_one_mode(self):
        spec = DatasetSpec(n_modes=8)
        centre = mode_centers(spec)[3]
        G = MlpParams([Layer(np.zeros((8, 4), F32), np.zeros(4, F32), "relu"),
                       Layer(np.zeros((4, 2), F32), np.arctanh(centre).astype(F32), "tanh")])
        covered, fractions = mode_coverage(G, spec, Rng(0), 2000)
        assert covered == 1 and fractions[3] == 1.0

    def test_far_points_are_not_credited(self):
        spec = DatasetSpec(n_modes=4, mode_std=0.05)
        covered, fractions = coverage_of_points(np.zeros((100, 2)), spec)
        assert covered == 0 and not fractions.any()

    def test_threshold(self):
        spec = DatasetSpec(n_modes=2)
        c = mode_centers(spec)
        points = np.vstack([np.tile(c[0], (995, 1)), np.tile(c[1], (5, 1))])
        assert coverage_of_points(points, spec, threshold=0.01)[0] == 1
        assert coverage_of_points(points, spec, threshold=0.005)[0] == 2

    def test_needs_a_mixture(self):
        with pytest.raises(ValueError):
            mode_coverage(lambda r, m: np.zeros((m, 2)), DatasetSpec(kind="ring"), Rng(0))


class TestDensityRatio:
    def test_closed_form_line(self):
        grid = np.linspace(-3, 3, 121)
        np.testing.assert_allclose(log_density_ratio(grid, (0, 1), (0.5, 1)), 0.125 - 0.5 * grid,
                                   atol=1e-12)

    def test_exact_log_ratio(self):
        result = density_ratio_check(lambda g: log_density_ratio(g, (0, 1), (0.5, 1)))
        assert not result.degenerate and abs(result.corr - 1) <= 1e-6

    def test_constant_discriminator_is_degenerate(self):
        result = density_ratio_check(lambda g: np.full_like(g, 0.3))
        assert result.degenerate and result.corr == 0.0

    def test_sign_flip(self):
        assert density_ratio_check(lambda g: 0.5 * g).corr == pytest.approx(-1, abs=1e-9)


def test_eval_report_serialisation():
    report = EvalReport(0.61, -0.02, 0.05, 8, 8, [0.125] * 8)
    text = report.to_text()
    assert text.splitlines()[0] == "recon_rho=0.61"
    assert "modes_covered=8" in text and "density_ratio_corr" not in text
    assert report.to_csv_annotation().startswith("# eval recon_rho=0.61 ")
    assert report.to_csv_annotation().count("\n") == 1


def test_evaluate_run_is_deterministic():
    E = build_mlp(encoder_spec(2, 8, seed=1))
    G = build_mlp(generator_spec(8, 2, seed=2))
    real = sample_mixture(DatasetSpec(), Rng(3), 500).x
    a = evaluate_run(E, G, real, DatasetSpec(), Rng(9), 1000)
    b = evaluate_run(E, G, real, DatasetSpec(), Rng(9), 1000)
    assert a.to_text() == b.to_text()
    assert 0 <= a.modes_covered <= 8 and -1 <= a.recon_rho <= 1
    assert sum(a.coverage_fractions) <= 1 + 1e-12
