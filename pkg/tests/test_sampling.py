import numpy as np
import pytest

from gglearn.basis import FourierPairwiseBasis
from gglearn.game import PowerLawTail, generate_game
from gglearn.sampling import (
    NoiseModel,
    SampleSet,
    _player_payoffs,
    build_sample_set,
    draw_actions,
    load_sample_set,
    noisy_payoff,
    save_sample_set,
)
from gglearn.game import true_utility


class TestNoiseModel:
    @pytest.mark.parametrize("family", ["gaussian", "uniform", "rademacher"])
    def test_moments(self, family):
        sigma = 0.4
        rng = np.random.default_rng(17)
        draws = NoiseModel(sigma, family).draw(rng, 100_000)
        assert abs(draws.mean()) < 4 * sigma / np.sqrt(100_000) * 2
        assert draws.var() <= sigma**2 * 1.02

    def test_sigma_zero(self):
        rng = np.random.default_rng(0)
        assert np.array_equal(NoiseModel(0.0).draw(rng, 5), np.zeros(5))

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1)
        with pytest.raises(ValueError):
            NoiseModel(0.1, "cauchy")


class TestDrawActions:
    def test_shape_and_range(self):
        actions = draw_actions(3, 1, seed=0)
        assert actions.shape == (1, 3)
        assert np.all((actions >= 0) & (actions <= 1))

    def test_deterministic(self):
        a = draw_actions(4, 50, seed=123)
        b = draw_actions(4, 50, seed=123)
        assert np.array_equal(a, b)

    def test_mean_near_half(self):
        actions = draw_actions(3, 10_000, seed=7)
        assert np.abs(actions.mean(axis=0) - 0.5).max() < 0.02

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            draw_actions(3, 5, seed=0, mode="gaussian")


class TestNoisyPayoff:
    def test_sigma_zero_equals_true_utility(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(5, 2, basis.r, seed=3, min_weight=0.5)
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, 5)
        got = noisy_payoff(game, basis, NoiseModel(0.0), 1, x, rng)
        assert got == pytest.approx(true_utility(game, basis, 1, x), abs=1e-12)

    def test_empty_neighborhood_is_zero(self):
        basis = FourierPairwiseBasis(1)
        coef = np.zeros((3, 3, basis.r))
        from gglearn.game import GameSpec

        game = GameSpec(n=3, degree=1, neighbors=((), (0,), ()), coefficients=coef)
        rng = np.random.default_rng(1)
        got = noisy_payoff(game, basis, NoiseModel(5.0), 0, np.array([0.1, 0.2, 0.3]), rng)
        assert got == 0.0

    def test_monte_carlo_unbiased(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 2, basis.r, seed=8, min_weight=0.5)
        x = np.array([0.21, 0.52, 0.73, 0.94])
        reps = 10_000
        rng = np.random.default_rng(44)
        tiled = np.tile(x, (reps, 1))
        draws, _ = _player_payoffs(
            game, basis, NoiseModel(0.3), 0, tiled, rng, basis.r, False
        )
        truth = true_utility(game, basis, 0, x)
        se = draws.std(ddof=1) / np.sqrt(reps)
        assert abs(draws.mean() - truth) < 3 * se + 1e-12

    def test_power_law_tail_enters_payoff(self):
        basis = FourierPairwiseBasis(1)
        tail = PowerLawTail(coef=2.0, exponent=2.0)
        game = generate_game(3, 1, basis.r, seed=2, min_weight=0.5, tail=tail)
        x = np.array([0.3, 0.6, 0.9])
        rng = np.random.default_rng(5)
        with_tail = noisy_payoff(game, basis, NoiseModel(0.0), 0, x, rng, tail_truncation=64)
        head_only = noisy_payoff(game, basis, NoiseModel(0.0), 0, x, rng, tail_truncation=basis.r)
        assert with_tail != pytest.approx(head_only, abs=1e-9)
        assert with_tail == pytest.approx(
            true_utility(game, basis, 0, x, tail_truncation=64), abs=1e-12
        )


class TestBuildSampleSet:
    def test_shapes_and_meta(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=0, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.1), 5, seed=1)
        assert samples.payoffs.shape == (5, 4)
        assert samples.actions.shape == (5, 4)
        assert samples.meta.tail_truncation == basis.r
        assert samples.meta.noise.sigma == 0.1
        assert samples.meta.game_info["degree"] == 1

    def test_bit_identical_under_seed(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 2, basis.r, seed=0, min_weight=0.5)
        a = build_sample_set(game, basis, NoiseModel(0.2), 20, seed=9)
        b = build_sample_set(game, basis, NoiseModel(0.2), 20, seed=9)
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.payoffs, b.payoffs)

    def test_noiseless_column_matches_recomputation(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(3, 1, basis.r, seed=6, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 12, seed=2)
        for i in range(3):
            expected = [true_utility(game, basis, i, row) for row in samples.actions]
            assert np.allclose(samples.payoffs[:, i], expected, atol=1e-12)

    def test_payoffs_unchanged_by_retention(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 2, basis.r, seed=3, min_weight=0.5)
        plain = build_sample_set(game, basis, NoiseModel(0.2), 15, seed=4)
        boxed = build_sample_set(game, basis, NoiseModel(0.2), 15, seed=4, retain_noise=True)
        assert np.array_equal(plain.payoffs, boxed.payoffs)
        assert boxed.noise is not None
        assert boxed.noise.shape == (15, 4, 3 * basis.r)

    def test_retained_noise_reproduces_payoffs(self):
        # the recorded draws, weighted by the true coefficients, rebuild the payoff
        basis = FourierPairwiseBasis(1)
        game = generate_game(5, 2, basis.r, seed=10, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.5), 8, seed=11, retain_noise=True)
        from gglearn.basis import feature_matrix, support_columns

        for i in range(5):
            clean = feature_matrix(basis, i, samples.actions)
            cols = support_columns(i, game.in_neighbors(i), game.n, basis.r)
            beta_true = np.concatenate(
                [game.coefficient_series(i, j, basis.r) for j in game.in_neighbors(i)]
            )
            noisy_feats = clean[:, cols] + samples.player_noise(i)[:, cols]
            rebuilt = noisy_feats @ beta_true
            assert np.allclose(rebuilt, samples.payoffs[:, i], atol=1e-12)

    def test_residual_autocorrelation_near_zero(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(3, 1, basis.r, seed=14, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.3), 10_000, seed=15)
        truth = true_utility(game, basis, 0, samples.actions)
        resid = samples.payoffs[:, 0] - truth
        resid = resid - resid.mean()
        acf1 = float(resid[:-1] @ resid[1:] / (resid @ resid))
        assert abs(acf1) < 0.05


class TestCsvRoundTrip:
    def test_round_trip_black_box(self, tmp_path):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=1, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.1), 9, seed=2)
        save_sample_set(samples, tmp_path)
        assert (tmp_path / "actions.csv").exists()
        header = (tmp_path / "actions.csv").read_text().splitlines()[0]
        assert header == "player_1,player_2,player_3,player_4"
        header_u = (tmp_path / "payoffs.csv").read_text().splitlines()[0]
        assert header_u == "u_1,u_2,u_3,u_4"
        back = load_sample_set(tmp_path)
        assert np.array_equal(back.actions, samples.actions)
        assert np.array_equal(back.payoffs, samples.payoffs)
        assert back.noise is None
        assert back.meta.noise == samples.meta.noise

    def test_round_trip_white_box(self, tmp_path):
        basis = FourierPairwiseBasis(1)
        game = generate_game(3, 1, basis.r, seed=5, min_weight=0.5)
        samples = build_sample_set(
            game, basis, NoiseModel(0.2), 6, seed=3, retain_noise=True
        )
        save_sample_set(samples, tmp_path)
        back = load_sample_set(tmp_path)
        assert back.noise is not None
        assert np.array_equal(back.noise, samples.noise)


class TestSampleSetValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            SampleSet(actions=np.zeros((3, 2)), payoffs=np.zeros((2, 2)), meta=None)

    def test_nonfinite_payoffs(self):
        from gglearn.sampling import SampleMeta

        payoffs = np.zeros((2, 2))
        payoffs[0, 0] = np.inf
        with pytest.raises(ValueError):
            SampleSet(actions=np.zeros((2, 2)), payoffs=payoffs, meta=SampleMeta())
