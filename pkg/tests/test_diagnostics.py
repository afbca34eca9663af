import math

import numpy as np
import pytest

from gglearn.basis import FourierPairwiseBasis, support_columns
from gglearn.diagnostics import (
    NotApplicableError,
    check_incoherence,
    check_min_weight,
    check_positive_definiteness,
    compute_gram,
    compute_noisy_gram,
    diagnose_game,
    diagnose_player,
    error_bounds,
    lambda_threshold,
    noisy_condition_frequency,
    render_report_table,
    tail_bound,
)
from gglearn.game import GameSpec, PowerLawTail, generate_game
from gglearn.sampling import NoiseModel, build_sample_set
from gglearn.solver import assemble_regression


def reference_threshold(psi_bar, n, delta, N, d, C, alpha, sigma):
    """Independent per-term evaluation of the four-term penalty floor."""
    t1 = 20 * math.sqrt(2) * psi_bar * math.sqrt(d * delta * math.log(d) / N)
    t2 = 10 * math.sqrt(2) * sigma * psi_bar * C * math.sqrt(math.log(d) / N)
    t3 = (20 * math.sqrt(2) * psi_bar / (1 - alpha / 2)) * math.sqrt(
        d * delta * math.log(n - d) / N
    )
    t4 = (10 * math.sqrt(2) * sigma * psi_bar * C / (1 - alpha / 2)) * math.sqrt(
        math.log(n - d) / N
    )
    return max(t1, t2, t3, t4)


class TestComputeGram:
    def test_direct_product_oracle(self):
        rng = np.random.default_rng(1)
        design = rng.normal(size=(7, 5))
        blocks = compute_gram(design, [1, 3])
        manual = np.zeros((5, 5))
        for s in range(7):
            manual += np.outer(design[s], design[s])
        manual /= 7
        assert np.allclose(blocks.full, manual, atol=1e-12)
        assert np.allclose(blocks.support, manual[np.ix_([1, 3], [1, 3])], atol=1e-12)
        assert np.allclose(
            blocks.cross, manual[np.ix_([0, 2, 4], [1, 3])], atol=1e-12
        )

    def test_single_all_ones_sample(self):
        design = np.ones((1, 4))
        blocks = compute_gram(design, [0, 1])
        assert np.array_equal(blocks.full, np.ones((4, 4)))

    def test_orthogonal_columns_diagonal(self):
        design = np.diag([1.0, 2.0, 3.0])
        blocks = compute_gram(design, [0])
        off = blocks.full - np.diag(np.diag(blocks.full))
        assert np.all(off == 0)

    def test_empty_support(self):
        design = np.random.default_rng(0).normal(size=(4, 3))
        blocks = compute_gram(design, [])
        assert blocks.support.shape == (0, 0)
        with pytest.raises(NotApplicableError):
            check_positive_definiteness(blocks.support)


class TestPositiveDefiniteness:
    def test_identity_block(self):
        res = check_positive_definiteness(np.eye(3))
        assert res.min_eigenvalue == pytest.approx(1.0)
        assert res.passed

    def test_duplicated_column_fails(self):
        col = np.random.default_rng(2).normal(size=10)
        design = np.column_stack([col, col])
        blocks = compute_gram(design, [0, 1])
        res = check_positive_definiteness(blocks.support)
        assert res.min_eigenvalue == pytest.approx(0.0, abs=1e-10)
        assert not res.passed

    def test_constructed_spectrum(self):
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        eigs = np.array([0.3, 0.9, 1.4, 2.2])
        block = q @ np.diag(eigs) @ q.T
        block = (block + block.T) / 2
        res = check_positive_definiteness(block)
        assert res.min_eigenvalue == pytest.approx(0.3, abs=1e-8)

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError):
            check_positive_definiteness(bad)


class TestIncoherence:
    def test_zero_cross_block(self):
        res = check_incoherence(np.zeros((3, 2)), np.eye(2))
        assert res.margin == pytest.approx(1.0)
        assert res.passed

    def test_copied_block_fails(self):
        block = np.array([[0.5, 0.1], [0.1, 0.4]])
        res = check_incoherence(block, block)
        # cross @ inv(support) = identity, row sums 1, margin 0
        assert res.operator_norm == pytest.approx(1.0, abs=1e-12)
        assert not res.passed

    def test_row_sum_oracle(self):
        rng = np.random.default_rng(4)
        support = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        support = (support + support.T) / 2 + 0.5 * np.eye(3)
        cross = 0.2 * rng.normal(size=(4, 3))
        res = check_incoherence(cross, support)
        manual = np.abs(cross @ np.linalg.inv(support)).sum(axis=1).max()
        assert res.operator_norm == pytest.approx(manual, abs=1e-12)
        assert res.margin == pytest.approx(1 - manual, abs=1e-12)

    def test_singular_support_raises(self):
        with pytest.raises(ValueError):
            check_incoherence(np.ones((2, 2)), np.zeros((2, 2)))


class TestMinWeight:
    def test_zero_penalty_passes_with_any_signal(self):
        game = generate_game(5, 2, 4, seed=5, min_weight=0.5)
        res = check_min_weight(game, 0, lam=0.0, c_min=0.5)
        assert res.threshold == 0.0
        assert res.passed

    def test_hand_arithmetic(self):
        # lam 0.1, c_min 1, d 4, |S_i| 4: (2*0.1/1) * (2*2 + 1/2) = 0.9
        game = generate_game(9, 4, 2, seed=6, min_weight=5.0)
        res = check_min_weight(game, 0, lam=0.1, c_min=1.0, degree=4)
        assert res.threshold == pytest.approx(0.9, abs=1e-12)

    def test_weight_below_threshold_fails(self):
        game = generate_game(5, 2, 4, seed=7, min_weight=0.1)
        res = check_min_weight(game, 0, lam=1.0, c_min=0.5)
        assert not res.passed

    def test_needs_positive_c_min(self):
        game = generate_game(5, 2, 4, seed=8, min_weight=0.5)
        with pytest.raises(NotApplicableError):
            check_min_weight(game, 0, lam=0.1, c_min=0.0)


class TestLambdaThreshold:
    def test_hand_evaluated_example(self):
        got = lambda_threshold(1.0, 3, 1.0, 100, 1, 1.0, 0.5, 1.0)
        want = reference_threshold(1.0, 3, 1.0, 100, 1, 1.0, 0.5, 1.0)
        assert got == pytest.approx(want, abs=1e-12)
        # with d=1 the log d terms vanish; the delta complement term wins
        hand = (20 * math.sqrt(2) / 0.75) * math.sqrt(math.log(2) / 100)
        assert got == pytest.approx(hand, abs=1e-12)

    def test_random_parameter_agreement(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(3, 40))
            d = int(rng.integers(1, n - 1))
            args = (
                float(rng.uniform(0.5, 2)),
                n,
                float(rng.uniform(0, 2)),
                int(rng.integers(10, 10_000)),
                d,
                float(rng.uniform(0.5, 20)),
                float(rng.uniform(0.05, 0.95)),
                float(rng.uniform(0, 1)),
            )
            assert lambda_threshold(*args) == pytest.approx(
                reference_threshold(*args), rel=1e-12
            )

    def test_quadruple_samples_halves_threshold(self):
        base = lambda_threshold(1.0, 12, 0.3, 200, 3, 2.0, 0.4, 0.7)
        quad = lambda_threshold(1.0, 12, 0.3, 800, 3, 2.0, 0.4, 0.7)
        assert quad == pytest.approx(base / 2.0, rel=1e-12)

    def test_degenerate_zero(self):
        assert lambda_threshold(1.0, 10, 0.0, 100, 2, 1.0, 0.5, 0.0) == 0.0

    def test_n_not_larger_than_d_rejected(self):
        with pytest.raises(ValueError):
            lambda_threshold(1.0, 3, 0.1, 100, 3, 1.0, 0.5, 0.1)


class TestErrorBounds:
    def test_zero_penalty_and_tail(self):
        res = error_bounds(0.0, 0.5, 2, 2, 1.0, 0.0)
        assert res.coefficient_bound == 0.0
        assert res.payoff_bound == 0.0

    def test_hand_arithmetic(self):
        # lam .05, c_min .5, d 1, s 1, psi_bar 1, delta 0: est (0.2)*(3)=0.6
        res = error_bounds(0.05, 0.5, 1, 1, 1.0, 0.0)
        assert res.coefficient_bound == pytest.approx(0.6, abs=1e-12)
        assert res.payoff_bound == pytest.approx(0.6, abs=1e-12)

    def test_linear_in_penalty(self):
        a = error_bounds(0.05, 0.3, 2, 2, 1.0, 0.1)
        b = error_bounds(0.10, 0.3, 2, 2, 1.0, 0.1)
        assert b.coefficient_bound == pytest.approx(2 * a.coefficient_bound, rel=1e-12)

    def test_degenerate_inputs(self):
        with pytest.raises(NotApplicableError):
            error_bounds(0.1, 0.0, 2, 2, 1.0, 0.0)
        with pytest.raises(NotApplicableError):
            error_bounds(0.1, 0.5, 2, 0, 1.0, 0.0)


class TestTailBound:
    def test_zero_tail(self):
        game = generate_game(4, 1, 4, seed=10, min_weight=0.5)
        assert tail_bound(game, 4) == 0.0

    def test_power_law_exact(self):
        game = generate_game(4, 1, 4, seed=11, min_weight=0.5, tail=PowerLawTail(2.0, 2.0))
        want = sum(2.0 / k**2 for k in range(5, 200_000))
        assert tail_bound(game, 4) == pytest.approx(want, abs=1e-4)

    def test_head_beyond_r_counts(self):
        game = generate_game(4, 1, 8, seed=12, min_weight=0.5)
        # discarding the last 4 head coefficients leaves their mass in the bound
        expected = max(
            np.abs(game.coefficients[i, j, 4:]).sum()
            for i in range(4)
            for j in game.in_neighbors(i)
        )
        assert tail_bound(game, 4) == pytest.approx(expected, abs=1e-12)


class TestNoisyGram:
    def test_sigma_zero_equals_clean(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=13, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 30, seed=14, retain_noise=True)
        design, _ = assemble_regression(samples, basis, 0)
        cols = support_columns(0, game.in_neighbors(0), 4, basis.r)
        clean = compute_gram(design, cols)
        noisy = compute_noisy_gram(design, samples.player_noise(0), cols)
        assert np.array_equal(noisy.full, clean.full)

    def test_direct_summation_oracle(self):
        rng = np.random.default_rng(15)
        design = rng.normal(size=(6, 4))
        noise = rng.normal(size=(6, 4))
        got = compute_noisy_gram(design, noise, [0, 2])
        manual = np.zeros((4, 4))
        for s in range(6):
            manual += np.outer(design[s], design[s]) + np.outer(design[s], noise[s])
        manual /= 6
        assert np.allclose(got.full, manual, atol=1e-12)
        sym = (manual[np.ix_([0, 2], [0, 2])] + manual[np.ix_([0, 2], [0, 2])].T) / 2
        assert got.min_eigenvalue_sym == pytest.approx(np.linalg.eigvalsh(sym)[0], abs=1e-12)

    def test_black_box_not_applicable(self):
        with pytest.raises(NotApplicableError):
            compute_noisy_gram(np.eye(3), None, [0])

    def test_condition_frequency_high_at_large_n(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=16, min_weight=0.5)
        freq = noisy_condition_frequency(
            game, basis, NoiseModel(0.3), 0, n_samples=500, replications=200, seed=17
        )
        assert freq["usable"] >= 150
        assert freq["eig_ok_rate"] >= 0.9
        assert freq["incoherence_ok_rate"] >= 0.9


class TestReports:
    def test_full_report_noiseless(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(6, 2, basis.r, seed=18, min_weight=0.6)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 400, seed=19)
        rep = diagnose_player(game, samples, basis, 0, lam=0.01)
        assert rep.verdicts["positive_definite"] is True
        assert rep.verdicts["incoherent"] is True
        assert rep.verdicts["min_weight"] is True
        assert rep.verdicts["lambda_ok"] is True  # sigma=0, zero tail: floor is 0
        assert rep.lambda_floor == 0.0
        assert rep.coefficient_error_bound > 0
        assert rep.feature_norm_bound <= math.sqrt(2 * basis.r) * basis.psi_bar + 1e-12

    def test_dependency_when_rank_deficient(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(6, 2, basis.r, seed=20, min_weight=0.6)
        # fewer samples than support columns: the support block is singular
        samples = build_sample_set(game, basis, NoiseModel(0.0), 3, seed=21)
        rep = diagnose_player(game, samples, basis, 0, lam=0.01)
        assert rep.verdicts["positive_definite"] is False
        assert rep.verdicts["incoherent"] is None
        assert rep.verdicts["min_weight"] is None
        assert rep.verdicts["lambda_ok"] is None
        assert any("dependent checks skipped" in note for note in rep.notes)

    def test_white_box_fields(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=22, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.2), 200, seed=23, retain_noise=True)
        rep = diagnose_player(game, samples, basis, 1, lam=0.05)
        assert rep.noisy_min_eigenvalue is not None
        assert rep.noisy_incoherence_norm is not None
        black = build_sample_set(game, basis, NoiseModel(0.2), 200, seed=23)
        rep2 = diagnose_player(game, black, basis, 1, lam=0.05)
        assert rep2.noisy_min_eigenvalue is None

    def test_table_rendering(self):
        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=24, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 100, seed=25)
        reports = diagnose_game(game, samples, basis, lam=0.01)
        table = render_report_table(reports)
        assert "player" in table
        assert "PASS" in table
        assert len(table.splitlines()) == 2 + game.n

    def test_empty_support_not_applicable(self):
        basis = FourierPairwiseBasis(1)
        coef = np.zeros((3, 3, basis.r))
        coef[1, 0, 0] = 1.0
        game = GameSpec(n=3, degree=1, neighbors=((), (0,), ()), coefficients=coef)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 50, seed=26)
        rep = diagnose_player(game, samples, basis, 0, lam=0.01)
        assert all(v is None for v in rep.verdicts.values())
        assert any("no in-neighbors" in n for n in rep.notes)

    def test_json_round_trip_shape(self):
        import json

        basis = FourierPairwiseBasis(1)
        game = generate_game(4, 1, basis.r, seed=27, min_weight=0.5)
        samples = build_sample_set(game, basis, NoiseModel(0.0), 100, seed=28)
        rep = diagnose_player(game, samples, basis, 0, lam=0.01)
        payload = json.loads(json.dumps(rep.to_json()))
        assert payload["player"] == 0
        assert payload["verdicts"]["positive_definite"] is True
