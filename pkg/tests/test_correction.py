import numpy as np
import pytest
from pydantic import ValidationError, parse_obj_as

from bsinfer.core import BartlettFactorError, DomainError, HypothesisError, RankDeficiencyError
from bsinfer.correction import (AlphaFixed, BartlettFactor, BetaFull, BetaSubset, HypothesisSpec, bartlett_B,
                                epsilon_alpha, epsilon_beta, epsilon_general, lawley_epsilon_oracle)
from bsinfer.specfun import delta_set
from bsinfer.utils import derive_stream


def design(n: int, p: int, seed: int = 0) -> np.ndarray:
    rng = derive_stream(seed)
    return np.column_stack([np.ones(n), rng.uniform(size=(n, p - 1))])


class TestHypotheses:
    def test_parse_from_dicts(self):
        assert isinstance(parse_obj_as(HypothesisSpec, {'kind': 'alpha', 'alpha0': 0.5}), AlphaFixed)
        h = parse_obj_as(HypothesisSpec, {'kind': 'beta_subset', 'indices': [2, 3]})
        assert isinstance(h, BetaSubset)
        assert h.values == [0.0, 0.0]
        assert isinstance(parse_obj_as(HypothesisSpec, {'kind': 'beta_full', 'values': [1, 2]}), BetaFull)

    @pytest.mark.parametrize('fields', [
        {'kind': 'beta_subset', 'indices': [1, 1]},
        {'kind': 'beta_subset', 'indices': [1, 2], 'values': [0.0]},
        {'kind': 'beta_subset', 'indices': [-1]},
        {'kind': 'alpha', 'alpha0': 0.0},
        {'kind': 'alpha', 'alpha0': 1.0, 'indices': [0]},
    ])
    def test_invalid(self, fields):
        with pytest.raises(ValidationError):
            parse_obj_as(HypothesisSpec, fields)

    def test_kind_is_checked(self):
        with pytest.raises(ValidationError):
            AlphaFixed(kind='beta_full', alpha0=1.0)

    def test_restriction_counts(self):
        assert AlphaFixed(alpha0=1.0).q(5) == 1
        assert BetaSubset(indices=[0, 4]).q(5) == 2
        assert BetaFull(values=[0.0] * 5).q(5) == 5

    def test_check(self):
        with pytest.raises(HypothesisError):
            BetaSubset(indices=[3]).check(3)

        with pytest.raises(HypothesisError):
            BetaFull(values=[1.0, 2.0]).check(3)

        BetaSubset(indices=[2]).check(3)

    def test_describe(self):
        names = ['intercept', 'dose', 'age']
        assert BetaSubset(indices=[2, 1], values=[0.0, 1.5]).describe(names) == 'age = 0, dose = 1.5'
        assert AlphaFixed(alpha0=0.5).describe(names) == 'alpha = 0.5'

    def test_frozen(self):
        with pytest.raises(TypeError):
            AlphaFixed(alpha0=1.0).alpha0 = 2.0


class TestClosedForms:
    def test_general_term_splits(self):
        X = design(20, 4)
        assert epsilon_general(0.5, X) == pytest.approx(epsilon_alpha(0.5, 4, 20) + epsilon_beta(0.5, X))

    def test_general_term_ignores_design_beyond_leverages(self):
        # an invertible column transformation leaves the hat matrix unchanged
        X = design(15, 3)
        mixed = X @ np.array([[1.0, 0.5, 0.0], [0.0, 2.0, 0.0], [0.0, -1.0, 3.0]])
        assert epsilon_general(0.8, mixed) == pytest.approx(epsilon_general(0.8, X), rel=1e-10)

    def test_beta_subset_is_difference_of_general_terms(self):
        X = design(25, 5)
        alpha = 0.7
        factor = bartlett_B(BetaSubset(indices=[1, 3]), alpha, X)
        reduced = np.delete(X, [1, 3], axis=1)
        assert factor.B == pytest.approx(epsilon_general(alpha, X) - epsilon_general(alpha, reduced), rel=1e-10)
        assert factor.q == 2

    def test_beta_full_formula(self):
        X = design(25, 3)
        alpha = 1.3
        delta = delta_set(alpha)
        factor = bartlett_B(BetaFull(values=[0.0, 0.0, 0.0]), alpha, X)
        trace = np.sum(np.diag(X @ np.linalg.inv(X.T @ X) @ X.T) ** 2)
        assert factor.B == pytest.approx((delta.delta1 * 3 + delta.delta2 * 9) / 25 + delta.delta3 * trace, rel=1e-10)
        assert factor.B == pytest.approx(epsilon_general(alpha, X) - 1.0 / 75.0, rel=1e-10)

    def test_alpha_fixed(self):
        X = design(30, 2)
        factor = bartlett_B(AlphaFixed(alpha0=0.5), 0.5, X)
        assert factor.B == pytest.approx(epsilon_alpha(0.5, 2, 30))
        assert factor.q == 1

    def test_empty_and_inconsistent_hypotheses(self):
        X = design(10, 3)

        with pytest.raises(HypothesisError):
            bartlett_B(BetaSubset(indices=[]), 0.5, X)

        with pytest.raises(HypothesisError):
            bartlett_B(BetaSubset(indices=[5]), 0.5, X)

    def test_rank_deficient_design(self):
        X = design(10, 3)
        X[:, 2] = 2.0 * X[:, 1]

        with pytest.raises(RankDeficiencyError):
            bartlett_B(BetaSubset(indices=[2]), 0.5, X)

    def test_term_vanishes_with_sample_size(self):
        values = [bartlett_B(BetaSubset(indices=[2, 3]), 0.5, design(n, 4)).B for n in (20, 200, 2000)]
        assert abs(values[2]) < abs(values[1]) < abs(values[0])
        assert abs(values[2]) < 0.05

    def test_term_is_of_order_one_over_n(self):
        base = design(20, 4, seed=5)
        scaled = [n * bartlett_B(BetaSubset(indices=[2, 3]), 0.5, np.tile(base, (n // 20, 1))).B
                  for n in range(20, 220, 20)]
        assert max(scaled) <= 1.2 * min(scaled)
        assert min(scaled) > 0

    def test_alpha_hypothesis_depends_on_dimensions_only(self):
        h = AlphaFixed(alpha0=0.8)
        first = bartlett_B(h, 0.8, design(18, 3, seed=1))
        second = bartlett_B(h, 0.8, np.column_stack([np.ones(18), derive_stream(9).normal(size=(18, 2)) ** 3]))
        assert first.B == second.B

    @pytest.mark.parametrize('n', [20, 50])
    def test_alpha_hypothesis_iid_small_shape(self, n):
        factor = bartlett_B(AlphaFixed(alpha0=0.01), 0.01, np.ones((n, 1)))
        assert factor.B == pytest.approx(11.0 / (6.0 * n), rel=0.01)

    def test_subset_of_every_coefficient_matches_full_hypothesis(self):
        X = design(16, 3, seed=6)
        subset = bartlett_B(BetaSubset(indices=[0, 1, 2]), 0.9, X)
        full = bartlett_B(BetaFull(values=[0.0, 0.0, 0.0]), 0.9, X)
        assert subset.B == pytest.approx(full.B, rel=1e-12)
        assert subset.q == full.q == 3


class TestBartlettFactor:
    def test_statistics(self):
        factor = BartlettFactor(B=0.4, q=2, alpha=0.5, n=20, p=4)
        assert factor.c == pytest.approx(1.2)
        assert factor.corrected(6.0) == pytest.approx(5.0)
        assert factor.star(6.0) == pytest.approx(6.0 * np.exp(-0.2))
        assert factor.two_star(6.0) == pytest.approx(4.8)
        assert factor.to_dict() == {'B': 0.4, 'c': pytest.approx(1.2), 'q': 2}

    def test_non_positive_factor(self):
        factor = BartlettFactor(B=-3.0, q=2, alpha=0.05, n=10, p=4)

        with pytest.raises(BartlettFactorError, match='alpha = 0.05'):
            factor.corrected(1.0)

        assert factor.star(1.0) > 0
        assert factor.two_star(1.0) == pytest.approx(2.5)


class TestOracle:
    """Direct cumulant summation against the closed forms on small designs."""

    @pytest.mark.parametrize('alpha', [0.3, 0.5, 1.0, 2.0, 5.0])
    @pytest.mark.parametrize('n,p', [(6, 1), (8, 2), (12, 3)])
    def test_general_term(self, alpha, n, p):
        X = design(n, p, seed=n)
        assert lawley_epsilon_oracle(alpha, X) == pytest.approx(epsilon_general(alpha, X), rel=1e-6, abs=1e-10)

    @pytest.mark.parametrize('index', range(50))
    def test_general_term_random_instances(self, index):
        rng = derive_stream(4242, index)
        p = int(rng.integers(1, 4))
        n = int(rng.integers(p + 2, 13))
        alpha = float(rng.uniform(0.3, 3.0))
        X = np.column_stack([np.ones(n), rng.uniform(size=(n, p - 1))])
        assert lawley_epsilon_oracle(alpha, X) == pytest.approx(epsilon_general(alpha, X), rel=1e-6)

    def test_iid_design(self):
        X = np.ones((20, 1))
        assert lawley_epsilon_oracle(0.5, X) == pytest.approx(epsilon_general(0.5, X), rel=1e-6)

    @pytest.mark.parametrize('alpha', [0.4, 2.5])
    def test_invariant_to_design_scaling(self, alpha):
        X = design(10, 3, seed=8)
        assert lawley_epsilon_oracle(alpha, 2.0 * X) == pytest.approx(lawley_epsilon_oracle(alpha, X), rel=1e-9)

    @pytest.mark.parametrize('alpha', [0.3, 1.0, 5.0])
    def test_known_shape(self, alpha):
        X = design(10, 3, seed=1)
        oracle = lawley_epsilon_oracle(alpha, X, indices=range(3))
        assert oracle == pytest.approx(epsilon_beta(alpha, X), rel=1e-8)

    @pytest.mark.parametrize('alpha', [0.3, 1.0, 5.0])
    def test_known_coefficients(self, alpha):
        n = 9
        X = design(n, 2, seed=2)
        assert lawley_epsilon_oracle(alpha, X, indices=[2]) == pytest.approx(1.0 / (3.0 * n), rel=1e-6)

    @pytest.mark.parametrize('alpha', [0.4, 1.5])
    def test_subset_hypothesis(self, alpha):
        X = design(12, 3, seed=3)
        full = lawley_epsilon_oracle(alpha, X)
        nuisance = lawley_epsilon_oracle(alpha, X, indices=[0, 3])
        assert bartlett_B(BetaSubset(indices=[1, 2]), alpha, X).B == pytest.approx(full - nuisance, rel=1e-6)

    def test_alpha_hypothesis(self):
        X = design(11, 2, seed=4)
        full = lawley_epsilon_oracle(0.6, X)
        nuisance = lawley_epsilon_oracle(0.6, X, indices=[0, 1])
        assert bartlett_B(AlphaFixed(alpha0=0.6), 0.6, X).B == pytest.approx(full - nuisance, rel=1e-6)

    def test_dimension_limit(self):
        with pytest.raises(DomainError):
            lawley_epsilon_oracle(0.5, design(12, 5))

    def test_bad_positions(self):
        with pytest.raises(DomainError):
            lawley_epsilon_oracle(0.5, design(12, 2), indices=[3])
