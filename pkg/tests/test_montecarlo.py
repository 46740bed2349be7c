import numpy as np
import pytest
from pydantic import ValidationError

from bsinfer.basic_types import Statistic
from bsinfer.core import DomainError, HypothesisError
from bsinfer.correction import AlphaFixed, BetaSubset
from bsinfer.montecarlo import (CollinearDesign, SimConfig, make_collinear_design, make_design,
                                normal_true_level, quantile_discrepancy, run_null_rejection, run_power,
                                true_parameters)
from bsinfer.presets import TABLE8_PUBLISHED
from bsinfer.utils import derive_stream


def small_config(**fields) -> SimConfig:
    settings = {'n': 20, 'p': 3, 'alpha': 0.5, 'hypothesis': {'kind': 'beta_subset', 'indices': [2]},
                'replications': 100, 'seed': 17}
    settings.update(fields)
    return SimConfig(**settings)


class TestSimConfig:
    def test_defaults(self):
        cfg = small_config()
        assert cfg.levels == [0.10, 0.05, 0.01]
        assert cfg.statistics == [Statistic.LR, Statistic.LR_B, Statistic.LR_B_STAR]
        assert cfg.delta == 0.0
        assert isinstance(cfg.hypothesis, BetaSubset)

    def test_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv('BSINFER_SEED', '42')
        cfg = SimConfig(n=20, p=3, alpha=0.5, hypothesis=BetaSubset(indices=[2]))
        assert cfg.seed == 42

    def test_bootstrap_adds_statistic(self):
        cfg = small_config(bootstrap_B=19)
        assert cfg.statistics[-1] is Statistic.LR_BOOT

    @pytest.mark.parametrize('fields', [
        {'n': 3},
        {'hypothesis': {'kind': 'beta_subset', 'indices': [3]}},
        {'hypothesis': {'kind': 'beta_subset', 'indices': []}},
        {'hypothesis': {'kind': 'alpha', 'alpha0': 1.0}},
        {'design': {'kind': 'collinear', 'rho': 0.5}},
        {'design': {'kind': 'collinear', 'rho': 1.0}, 'p': 4},
        {'statistics': ['lr', 'lr_boot']},
        {'replications': 10},
        {'levels': [0.05, 1.5]},
        {'levels': []},
    ])
    def test_invalid(self, fields):
        with pytest.raises(ValidationError):
            small_config(**fields)

    def test_levels_are_deduplicated(self):
        assert small_config(levels=[0.05, 0.05, 0.01]).levels == [0.05, 0.01]


def test_true_parameters():
    beta, alpha = true_parameters(small_config(delta=0.3, hypothesis={'kind': 'beta_subset', 'indices': [1, 2]}))
    np.testing.assert_allclose(beta, [1.0, 0.3, 0.3])
    assert alpha == 0.5

    beta, alpha = true_parameters(small_config(hypothesis=AlphaFixed(alpha0=0.5), delta=0.2))
    np.testing.assert_array_equal(beta, 1.0)
    assert alpha == pytest.approx(0.7)


def test_design_is_seeded():
    cfg = small_config()
    first, second = make_design(cfg, 9), make_design(cfg, 9)
    np.testing.assert_array_equal(first.X, second.X)
    np.testing.assert_array_equal(first.X[:, 0], 1.0)
    assert not np.array_equal(first.X, make_design(cfg, 10).X)


def test_collinear_design():
    X = make_collinear_design(20000, 0.9, derive_stream(1))
    assert X.shape == (20000, 4)
    np.testing.assert_array_equal(X[:, 0], 1.0)
    assert np.corrcoef(X[:, 2], X[:, 3])[0, 1] == pytest.approx(0.9, abs=0.01)

    with pytest.raises(DomainError):
        make_collinear_design(10, 1.0, derive_stream(1))

    cfg = small_config(p=4, design=CollinearDesign(rho=0.5))
    assert make_design(cfg, 3).X.shape == (20, 4)


class TestNullRejection:
    def test_rates(self):
        result = run_null_rejection(small_config())
        assert result.replications_used == 100
        assert result.seed == 17
        assert set(result.rejection_rates) == {(stat, level) for stat in (Statistic.LR, Statistic.LR_B,
                                                                          Statistic.LR_B_STAR)
                                               for level in (0.10, 0.05, 0.01)}

        for key, rate in result.rejection_rates.items():
            assert 0.0 <= rate <= 100.0
            assert rate == pytest.approx(round(rate), abs=1e-9)
            share = rate / 100.0
            assert result.mc_standard_errors[key] == pytest.approx(100.0 * np.sqrt(share * (1 - share) / 100))

        # a larger level never rejects less
        assert result.rejection_rates[(Statistic.LR, 0.10)] >= result.rejection_rates[(Statistic.LR, 0.01)]

    def test_correction_never_rejects_more_when_term_is_positive(self):
        result = run_null_rejection(small_config(statistics=['lr', 'lr_b_2star']))
        rates = result.rejection_rates

        # Bartlett term is positive near alpha = 0.5
        for level in (0.10, 0.05, 0.01):
            assert rates[(Statistic.LR_B_2STAR, level)] <= rates[(Statistic.LR, level)]

    def test_reproducible_and_worker_independent(self):
        serial = run_null_rejection(small_config())
        again = run_null_rejection(small_config())
        pooled = run_null_rejection(small_config(workers=2))
        assert serial.rejection_rates == again.rejection_rates == pooled.rejection_rates

    def test_needs_null(self):
        with pytest.raises(DomainError):
            run_null_rejection(small_config(delta=0.1))

    def test_frame(self):
        frame = run_null_rejection(small_config()).to_frame()
        assert list(frame.columns) == ['statistic', 'level', 'rate', 'mc_se']
        assert len(frame) == 9
        assert set(frame['statistic']) == {'lr', 'lr_b', 'lr_b_star'}


class TestPower:
    def test_power_grows_with_departure(self):
        weak = run_power(small_config(delta=0.1))
        strong = run_power(small_config(delta=3.0))
        assert all(stat is not Statistic.LR for stat, _ in strong.rejection_rates)
        assert strong.rejection_rates[(Statistic.LR_B, 0.05)] > weak.rejection_rates[(Statistic.LR_B, 0.05)]
        assert strong.rejection_rates[(Statistic.LR_B, 0.05)] > 90.0

    def test_needs_coefficient_subset(self):
        with pytest.raises(HypothesisError):
            run_power(small_config(hypothesis=AlphaFixed(alpha0=0.5), delta=0.1))


def test_quantile_discrepancy():
    table = quantile_discrepancy(small_config(), [0.1, 0.5, 0.9])
    assert list(table.columns) == ['probability', 'asymptotic_quantile', 'lr', 'lr_b', 'lr_b_star']
    assert len(table) == 3
    assert np.all(np.diff(table['asymptotic_quantile']) > 0)

    with pytest.raises(DomainError):
        quantile_discrepancy(small_config(), [0.0, 0.5])


@pytest.mark.parametrize('key,published', sorted(TABLE8_PUBLISHED.items()))
def test_normal_true_level(key, published):
    n, gamma = key
    assert 100.0 * normal_true_level(n, gamma) == pytest.approx(published, abs=0.01)


def test_normal_true_level_approaches_nominal():
    assert normal_true_level(5000, 0.05) == pytest.approx(0.05, abs=5e-4)

    with pytest.raises(DomainError):
        normal_true_level(1, 0.05)
