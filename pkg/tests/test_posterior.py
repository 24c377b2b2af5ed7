import numpy as np
import pytest

from banditflow.errors import ParameterError
from banditflow.posterior import BetaPosterior, SufficientStats, prior, sample, update


def test_prior_is_uniform():
    p = prior()
    assert p.alpha == 1.0
    assert p.beta == 1.0
    assert p.mean == 0.5


def test_update_shifts_shape_by_counts():
    p = update(SufficientStats(successes=3, failures=2))
    assert p == BetaPosterior(4.0, 3.0)


def test_update_zero_counts_equals_prior():
    assert update(SufficientStats()) == prior()


def test_stats_addition_is_fieldwise():
    total = SufficientStats(2, 5) + SufficientStats(1, 0) + SufficientStats(0, 3)
    assert total == SufficientStats(3, 8)
    assert total.trials == 11


def test_update_commutes_with_merging():
    rng = np.random.default_rng(42)
    for _ in range(50):
        parts = [
            SufficientStats(int(rng.integers(0, 20)), int(rng.integers(0, 20)))
            for _ in range(4)
        ]
        merged = parts[0] + parts[1] + parts[2] + parts[3]
        reordered = parts[3] + parts[1] + parts[0] + parts[2]
        assert update(merged) == update(reordered)


def test_negative_counts_rejected():
    with pytest.raises(ParameterError):
        SufficientStats(-1, 0)
    with pytest.raises(ParameterError):
        SufficientStats(0, -3)


def test_nonpositive_shapes_rejected():
    with pytest.raises(ParameterError):
        BetaPosterior(0.0, 1.0)
    with pytest.raises(ParameterError):
        BetaPosterior(1.0, -2.0)


def test_mean_and_variance_formulas():
    p = BetaPosterior(4.0, 6.0)
    assert p.mean == pytest.approx(0.4)
    assert p.variance == pytest.approx(4 * 6 / (10 * 10 * 11))


def test_sample_in_unit_interval_and_deterministic():
    p = BetaPosterior(2.0, 5.0)
    draws = [sample(p, np.random.default_rng(7)) for _ in range(10)]
    assert all(0.0 <= d <= 1.0 for d in draws)
    # same generator state, same draw
    assert len(set(draws)) == 1
    rng = np.random.default_rng(7)
    stream = [sample(p, rng) for _ in range(10)]
    assert len(set(stream)) == 10


def test_sample_mean_tracks_posterior_mean():
    p = BetaPosterior(30.0, 70.0)
    rng = np.random.default_rng(123)
    draws = [sample(p, rng) for _ in range(4000)]
    assert abs(np.mean(draws) - p.mean) < 0.01
