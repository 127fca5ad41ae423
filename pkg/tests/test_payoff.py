import numpy as np
import pytest

from amerbound import instances, payoff


STRIKES = [50.0, 100.0, 150.0]
QUARTERS = [0.25, 0.5, 0.75, 1.0]


def test_discounted_put_values():
    p = payoff.discounted_put(100.0, 0.05)
    assert p(90.0, 0.0) == pytest.approx(10.0)
    assert p(100.0 * np.exp(-0.05), 1.0) == pytest.approx(0.0, abs=1e-12)
    flat = payoff.discounted_put(100.0, 0.0)
    assert flat(80.0, 0.3) == pytest.approx(flat(80.0, 0.9)) == pytest.approx(20.0)


def test_discounted_put_flags_and_errors():
    p = payoff.discounted_put(100.0, 0.05)
    assert p.convex_in_x and p.decreasing_in_t and p.tail_slope == 0.0
    with pytest.raises(payoff.PayoffError):
        payoff.discounted_put(-1.0, 0.05)
    with pytest.raises(payoff.PayoffError):
        payoff.discounted_put(100.0, -0.01)


def test_sampling_check_rejects_false_flags():
    with pytest.raises(payoff.PayoffError):
        payoff.PayoffFunction(lambda x, t: np.sqrt(x), convex_in_x=True)
    with pytest.raises(payoff.PayoffError):
        payoff.PayoffFunction(lambda x, t: t * x, decreasing_in_t=True,
                              tail_slope=1.0)
    with pytest.raises(payoff.PayoffError):
        payoff.PayoffFunction(lambda x, t: x - 50.0)  # goes negative


def test_grid_payoff_sec26_table():
    inst = instances.sec26()
    assert np.allclose(inst.payoff.values,
                       [[130, 115, 100], [80, 65, 50], [30, 15, 0], [0, 0, 0]])


def test_grid_payoff_zero():
    zero = payoff.PayoffFunction(lambda x, t: 0.0)
    g = payoff.grid_payoff(zero, STRIKES, QUARTERS)
    assert np.all(g.values == 0.0)
    assert g.values.shape == (4, 4)


def test_grid_clamps_tiny_negative_values():
    vals = np.array([[1.0, -1e-12], [0.0, 0.0]])
    with pytest.warns(UserWarning):
        g = payoff.AmericanPayoffGrid(vals, [0.0, 50.0], [1.0, 2.0])
    assert g.values[0, 1] == 0.0
    with pytest.raises(payoff.PayoffError):
        payoff.AmericanPayoffGrid([[1.0], [-0.5]], [0.0, 50.0], [1.0])


def test_linearize_matches_nodes_and_interpolates():
    p = payoff.discounted_put(100.0, 0.05, horizon=1.0)
    bar = payoff.linearize(p, [70.0, 90.0, 100.0, 140.0], QUARTERS)
    for x in (0.0, 70.0, 90.0, 100.0, 140.0):
        for t in QUARTERS:
            assert bar(x, t) == pytest.approx(p(x, t), abs=1e-12)
    # within a maturity interval, the earlier maturity's column applies
    assert bar(95.0, 0.3) == pytest.approx(0.5 * (p(90.0, 0.25) + p(100.0, 0.25)))
    # idempotence on knots
    g1 = payoff.grid_payoff(bar, [70.0, 90.0, 100.0, 140.0], QUARTERS)
    g2 = payoff.grid_payoff(p, [70.0, 90.0, 100.0, 140.0], QUARTERS)
    assert np.allclose(g1.values, g2.values, atol=1e-12)


def test_exercise_time_transform_uses_interval_starts():
    p = payoff.discounted_put(100.0, 0.05, horizon=1.0)
    g = payoff.exercise_time_transform(p, STRIKES, QUARTERS)
    assert g.values[1, 0] == pytest.approx(50.0)  # (100 - 50)+ at t = 0+
    for k in range(1, 4):
        start = QUARTERS[k - 1]
        assert g.values[1, k] == pytest.approx(100.0 * np.exp(-0.05 * start) - 50.0)
    # dominates the plain node evaluation for time-decaying payoffs
    plain = payoff.grid_payoff(p, STRIKES, QUARTERS)
    assert np.all(g.values >= plain.values - 1e-12)


def test_exercise_time_transform_requires_decreasing_flag():
    flat = payoff.PayoffFunction(lambda x, t: np.maximum(90.0 - x, 0.0),
                                 convex_in_x=True)
    with pytest.raises(payoff.PayoffError):
        payoff.exercise_time_transform(flat, STRIKES, QUARTERS)


def test_interp_and_subgradient():
    g = payoff.AmericanPayoffGrid([[10.0], [4.0], [1.0]], [0.0, 50.0, 100.0],
                                  [1.0], tail_slopes=[0.5])
    assert g.interp(25.0, 0) == pytest.approx(7.0)
    assert g.interp(120.0, 0) == pytest.approx(1.0 + 0.5 * 20.0)
    assert g.right_subgradient(25.0, 0) == pytest.approx(-6.0 / 50.0)
    assert g.right_subgradient(100.0, 0) == pytest.approx(0.5)
    assert g.growth_rate == pytest.approx(0.5)
