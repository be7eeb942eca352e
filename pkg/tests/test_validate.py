import math

import numpy as np
from scipy import stats

from ropper import validate
from ropper.loss import proper_percentiles


def test_stein_coefficients_small_orders():
    assert validate.stein_coefficients(0) == [(1, 1, 1.0)]
    assert validate.stein_coefficients(1) == [(2, 2, 1.0), (0, 1, 1.0)]
    assert validate.stein_coefficients(2) == [(3, 3, 1.0), (1, 2, 3.0)]


def test_stein_coefficients_reproduce_gaussian_moments():
    # g = 1 leaves only the order-0 term: E v^(h+1) = c * tau^(2 power)
    tau = 1.3
    for h in range(0, 8):
        coefs = [(o, p, c) for o, p, c in validate.stein_coefficients(h) if o == 0]
        expect = stats.norm(scale=tau).moment(h + 1)
        got = sum(c * tau ** (2 * p) for _, p, c in coefs)
        assert math.isclose(got, expect, rel_tol=1e-12, abs_tol=1e-12)


def test_richardson_on_known_function():
    assert abs(validate.richardson_derivative(math.sin, 0.7) - math.cos(0.7)) < 1e-11


def test_brute_force_ties_follow_position():
    assert validate.brute_force_projection([0.5, 0.5, 0.5]).tolist() == [0.25, 0.5, 0.75]
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = rng.integers(0, 3, 5) / 2.0
        assert np.array_equal(validate.brute_force_projection(r), proper_percentiles(r).values)


def test_run_all_passes_and_serializes():
    report = validate.run_all()
    assert report["passed"] and [s["name"] for s in report["suites"]] == list(validate.SUITES)
    assert '"passed": true' in validate.to_json(report)
