"""Tests for log-domain special functions, entropies, and quadrature."""

import math

import numpy as np
import pytest

from lcqkd.errors import QuadratureError, ValidationError
from lcqkd.numerics import (
    BESSEL_SWITCH,
    KUMMER_SWITCH,
    LogScaledValue,
    ProbabilityDistribution,
    binary_entropy,
    integrate_1d,
    log_bessel_i0,
    log_kummer_1f1,
    shannon_entropy,
)

from oracles import log_1f1_mpmath, log_i0_mpmath, log_i0_series

# ln I0(x) from the 200-term arbitrary-precision series (oracles.log_i0_series),
# spanning the series regime, both sides of the x=50 switch, and beyond.
LOG_I0_REFERENCE = {
    0.5: 6.154971918548131e-02,
    1.0: 2.359143585071787e-01,
    5.0: 3.304681775822533e00,
    10.0: 7.942972083118695e00,
    25.0: 2.247672800499925e01,
    49.99: 4.711767602230251e01,
    50.0: 4.712757550187180e01,
    50.01: 4.713747500164737e01,
    60.0: 5.703599018965514e01,
    100.0: 9.677973268994258e01,
    200.0: 1.964325293542235e02,
}

# ln I0(x) for arguments far beyond series reach (oracles.log_i0_mpmath).
LOG_I0_LARGE_REFERENCE = {
    1e3: 9.956273088898695e02,
    1e5: 9.999332459998432e04,
    3e5: 2.999927752930066e05,
}

# ln 1F1(a, b, z) via mpmath (oracles.log_1f1_mpmath), spanning the z=100
# switch and the half-integer parameter family used by the Eve kernels.
LOG_1F1_REFERENCE = {
    (1.0, 1.5, 1.0): 7.080744471237138e-01,
    (0.5, 0.5, 2.0): 2.000000000000000e00,
    (1.5, 0.5, 50.0): 5.461512051684126e01,
    (2.5, 1.5, 99.99): 1.042044951633526e02,
    (2.5, 1.5, 100.0): 1.042145936903737e02,
    (2.5, 1.5, 100.01): 1.042246922076882e02,
    (7.5, 0.5, 150.0): 1.784039283525545e02,
    (0.5, 1.5, 300.0): 2.936047440136854e02,
    (4.0, 1.5, 1000.0): 1.015364329673483e03,
    (1.0, 0.5, 25.0): 2.718180285535883e01,
    (15.5, 1.5, 218.0): 2.676030931174373e02,
}

H2_011 = 0.499915958164528  # binary entropy at p=0.11, 60-digit evaluation


class TestLogScaledValue:
    def test_round_trip(self):
        for value in [1.0, -2.5, 1e-300, 3.7e250, -8e-12]:
            assert LogScaledValue.from_float(value).to_float() == pytest.approx(
                value, rel=1e-12
            )

    def test_zero(self):
        zero = LogScaledValue.from_float(0.0)
        assert zero.sign == 0
        assert zero.to_float() == 0.0
        assert math.isinf(zero.log_magnitude)

    def test_product_adds_logs(self):
        a = LogScaledValue.from_float(3.0)
        b = LogScaledValue.from_float(-4.0)
        assert (a * b).to_float() == pytest.approx(-12.0, rel=1e-12)

    def test_invalid_sign_rejected(self):
        with pytest.raises(ValidationError):
            LogScaledValue(log_magnitude=0.0, sign=2)


class TestProbabilityDistribution:
    def test_accepts_valid(self):
        dist = ProbabilityDistribution(np.array([0.25, 0.25, 0.5]))
        assert len(dist) == 3

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            ProbabilityDistribution(np.array([0.6, -0.1, 0.5]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValidationError):
            ProbabilityDistribution(np.array([0.5, 0.4]))

    def test_sum_tolerance_is_tight(self):
        ProbabilityDistribution(np.array([0.5, 0.5 + 5e-10]))
        with pytest.raises(ValidationError):
            ProbabilityDistribution(np.array([0.5, 0.5 + 5e-9]))


class TestBinaryEntropy:
    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_reference_point(self):
        assert binary_entropy(0.11) == pytest.approx(H2_011, abs=1e-12)

    def test_symmetry(self):
        for p in np.linspace(0.0, 1.0, 41):
            assert binary_entropy(p) == pytest.approx(binary_entropy(1.0 - p), abs=1e-14)

    def test_domain_errors(self):
        for bad in [-0.1, 1.1, math.nan]:
            with pytest.raises(ValidationError):
                binary_entropy(bad)


class TestShannonEntropy:
    def test_uniform(self):
        assert shannon_entropy(np.full(4, 0.25)) == pytest.approx(2.0, abs=1e-12)

    def test_pure(self):
        assert shannon_entropy(np.array([1.0, 0.0])) == 0.0

    def test_hand_value(self):
        assert shannon_entropy(np.array([0.5, 0.25, 0.25])) == pytest.approx(
            1.5, abs=1e-12
        )

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        w = rng.random(9)
        w /= w.sum()
        base = shannon_entropy(w)
        for _ in range(5):
            assert shannon_entropy(rng.permutation(w)) == pytest.approx(base, abs=1e-12)

    def test_bounded_by_log_support(self):
        rng = np.random.default_rng(11)
        for n in [2, 5, 17]:
            w = rng.random(n)
            w /= w.sum()
            assert 0.0 <= shannon_entropy(w) <= math.log2(n) + 1e-12

    def test_accepts_distribution_type(self):
        dist = ProbabilityDistribution(np.full(8, 0.125))
        assert shannon_entropy(dist) == pytest.approx(3.0, abs=1e-12)

    def test_rejects_invalid(self):
        with pytest.raises(ValidationError):
            shannon_entropy(np.array([0.7, 0.7]))
        with pytest.raises(ValidationError):
            shannon_entropy(np.array([1.2, -0.2]))


class TestLogBesselI0:
    def test_at_zero(self):
        assert float(log_bessel_i0(0.0)) == 0.0

    def test_at_one(self):
        # I0(1) = 1.26606587775200833...
        assert float(log_bessel_i0(1.0)) == pytest.approx(
            math.log(1.26606587775200833), rel=1e-12
        )

    def test_against_series_oracle(self):
        for x, ref in LOG_I0_REFERENCE.items():
            assert float(log_bessel_i0(x)) == pytest.approx(ref, rel=1e-9), x

    def test_large_arguments(self):
        for x, ref in LOG_I0_LARGE_REFERENCE.items():
            assert float(log_bessel_i0(x)) == pytest.approx(ref, rel=1e-12), x

    def test_switch_continuity(self):
        # both branches must sit on the true function at the hand-off, so the
        # values straddling the switch are each checked against the oracle
        # (a naive two-point difference would only measure the slope of ln I0)
        for x in [BESSEL_SWITCH * (1.0 - 1e-9), BESSEL_SWITCH, BESSEL_SWITCH * (1.0 + 1e-9)]:
            assert float(log_bessel_i0(x)) == pytest.approx(log_i0_series(x), rel=1e-9)

    def test_array_input(self):
        xs = np.array([0.0, 1.0, 50.0, 100.0])
        out = log_bessel_i0(xs)
        assert out.shape == xs.shape
        assert out[0] == 0.0
        assert out[3] == pytest.approx(LOG_I0_REFERENCE[100.0], rel=1e-9)

    def test_fresh_series_comparison(self):
        # recompute (not frozen) on a random grid crossing the switch
        rng = np.random.default_rng(3)
        for x in rng.uniform(0.1, 120.0, 12):
            assert float(log_bessel_i0(x)) == pytest.approx(
                log_i0_series(float(x)), rel=1e-9
            )


class TestLogKummer1F1:
    def test_empty_series(self):
        assert float(log_kummer_1f1(2.0, 1.5, 0.0)) == 0.0

    def test_exponential_identity(self):
        assert float(log_kummer_1f1(1.0, 1.0, 3.0)) == pytest.approx(3.0, rel=1e-12)

    def test_against_oracle(self):
        for (a, b, z), ref in LOG_1F1_REFERENCE.items():
            assert float(log_kummer_1f1(a, b, z)) == pytest.approx(ref, rel=1e-9), (a, b, z)

    def test_switch_continuity(self):
        for z in [KUMMER_SWITCH * (1.0 - 1e-9), KUMMER_SWITCH, KUMMER_SWITCH * (1.0 + 1e-9)]:
            assert float(log_kummer_1f1(2.5, 1.5, z)) == pytest.approx(
                log_1f1_mpmath(2.5, 1.5, z), rel=1e-9
            )

    def test_monotone_in_z(self):
        zs = np.linspace(0.0, 250.0, 60)
        vals = [float(log_kummer_1f1(1.5, 0.5, z)) for z in zs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            log_kummer_1f1(1.0, 0.0, 1.0)
        with pytest.raises(ValidationError):
            log_kummer_1f1(-1.0, 1.5, 1.0)
        with pytest.raises(ValidationError):
            log_kummer_1f1(1.0, 1.5, -0.5)

    def test_fresh_oracle_comparison(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = rng.uniform(0.5, 12.0)
            b = rng.choice([0.5, 1.5])
            z = rng.uniform(0.0, 400.0)
            assert float(log_kummer_1f1(a, b, z)) == pytest.approx(
                log_1f1_mpmath(a, float(b), z), rel=1e-9
            )


class TestIntegrate1D:
    # (integrand, lower, upper, exact value)
    ANALYTIC_SUITE = [
        (lambda x: math.exp(-x), 0.0, math.inf, 1.0),
        (lambda x: 4.0 / (1.0 + x * x), 0.0, 1.0, math.pi),
        (lambda x: x * x, 0.0, 1.0, 1.0 / 3.0),
        (lambda x: x * math.exp(-x * x), 0.0, math.inf, 0.5),
        (lambda x: math.exp(-0.5 * x * x), 0.0, math.inf, math.sqrt(math.pi / 2.0)),
        (lambda x: x * x * math.exp(-x), 0.0, math.inf, 2.0),
        (lambda x: math.sin(x), 0.0, math.pi, 2.0),
        (lambda x: 1.0 / math.sqrt(x) if x > 0 else 0.0, 0.0, 1.0, 2.0),
        (lambda x: 1.0 / (1.0 + x * x), 0.0, math.inf, math.pi / 2.0),
        (lambda x: 1.0 / (x * x), 1.0, math.inf, 1.0),
    ]

    def test_analytic_suite(self):
        for f, lo, hi, exact in self.ANALYTIC_SUITE:
            assert integrate_1d(f, lo, hi, tol=1e-9) == pytest.approx(
                exact, rel=1e-8, abs=1e-9
            )

    def test_bessel_integral_closed_form(self):
        from scipy.special import i0e

        # int_0^inf x exp(-x^2) I0(x) dx = exp(1/4)/2
        val = integrate_1d(
            lambda x: x * math.exp(-x * x + x) * i0e(x), 0.0, math.inf
        )
        assert val == pytest.approx(0.642012708343871, rel=1e-9)

    def test_bessel_integral_monte_carlo(self):
        # I0(x) = (1/2pi) int exp(x cos phi) dphi; sampling x ~ Rayleigh
        # (density 2x exp(-x^2)) and phi uniform gives the estimator
        # 0.5 * mean(exp(x cos phi)).
        from scipy.special import i0e

        val = integrate_1d(lambda x: x * math.exp(-x * x + x) * i0e(x), 0.0, math.inf)
        rng = np.random.default_rng(2026)
        n = 400_000
        x = rng.rayleigh(scale=math.sqrt(0.5), size=n)
        phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
        draws = 0.5 * np.exp(x * np.cos(phi))
        estimate = draws.mean()
        sigma = draws.std(ddof=1) / math.sqrt(n)
        assert abs(val - estimate) < 3.0 * sigma

    def test_invalid_bounds(self):
        with pytest.raises(ValidationError):
            integrate_1d(lambda x: x, 1.0, 1.0)
        with pytest.raises(ValidationError):
            integrate_1d(lambda x: x, 2.0, 1.0)
        with pytest.raises(ValidationError):
            integrate_1d(lambda x: x, math.inf, math.inf)

    def test_invalid_tol(self):
        with pytest.raises(ValidationError):
            integrate_1d(lambda x: x, 0.0, 1.0, tol=0.0)

    def test_nonconvergent_raises(self):
        with pytest.raises(QuadratureError):
            integrate_1d(lambda x: 1.0 / x if x > 0 else 0.0, 0.0, 1.0)
