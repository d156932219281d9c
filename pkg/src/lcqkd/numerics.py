"""Log-domain scalar building blocks shared by the rate calculations.

Intensities in a gain-compensated line reach 1e5..1e6 photons, so raw
Gaussian/Bessel factors like exp(|gamma|^2) overflow float64 by hundreds of
orders of magnitude.  Everything downstream therefore assembles integrands
from *logarithms* (ln I0, ln 1F1, log-sum-exp) and exponentiates only after
subtracting the running maximum.  This module provides those primitives plus
the entropy helpers used by the information-theoretic bounds.

Conventions
-----------
* Entropies are in bits (base-2 logarithms).
* ``log_bessel_i0`` and ``log_kummer_1f1`` switch from a power series to an
  asymptotic expansion at ``x = 50`` and ``z = 100`` respectively; the
  asymptotic branch sums its series to convergence so the two branches agree
  to better than 1e-9 across the switch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf, erfc, gammaln, logsumexp

from .errors import QuadratureError, ValidationError

__all__ = [
    "LogScaledValue",
    "ProbabilityDistribution",
    "binary_entropy",
    "shannon_entropy",
    "erf_difference",
    "log_bessel_i0",
    "log_kummer_1f1",
    "integrate_1d",
]

# Series/asymptotic hand-off points.  Below these the power series converges
# quickly; above them the asymptotic series reaches float precision.
BESSEL_SWITCH = 50.0
KUMMER_SWITCH = 100.0

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class LogScaledValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    Used wherever a probability amplitude or weight would overflow or
    underflow float64.  ``sign`` is -1, 0 or +1; a zero value carries
    ``log_magnitude = -inf``.
    """

    log_magnitude: float
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValidationError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.sign == 0 and self.log_magnitude != -math.inf:
            raise ValidationError("zero value must carry log_magnitude = -inf")

    @classmethod
    def from_float(cls, x: float) -> "LogScaledValue":
        x = float(x)
        if math.isnan(x):
            raise ValidationError("cannot represent NaN")
        if x == 0.0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self) -> float:
        return self.to_float()

    def __mul__(self, other: "LogScaledValue") -> "LogScaledValue":
        sign = self.sign * other.sign
        if sign == 0:
            return LogScaledValue(-math.inf, 0)
        return LogScaledValue(self.log_magnitude + other.log_magnitude, sign)


@dataclass(frozen=True)
class ProbabilityDistribution:
    """A validated finite probability distribution.

    Weights must lie in [0, 1] and sum to one within ``PROB_SUM_TOL``.
    The stored array is a read-only copy.
    """

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a non-empty 1-D array")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if np.any(w < -PROB_SUM_TOL) or np.any(w > 1.0 + PROB_SUM_TOL):
            raise ValidationError("weights must lie in [0, 1]")
        total = float(w.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"weights must sum to 1, got {total!r}")
        w = np.clip(w, 0.0, 1.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy h2(p) in bits.

    Parameters
    ----------
    p : float
        A probability; must lie in [0, 1].

    Returns
    -------
    float
        ``-p log2 p - (1-p) log2 (1-p)``, with the 0 log 0 = 0 convention.
    """
    p = float(p)
    if math.isnan(p) or p < 0.0 or p > 1.0:
        raise ValidationError(f"binary_entropy requires p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    q = 1.0 - p
    return -(p * math.log2(p) + q * math.log2(q))


def shannon_entropy(weights, *, sum_tol: float = PROB_SUM_TOL) -> float:
    """Shannon entropy of a finite distribution, in bits.

    Zero weights contribute nothing.  Raises ``ValidationError`` on negative
    weights or when the weights do not sum to one within ``sum_tol``; the sum
    is renormalized exactly before the entropy is accumulated so that a
    within-tolerance drift does not bias the result.
    """
    if isinstance(weights, ProbabilityDistribution):
        w = np.asarray(weights.weights, dtype=float)
    else:
        w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty 1-D array")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < -sum_tol):
        raise ValidationError("weights must be non-negative")
    total = float(w.sum())
    if abs(total - 1.0) > sum_tol:
        raise ValidationError(f"weights must sum to 1 within {sum_tol}, got {total!r}")
    w = np.clip(w, 0.0, None) / total
    nz = w[w > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def erf_difference(lower_arg, upper_arg):
    """(erf(upper) - erf(lower)) / 2 without cancellation in the tails.

    When both arguments sit on the same side of zero, erf(b) - erf(a) is a
    difference of values near +-1 and the direct form loses the result to
    rounding; rewriting through erfc keeps tail probabilities down to the
    underflow limit.  Arguments may be scalars or arrays.
    """
    a = np.asarray(lower_arg, dtype=float)
    b = np.asarray(upper_arg, dtype=float)
    direct = 0.5 * (erf(b) - erf(a))
    with np.errstate(invalid="ignore"):
        both_pos = 0.5 * (erfc(a) - erfc(b))
        both_neg = 0.5 * (erfc(-b) - erfc(-a))
    out = np.where(a >= 0.0, both_pos, np.where(b <= 0.0, both_neg, direct))
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def _i0_series_log(x: np.ndarray) -> np.ndarray:
    # Direct summation of sum_k (x^2/4)^k / (k!)^2; safe up to the switch
    # point (I0(50) ~ 3e20, far from overflow).
    x2 = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 200):
        term = term * x2 / (k * k)
        total += term
        if np.all(term <= 1e-18 * total):
            break
    return np.log(total)


def _i0_asymptotic_log(x: np.ndarray) -> np.ndarray:
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k x^-k with
    # a_k = ((2k-1)!!)^2 / (k! 8^k).  The series is summed until terms stop
    # shrinking (it is asymptotic, not convergent), which beats 1e-12
    # relative for x >= 50.
    inv = 1.0 / x
    coef = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    for k in range(1, 25):
        coef = coef * ((2 * k - 1) ** 2) / (8.0 * k) * inv
        mag = np.abs(coef)
        if np.all(mag >= prev):
            break
        total += coef
        if np.all(mag <= 1e-18 * np.abs(total)):
            break
        prev = mag
    return x - 0.5 * np.log(2.0 * math.pi * x) + np.log(total)


def log_bessel_i0(x):
    """``ln I0(x)`` for the modified Bessel function of order zero.

    Accepts scalars or numpy arrays; I0 is even, so the absolute value of the
    argument is used.  Power series below ``BESSEL_SWITCH``, asymptotic
    expansion above; the branches agree to ~1e-12 at the switch.
    """
    arr = np.abs(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValidationError("log_bessel_i0 requires finite arguments")
    out = np.empty_like(arr)
    small = arr < BESSEL_SWITCH
    if np.any(small):
        out[small] = _i0_series_log(arr[small])
    if np.any(~small):
        out[~small] = _i0_asymptotic_log(arr[~small])
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def _kummer_series_log(a: float, b: float, z: float) -> float:
    # Log-sum-exp over term logs: ln t_k = ln (a)_k - ln (b)_k + k ln z - ln k!.
    # All terms are positive for a, b, z > 0, so this is exact to float
    # precision and immune to overflow at any z.
    if z == 0.0:
        return 0.0
    peak = z + max(a - b, 0.0)
    nterms = int(peak + 12.0 * math.sqrt(peak + 4.0)) + 60
    k = np.arange(nterms, dtype=float)
    logt = (
        gammaln(a + k)
        - gammaln(a)
        - gammaln(b + k)
        + gammaln(b)
        + k * math.log(z)
        - gammaln(k + 1.0)
    )
    return float(logsumexp(logt))


def _kummer_asymptotic_log(a: float, b: float, z: float) -> float | None:
    # 1F1(a,b,z) ~ Gamma(b)/Gamma(a) e^z z^(a-b) sum_k (b-a)_k (1-a)_k / (k! z^k).
    # When a (or a-b) is a non-negative integer the sum truncates and is exact
    # up to an exponentially small reflection term.  Returns None when the
    # series neither converges nor truncates, signalling a series fallback.
    total = 1.0
    term = 1.0
    prev = math.inf
    converged = False
    for k in range(400):
        term *= (b - a + k) * (1.0 - a + k) / ((k + 1.0) * z)
        if term == 0.0:
            converged = True
            break
        if abs(term) >= prev:
            break
        total += term
        prev = abs(term)
        if abs(term) <= 1e-17 * abs(total):
            converged = True
            break
    if not converged or total <= 0.0:
        return None
    return gammaln(b) - gammaln(a) + z + (a - b) * math.log(z) + math.log(total)


def log_kummer_1f1(a: float, b: float, z: float) -> float:
    """``ln 1F1(a; b; z)`` for the confluent hypergeometric function.

    Parameters
    ----------
    a, b : float
        Numerator and denominator parameters; both must be positive.
    z : float
        Argument; must be non-negative.

    Returns
    -------
    float
        The natural log of Kummer's function, computed by a log-domain power
        series below ``KUMMER_SWITCH`` and by the large-argument expansion
        above it (falling back to the series whenever that expansion fails to
        converge for the given parameters).
    """
    a, b, z = float(a), float(b), float(z)
    if not (a > 0.0 and b > 0.0):
        raise ValidationError(f"log_kummer_1f1 requires a, b > 0, got a={a!r}, b={b!r}")
    if not z >= 0.0:
        raise ValidationError(f"log_kummer_1f1 requires z >= 0, got {z!r}")
    if z < KUMMER_SWITCH:
        return _kummer_series_log(a, b, z)
    result = _kummer_asymptotic_log(a, b, z)
    if result is None:
        return _kummer_series_log(a, b, z)
    return result


def integrate_1d(func, lower: float, upper: float, *, tol: float = 1e-9) -> float:
    """Adaptive quadrature of ``func`` over ``[lower, upper]``.

    ``upper = math.inf`` is supported through the substitution
    ``x = lower + t/(1-t)``, which maps the half line onto [0, 1).  The
    result is accepted when the reported error estimate satisfies
    ``err <= max(tol * |value|, tol)`` (relative, with an absolute fallback
    near zero); otherwise ``QuadratureError`` is raised.

    Parameters
    ----------
    func : callable
        Scalar integrand.
    lower, upper : float
        Integration bounds, ``lower < upper``; only the upper bound may be
        infinite.
    tol : float
        Target accuracy.
    """
    lower = float(lower)
    upper = float(upper)
    if math.isnan(lower) or math.isnan(upper) or math.isinf(lower):
        raise ValidationError("lower bound must be finite")
    if not lower < upper:
        raise ValidationError(f"require lower < upper, got [{lower!r}, {upper!r}]")
    if not tol > 0.0:
        raise ValidationError(f"tol must be positive, got {tol!r}")

    if math.isinf(upper):
        def transformed(t: float) -> float:
            u = 1.0 - t
            return func(lower + t / u) / (u * u)

        lo, hi = 0.0, 1.0
        target = transformed
    else:
        lo, hi = lower, upper
        target = func

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, err = integrate.quad(target, lo, hi, epsabs=tol, epsrel=tol, limit=200)
        if err > max(tol * abs(value), tol):
            value, err = integrate.quad(
                target, lo, hi, epsabs=tol, epsrel=tol, limit=800
            )
    if not math.isfinite(value) or err > max(tol * abs(value), tol):
        raise QuadratureError(
            f"quadrature did not converge: value={value!r}, err={err!r}, tol={tol!r}"
        )
    return value
