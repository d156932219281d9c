"""Photon-number encoding: Bob's count statistics, Eve's leaked state, key rate.

Alice sends phase-randomized coherent pulses with mean photon number mu0 or
mu1.  The line amplifies and attenuates the pulse and leaks a fraction r_E of
the intensity to Eve at a known position.  Bob photon-counts and keeps a round
only when the count falls in one of two acceptance windows around the two
signal levels.  Everything downstream is classical:

* the field reaching Bob is a phase-randomized displaced thermal state, so
  Bob's count distribution is a Rician intensity mixture of Poissonians;
* the state Eve holds, conditioned on Alice's bit and on Bob's round being
  conclusive, is diagonal in the Fock basis, so the Holevo quantity reduces
  to Shannon entropies of photon-number distributions.

Two independent routes compute Eve's diagonal.  The direct route does nested
log-space quadrature over the leak-point and receiver intensities.  The kernel
route replaces the two Bessel functions with their large-argument expansion,
which collapses the inner integral into confluent-hypergeometric kernels; it
is only trusted when both Bessel arguments stay above ``BESSEL_SWITCH`` over
the whole integration region, and ``method="auto"`` enforces that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sp

from .channels import EffectiveLine
from .errors import TruncationError, ValidationError
from .numerics import (
    BESSEL_SWITCH,
    ProbabilityDistribution,
    erf_difference,
    log_kummer_1f1,
    shannon_entropy,
)
from .rates import (
    ConditionalProbabilities,
    KeyRateBreakdown,
    conclusive_mutual_information,
)

__all__ = [
    "PhotonNumberEncoding",
    "FockDiagonal",
    "EveIntegralKernel",
    "ConditionalProbabilities",
    "KeyRateBreakdown",
    "window_overlap",
    "bob_conditional_probs",
    "eve_conditional_state",
    "holevo_bound",
    "key_rate",
]

# Mean photon number above which the Gaussian (erf) window approximation
# replaces exact Poisson tail sums.
ERF_WINDOW_MEAN = 1000.0
# Below this excess gain an amplifier stage is treated as exactly noiseless.
SMALL_GAIN_TOL = 1e-6
# Total added intensity noise below this collapses Bob's distribution to a
# point mass at the transmitted intensity.
NOISE_DELTA_TOL = 1e-9
# Allowed Fock-tail mass outside the truncation.
TAIL_MASS_BOUND = 1e-9
_FOCK_CAP = 200_000
# Largest Fock cutoff for which the kernel expansion is worth running; its
# scalar 1F1 series cost grows with the cutoff while the direct quadrature
# stays vectorized, and both agree to ~1e-10 in the overlap.
_KERNEL_FOCK_CAP = 64


@dataclass(frozen=True, slots=True)
class PhotonNumberEncoding:
    """Signal levels and post-selection thresholds for the counting scheme.

    ``mu0`` and ``mu1`` are the two mean photon numbers.  Bob accepts a count
    k as bit 0 when mu - theta3 <= k <= mu - theta1 and as bit 1 when
    mu + theta2 < k <= mu + theta4, with mu the midpoint of the two levels.
    The lower edge of the upper window is exclusive so the two acceptance
    operators stay orthogonal when theta1 = theta2 = 0.
    """

    mu0: float
    mu1: float
    theta1: float
    theta2: float
    theta3: float
    theta4: float

    def __post_init__(self) -> None:
        values = [self.mu0, self.mu1, self.theta1, self.theta2, self.theta3, self.theta4]
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("encoding parameters must be finite")
        if self.mu0 <= 0.0 or self.mu1 <= 0.0:
            raise ValidationError("mean photon numbers must be positive")
        if self.mu0 == self.mu1:
            raise ValidationError("signal levels must differ")
        if not 0.0 <= self.theta1 <= self.theta3:
            raise ValidationError("need 0 <= theta1 <= theta3")
        if not 0.0 <= self.theta2 <= self.theta4:
            raise ValidationError("need 0 <= theta2 <= theta4")
        if self.mu_mid - self.theta3 < 0.0:
            raise ValidationError("lower window extends below zero counts")

    @property
    def mu_mid(self) -> float:
        return 0.5 * (self.mu0 + self.mu1)

    def mean_photons(self, a: int) -> float:
        return self.mu0 if a == 0 else self.mu1

    def gamma(self, a: int) -> float:
        """Field amplitude for bit ``a``; the global phase is randomized away."""
        return math.sqrt(self.mean_photons(a))

    def window(self, b: int) -> tuple[float, float]:
        """Count window (lo, hi) assigned to outcome bit ``b``."""
        mu = self.mu_mid
        if b == 0:
            return (mu - self.theta3, mu - self.theta1)
        return (mu + self.theta2, mu + self.theta4)

    @property
    def uses_erf_windows(self) -> bool:
        return self.mu_mid >= ERF_WINDOW_MEAN


@dataclass(frozen=True, slots=True)
class FockDiagonal:
    """Photon-number distribution of a state diagonal in the Fock basis."""

    probs: ProbabilityDistribution
    truncation: int

    def __post_init__(self) -> None:
        if self.truncation < 0:
            raise ValidationError("truncation must be non-negative")
        if len(self.probs.weights) != self.truncation + 1:
            raise ValidationError(
                "probs must cover n = 0..truncation "
                f"({len(self.probs.weights)} weights for N={self.truncation})"
            )

    @property
    def mean_photons(self) -> float:
        w = self.probs.weights
        return float(np.dot(np.arange(w.size), w))


# ---------------------------------------------------------------------------
# quadrature scaffolding


@lru_cache(maxsize=8)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _segment_breaks(lo, hi, features, base_segments):
    """Breakpoints for a composite rule: a uniform backbone plus local
    refinement zones around each (center, scale, half_width, step) feature.

    Features whose step would be coarser than the backbone are skipped, so
    broad structure costs nothing extra.
    """
    span = hi - lo
    base_step = span / base_segments
    pts = [np.linspace(lo, hi, base_segments + 1)]
    for center, scale, half_width, step_mult in features:
        if not (math.isfinite(center) and math.isfinite(scale)) or scale <= 0.0:
            continue
        step = step_mult * scale
        if step >= base_step:
            continue
        zlo = max(lo, center - half_width * scale)
        zhi = min(hi, center + half_width * scale)
        if zhi <= zlo:
            continue
        n = min(int(math.ceil((zhi - zlo) / step)), 64)
        pts.append(np.linspace(zlo, zhi, n + 1))
    arr = np.unique(np.concatenate(pts))
    keep = np.concatenate([[True], np.diff(arr) > span * 1e-12])
    return arr[keep]


def _composite_gl(breaks, order=12):
    x, w = _leggauss(order)
    half = 0.5 * np.diff(breaks)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    return nodes, wts


def _log_i0(x):
    # exponentially scaled Bessel keeps this finite for any argument
    return np.log(sp.i0e(x)) + np.abs(x)


# ---------------------------------------------------------------------------
# Bob's side


def window_overlap(intensity, lo, hi, *, use_erf, open_lower=False):
    """Probability that a Poisson count at the given intensity lands in
    [lo, hi] (in (lo, hi] when ``open_lower``).

    With ``use_erf`` the Poisson tail sums are replaced by the Gaussian
    approximation 0.5 erf((t-lo)/sqrt(2t)) - 0.5 erf((t-hi)/sqrt(2t)),
    adequate once the window sits at hundreds of counts; there the open/closed
    distinction is immaterial and is ignored.
    """
    if hi < lo:
        raise ValidationError("window upper bound below lower bound")
    t = np.asarray(intensity, dtype=float)
    if np.any(t < 0.0):
        raise ValidationError("intensity must be non-negative")
    if use_erf:
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.sqrt(2.0 * t)
            val = erf_difference((t - hi) / root, (t - lo) / root)
        val = np.where(t == 0.0, 1.0 if lo <= 0.0 else 0.0, val)
        return np.clip(val, 0.0, 1.0)
    k_lo = math.floor(lo) + 1 if open_lower else math.ceil(lo)
    k_lo = max(k_lo, 0)
    k_hi = math.floor(hi)
    if k_hi < k_lo:
        return np.zeros_like(t)
    val = sp.gammaincc(k_hi + 1.0, t)
    if k_lo >= 1:
        val = val - sp.gammaincc(float(k_lo), t)
    return np.clip(val, 0.0, 1.0)


def _line_coefficients(line: EffectiveLine):
    r = line.leak_fraction
    s1 = line.pre_eve.gain - 1.0
    s2 = line.post_eve.gain - 1.0
    eta1 = line.pre_eve.eta
    eta2 = line.post_eve.eta
    return r, s1, s2, eta1, eta2


def _rician_window_prob(c2, delta, lo, hi, use_erf, open_lower):
    """Mean of the window function over intensity Rician(center c2, noise delta)."""
    if hi <= lo:
        return 0.0
    if delta <= NOISE_DELTA_TOL:
        return float(window_overlap(c2, lo, hi, use_erf=use_erf, open_lower=open_lower))
    sigma = math.sqrt(delta * (2.0 * c2 + delta))
    dom_lo = max(0.0, lo - 10.0 * math.sqrt(lo + 1.0))
    dom_hi = hi + 10.0 * math.sqrt(hi + 1.0)
    features = [
        (lo, math.sqrt(2.0 * (lo + 1.0)), 5.0, 1.3),
        (hi, math.sqrt(2.0 * (hi + 1.0)), 5.0, 1.3),
        (c2, sigma, 10.0, 1.2),
    ]
    breaks = _segment_breaks(dom_lo, dom_hi, features, base_segments=12)
    t, wts = _composite_gl(breaks)
    log_dens = -(t + c2) / delta + _log_i0(2.0 * np.sqrt(c2 * t) / delta) - math.log(delta)
    f = window_overlap(t, lo, hi, use_erf=use_erf, open_lower=open_lower)
    value = float(np.dot(wts, np.exp(log_dens) * f))
    return min(max(value, 0.0), 1.0)


def bob_conditional_probs(
    enc: PhotonNumberEncoding, line: EffectiveLine
) -> ConditionalProbabilities:
    """Bob's conclusive outcome table p(b|a) for the counting scheme.

    The intensity seen by Bob when Alice sent bit a is Rician: signal
    (1-r_E) eta1 eta2 mu_a plus amplifier noise (1-r_E) eta2 (G1-1) + (G2-1).
    Each entry is a single radial quadrature of that density against the
    acceptance window.
    """
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    amp2 = (1.0 - r) * eta1 * eta2
    delta = (1.0 - r) * eta2 * s1 + s2
    use_erf = enc.uses_erf_windows
    table = np.empty((2, 2))
    for a in (0, 1):
        c2 = amp2 * enc.mean_photons(a)
        for b in (0, 1):
            lo, hi = enc.window(b)
            table[a, b] = _rician_window_prob(c2, delta, lo, hi, use_erf, b == 1)
    return ConditionalProbabilities(table=table)


# ---------------------------------------------------------------------------
# Eve's side


def _fock_truncation(lam_mean: float, lam_hi: float) -> int:
    """Smallest power-of-two escalation of mean + 12 sqrt(mean) whose Poisson
    envelope tail at the largest retained intensity is below the tail bound."""
    n = max(8, int(math.ceil(lam_mean + 12.0 * math.sqrt(max(lam_mean, 0.0)))))
    while sp.gammainc(n + 1.0, lam_hi) >= TAIL_MASS_BOUND:
        n *= 2
        if n > _FOCK_CAP:
            raise TruncationError(
                f"Fock truncation exceeds {_FOCK_CAP} at leak intensity {lam_hi!r}"
            )
    return n


def _log_poisson_matrix(lam: np.ndarray, n_max: int) -> np.ndarray:
    nn = np.arange(n_max + 1, dtype=float)[None, :]
    lam_col = lam[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = nn * np.log(lam_col) - lam_col - sp.gammaln(nn + 1.0)
    zero = lam <= 0.0
    if np.any(zero):
        out[zero] = np.where(nn[0] == 0.0, 0.0, -np.inf)
    return out


def _window_domains(enc: PhotonNumberEncoding):
    domains = []
    for b in (0, 1):
        lo, hi = enc.window(b)
        if hi <= lo:
            continue
        dom_lo = max(0.0, lo - 10.0 * math.sqrt(lo + 1.0))
        dom_hi = hi + 10.0 * math.sqrt(hi + 1.0)
        domains.append((dom_lo, dom_hi, lo, hi))
    return domains


def _merged_domains(enc: PhotonNumberEncoding):
    """Disjoint intensity intervals jointly covering both window supports.

    The padded supports of the two windows can overlap; integrating each
    separately against the combined window function would double count, so
    overlapping intervals are merged and their edges pooled as refinement
    features.
    """
    domains = sorted(_window_domains(enc))
    merged = []
    for dom_lo, dom_hi, lo, hi in domains:
        if merged and dom_lo <= merged[-1][1]:
            prev_lo, prev_hi, edges = merged[-1]
            merged[-1] = (prev_lo, max(prev_hi, dom_hi), edges + [lo, hi])
        else:
            merged.append((dom_lo, dom_hi, [lo, hi]))
    return merged


def _conclusive_window(t, enc, use_erf):
    lo0, hi0 = enc.window(0)
    lo1, hi1 = enc.window(1)
    f = np.zeros_like(np.asarray(t, dtype=float))
    if hi0 > lo0:
        f = f + window_overlap(t, lo0, hi0, use_erf=use_erf)
    if hi1 > lo1:
        f = f + window_overlap(t, lo1, hi1, use_erf=use_erf, open_lower=True)
    return np.clip(f, 0.0, 1.0)


def _receiver_grid(enc, s2, use_erf):
    """Quadrature over Bob's intensity restricted to where the acceptance
    windows are non-zero; the gap between the windows carries nothing."""
    nodes, wts = [], []
    for dom_lo, dom_hi, edges in _merged_domains(enc):
        span = dom_hi - dom_lo
        if s2 >= SMALL_GAIN_TOL:
            kernel_sigma = math.sqrt(s2 * (2.0 * max(min(edges), 1.0) + s2))
            base = int(min(140, max(10, math.ceil(span / (2.2 * kernel_sigma)))))
        else:
            base = 10
        features = [(e, math.sqrt(2.0 * (e + 1.0)), 5.0, 1.3) for e in edges]
        breaks = _segment_breaks(dom_lo, dom_hi, features, base_segments=base)
        n, w = _composite_gl(breaks)
        nodes.append(n)
        wts.append(w)
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(wts)


def _leak_point_grid(enc, line, pair_centers):
    """Grid over the intensity at Eve's tap, covering both signal levels and
    resolving the image of Bob's window edges under the downstream map."""
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    k = (1.0 - r) * eta2
    lows, highs, features = [], [], []
    for c1sq in pair_centers:
        mean = c1sq + s1
        sigma = math.sqrt(s1 * (2.0 * c1sq + s1))
        lows.append(max(0.0, mean - 12.0 * sigma))
        highs.append(mean + 12.0 * sigma)
        features.append((c1sq, sigma, 10.0, 1.2))
    dom_lo, dom_hi = min(lows), max(highs)
    if k > 0.0:
        for _, _, lo, hi in _window_domains(enc):
            for edge in (lo, hi):
                width = math.sqrt(2.0 * (edge + 1.0) + s2 * (2.0 * edge + s2))
                features.append((edge / k, width / k, 5.0, 1.4))
    breaks = _segment_breaks(dom_lo, dom_hi, features, base_segments=16)
    return _composite_gl(breaks)


def _conclusive_given_leak(ta, enc, line):
    """C(t) = probability of a conclusive round given intensity t at the tap."""
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    k = (1.0 - r) * eta2
    use_erf = enc.uses_erf_windows
    if s2 < SMALL_GAIN_TOL:
        return _conclusive_window(k * ta, enc, use_erf)
    tb, wb = _receiver_grid(enc, s2, use_erf)
    if tb.size == 0:
        return np.zeros_like(ta)
    fb = _conclusive_window(tb, enc, use_erf) * wb
    c_vals = np.empty_like(ta)
    chunk = max(1, int(4_000_000 // max(tb.size, 1)))
    for start in range(0, ta.size, chunk):
        block = ta[start : start + chunk, None]
        log_kernel = (
            -(tb[None, :] + k * block) / s2
            + _log_i0(2.0 * np.sqrt(k * block * tb[None, :]) / s2)
            - math.log(s2)
        )
        c_vals[start : start + chunk] = np.exp(log_kernel) @ fb
    return np.clip(c_vals, 0.0, 1.0)


@lru_cache(maxsize=8)
def _eve_pair_direct(enc: PhotonNumberEncoding, line: EffectiveLine):
    """Eve's conditional Fock diagonals for both bits by direct quadrature.

    Shares one leak-point grid (and hence one conclusive-probability curve)
    between the two bits, which is the dominant cost.
    """
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    centers = (eta1 * enc.mu0, eta1 * enc.mu1)
    if s1 < SMALL_GAIN_TOL:
        # Noiseless pre-leak stage: the tap sees the bare coherent intensity
        # and the conclusiveness condition factors out, leaving a Poissonian.
        states = []
        for c1sq in centers:
            lam = r * (c1sq + s1)
            n_max = _fock_truncation(lam, lam)
            logp = _log_poisson_matrix(np.array([lam]), n_max)[0]
            w = np.exp(logp - sp.logsumexp(logp))
            states.append(FockDiagonal(ProbabilityDistribution(w), n_max))
        return tuple(states)
    ta, wa = _leak_point_grid(enc, line, centers)
    with np.errstate(divide="ignore"):
        log_c = np.log(_conclusive_given_leak(ta, enc, line))
    lam = r * ta
    lam_hi = r * float(ta.max())
    states = []
    for c1sq in centers:
        log_w = -(ta + c1sq) / s1 + _log_i0(2.0 * np.sqrt(c1sq * ta) / s1) - math.log(s1)
        contrib = np.log(wa) + log_w + log_c
        n_max = _fock_truncation(r * (c1sq + s1), lam_hi)
        log_rho = sp.logsumexp(contrib[:, None] + _log_poisson_matrix(lam, n_max), axis=0)
        norm = sp.logsumexp(log_rho)
        if not np.isfinite(norm):
            raise ValidationError(
                "conclusive probability vanishes; Eve's conditional state undefined"
            )
        probs = np.exp(log_rho - norm)
        states.append(FockDiagonal(ProbabilityDistribution(probs), n_max))
    return tuple(states)


@dataclass(frozen=True, slots=True)
class EveIntegralKernel:
    """Gaussian-integral kernel of the large-argument route.

    After expanding both Bessel functions for large arguments, the tap-side
    integral becomes int_0^inf x^(2n) exp(-A x^2 + B x) dx with A fixed by the
    inverse noise variances plus the leak fraction and B affine in Bob's field
    amplitude.  ``log_kappa``/``log_kappa_tilde`` evaluate those moments (the
    tilde variant carries one power of x less, entering the first-order
    correction; it is dropped at n = 0 where the moment diverges).
    """

    a_coef: float
    b_offset: float
    b_slope: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a_coef) and self.a_coef > 0.0):
            raise ValidationError("kernel A coefficient must be positive")
        if self.b_offset < 0.0 or self.b_slope < 0.0:
            raise ValidationError("kernel B map must be non-negative")

    def b_of_beta(self, beta_abs):
        return self.b_offset + self.b_slope * np.asarray(beta_abs, dtype=float)

    def exponent_peak(self, beta_abs):
        """z = B^2 / 4A, the argument of the hypergeometric factors."""
        b = self.b_of_beta(beta_abs)
        return b * b / (4.0 * self.a_coef)

    def log_kappa(self, n: int, beta_abs) -> np.ndarray:
        z = np.atleast_1d(self.exponent_peak(beta_abs))
        with np.errstate(divide="ignore"):
            t1 = 0.5 * np.log(z) + np.array(
                [log_kummer_1f1(n + 1.0, 1.5, float(v)) for v in z]
            )
        t2 = (
            sp.gammaln(n + 0.5)
            - math.log(2.0)
            - sp.gammaln(n + 1.0)
            + np.array([log_kummer_1f1(n + 0.5, 0.5, float(v)) for v in z])
        )
        return -(n + 0.5) * math.log(self.a_coef) + np.logaddexp(t1, t2)

    def log_kappa_tilde(self, n: int, beta_abs) -> np.ndarray:
        if n < 1:
            raise ValidationError("kappa_tilde moment defined for n >= 1 only")
        z = np.atleast_1d(self.exponent_peak(beta_abs))
        with np.errstate(divide="ignore"):
            t1 = (
                0.5 * np.log(z)
                + sp.gammaln(n + 0.5)
                - sp.gammaln(n + 1.0)
                + np.array([log_kummer_1f1(n + 0.5, 1.5, float(v)) for v in z])
            )
        t2 = -math.log(2.0 * n) + np.array(
            [log_kummer_1f1(float(n), 0.5, float(v)) for v in z]
        )
        return -n * math.log(self.a_coef) + np.logaddexp(t1, t2)


def _kernel_applicable(enc: PhotonNumberEncoding, line: EffectiveLine) -> bool:
    """True when the Bessel arguments stay above the switch point everywhere
    the integrand carries weight, for both signal levels, and the Fock cutoff
    is small enough that the expansion beats the direct quadrature."""
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    if r <= 0.0 or s1 < SMALL_GAIN_TOL or s2 < SMALL_GAIN_TOL:
        return False
    domains = _window_domains(enc)
    if not domains:
        return False
    tb_lo = min(d[0] for d in domains)
    if tb_lo <= 0.0:
        return False
    for a in (0, 1):
        c1sq = eta1 * enc.mean_photons(a)
        mean = c1sq + s1
        sigma = math.sqrt(s1 * (2.0 * c1sq + s1))
        t_lo = mean - 14.0 * sigma
        if t_lo <= 0.0:
            return False
        arg1 = 2.0 * math.sqrt(c1sq * t_lo) / s1
        arg2 = 2.0 * math.sqrt((1.0 - r) * eta2 * t_lo * tb_lo) / s2
        if min(arg1, arg2) < BESSEL_SWITCH:
            return False
        try:
            n_max = _fock_truncation(r * mean, r * (mean + 14.0 * sigma))
        except TruncationError:
            return False
        if n_max > _KERNEL_FOCK_CAP:
            return False
    return True


def _eve_kernel_state(a: int, enc: PhotonNumberEncoding, line: EffectiveLine) -> FockDiagonal:
    r, s1, s2, eta1, eta2 = _line_coefficients(line)
    if r <= 0.0 or s1 < SMALL_GAIN_TOL or s2 < SMALL_GAIN_TOL:
        raise ValidationError(
            "kernel route needs a positive leak and excess gain on both sides"
        )
    k = (1.0 - r) * eta2
    c1sq = eta1 * enc.mean_photons(a)
    c1 = math.sqrt(c1sq)
    kernel = EveIntegralKernel(
        a_coef=1.0 / s1 + k / s2 + r,
        b_offset=2.0 * c1 / s1,
        b_slope=2.0 * math.sqrt(k) / s2,
    )
    use_erf = enc.uses_erf_windows
    # Quadrature over Bob's field magnitude, window support only.
    beta_nodes, beta_wts = [], []
    for dom_lo, dom_hi, edges in _merged_domains(enc):
        b_lo, b_hi = math.sqrt(max(dom_lo, 0.0)), math.sqrt(dom_hi)
        features = [
            (
                math.sqrt(max(e, 1.0)),
                math.sqrt(2.0 * (e + 1.0)) / (2.0 * math.sqrt(max(e, 1.0))),
                6.0,
                1.2,
            )
            for e in edges
        ]
        breaks = _segment_breaks(b_lo, b_hi, features, base_segments=8)
        n, w = _composite_gl(breaks)
        beta_nodes.append(n)
        beta_wts.append(w)
    if not beta_nodes:
        raise ValidationError(
            "conclusive probability vanishes; Eve's conditional state undefined"
        )
    beta = np.concatenate(beta_nodes)
    wb = np.concatenate(beta_wts)
    f_check = _conclusive_window(beta * beta, enc, use_erf)
    with np.errstate(divide="ignore"):
        log_base = (
            np.log(wb)
            + 0.5 * np.log(beta)
            + np.log(f_check)
            - beta * beta / s2
        )
    log_corr = np.log((s1 / c1 + s2 / (beta * math.sqrt(k))) / 16.0)
    sigma = math.sqrt(s1 * (2.0 * c1sq + s1))
    lam_hi = r * (c1sq + s1 + 14.0 * sigma)
    n_max = _fock_truncation(r * (c1sq + s1), lam_hi)
    log_rho = np.empty(n_max + 1)
    log_r = math.log(r)
    for n in range(n_max + 1):
        inner = kernel.log_kappa(n, beta)
        if n >= 1:
            inner = np.logaddexp(inner, log_corr + kernel.log_kappa_tilde(n, beta))
        log_rho[n] = n * log_r + sp.logsumexp(log_base + inner)
    norm = sp.logsumexp(log_rho)
    if not np.isfinite(norm):
        raise ValidationError(
            "conclusive probability vanishes; Eve's conditional state undefined"
        )
    probs = np.exp(log_rho - norm)
    return FockDiagonal(ProbabilityDistribution(probs), n_max)


def eve_conditional_state(
    a: int, enc: PhotonNumberEncoding, line: EffectiveLine, *, method: str = "auto"
) -> FockDiagonal:
    """Diagonal of Eve's state given Alice's bit and a conclusive round.

    ``method`` selects the integration route: "direct" nested quadrature,
    "kernel" the large-argument expansion, or "auto" which only picks the
    kernel when its validity condition holds everywhere and its cost stays
    reasonable.
    """
    if a not in (0, 1):
        raise ValidationError(f"bit must be 0 or 1, got {a!r}")
    if method not in ("auto", "direct", "kernel"):
        raise ValidationError(f"unknown method {method!r}")
    if method == "auto":
        method = "kernel" if _kernel_applicable(enc, line) else "direct"
    if method == "kernel":
        return _eve_kernel_state(a, enc, line)
    return _eve_pair_direct(enc, line)[a]


def holevo_bound(rho0, rho1, q0: float, q1: float) -> float:
    """Holevo quantity of the two-state ensemble {(q0, rho0), (q1, rho1)}.

    Both states are Fock-diagonal so this is a plain entropy combination
    H(q0 p0 + q1 p1) - q0 H(p0) - q1 H(p1), clamped to [0, 1].
    """
    if not (math.isfinite(q0) and math.isfinite(q1)) or q0 < 0.0 or q1 < 0.0:
        raise ValidationError("ensemble weights must be non-negative")
    if abs(q0 + q1 - 1.0) > 1e-9:
        raise ValidationError(f"ensemble weights must sum to 1, got {q0 + q1!r}")
    w0 = np.asarray(rho0.probs.weights if isinstance(rho0, FockDiagonal) else rho0, float)
    w1 = np.asarray(rho1.probs.weights if isinstance(rho1, FockDiagonal) else rho1, float)
    size = max(w0.size, w1.size)
    w0 = np.pad(w0, (0, size - w0.size))
    w1 = np.pad(w1, (0, size - w1.size))
    mix = q0 * w0 + q1 * w1
    chi = shannon_entropy(mix, sum_tol=1e-6)
    if q0 > 0.0:
        chi -= q0 * shannon_entropy(w0, sum_tol=1e-6)
    if q1 > 0.0:
        chi -= q1 * shannon_entropy(w1, sum_tol=1e-6)
    return float(min(max(chi, 0.0), 1.0))


def key_rate(
    enc: PhotonNumberEncoding, line: EffectiveLine, *, eve_method: str = "auto"
) -> KeyRateBreakdown:
    """Normalized secret-key rate of the counting scheme on the given line."""
    probs = bob_conditional_probs(enc, line)
    p_check = probs.p_conclusive
    if p_check <= 0.0:
        return KeyRateBreakdown(
            i_ab=0.0, eve_bound=0.0, p_conclusive=0.0, normalized_rate=0.0
        )
    i_ab = conclusive_mutual_information(probs)
    if line.leak_fraction <= 0.0:
        eve = 0.0
    else:
        rho0 = eve_conditional_state(0, enc, line, method=eve_method)
        rho1 = eve_conditional_state(1, enc, line, method=eve_method)
        q0, q1 = probs.ensemble_weights
        eve = holevo_bound(rho0, rho1, float(q0), float(q1))
    return KeyRateBreakdown.from_components(i_ab, eve, p_check)
