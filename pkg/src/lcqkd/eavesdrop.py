"""Eavesdropping feasibility diagnostics.

Two independent questions about the beam-splitting adversary are answered
here.  First: how much could Eve learn by collecting the light that fibre
attenuation scatters out of the cable anyway, given realistic detector
segments (click statistics, detector-count requirements, and a ladder of
information measures from individual click readout up to the coherent-state
Holevo limit)?  Second: how correlated are Bob's and Eve's photon counts
when Eve does tap the line, quantified by a Pearson coefficient with a
closed form in the line gains.

The information ladder obeys

    holevo_coherent >= holevo_phase_randomized
                     = info_collective_photon_number
                    >= info_individual_detectors >= 0

and the middle equality (an ensemble of Fock-diagonal states carries
exactly the information of an ideal photon-number measurement) is kept as
two separately coded routes so the identity stays an actual cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp
from scipy import stats

from .channels import EffectiveLine
from .errors import ValidationError
from .numerics import binary_entropy, shannon_entropy

__all__ = [
    "NaturalLossScenario",
    "DetectorRequirement",
    "CorrelationReport",
    "click_statistics",
    "required_detector_count",
    "info_individual_detectors",
    "info_collective_photon_number",
    "holevo_phase_randomized",
    "holevo_coherent",
    "pearson_correlation",
]

# Per-detector fibre segments beyond this length break the point-collection
# model (capture fraction is no longer small and uniform).
MAX_SEGMENT_M = 10.0

# Distribution sums keep at least 1 - 2e-12 of the mass before renormalizing.
TAIL_MASS = 1e-12

# Summation budget for the binomial click distribution.
MAX_DETECTORS = 1_000_000


@dataclass(frozen=True, slots=True)
class NaturalLossScenario:
    """Eve collects scattered light along detector segments of length l.

    ``detector_count`` is the number of independent segments she reads out;
    ``collection_efficiency`` scales the captured intensity for the fraction
    of scattered photons that actually reach a detector (1 = all of them).
    """

    mu0: float
    mu1: float
    segment_length_m: float
    detector_count: int
    attenuation_per_km: float = 0.02
    collection_efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not (self.mu0 >= 0.0 and self.mu1 >= 0.0):
            raise ValidationError("pulse intensities must be non-negative")
        if not 0.0 < self.segment_length_m <= MAX_SEGMENT_M:
            raise ValidationError(
                f"segment length must be in (0, {MAX_SEGMENT_M}] m, "
                f"got {self.segment_length_m!r}"
            )
        if self.detector_count < 0:
            raise ValidationError("detector count must be non-negative")
        if not self.attenuation_per_km > 0.0:
            raise ValidationError("attenuation must be positive")
        if not 0.0 < self.collection_efficiency <= 1.0:
            raise ValidationError("collection efficiency must be in (0, 1]")

    @property
    def captured_fraction(self) -> float:
        """Intensity fraction scattered within one segment, 1 - 10^(-xi l)."""
        exponent = self.attenuation_per_km * self.segment_length_m / 1000.0
        return -math.expm1(-math.log(10.0) * exponent)

    def eve_intensity(self, a: int) -> float:
        """Mean photons one segment's detector sees when Alice sends a."""
        mu = self.mu0 if a == 0 else self.mu1
        return mu * self.captured_fraction * self.collection_efficiency

    @property
    def total_length_m(self) -> float:
        return self.detector_count * self.segment_length_m


@dataclass(frozen=True, slots=True)
class DetectorRequirement:
    """Detector count at which Eve's click statistics resolve the two bits."""

    exact: float
    ceiling: int
    total_length_m: float


@dataclass(frozen=True, slots=True)
class CorrelationReport:
    """Pearson correlation between Bob's and Eve's photon counts."""

    r_be: float
    irreducible_correlator: float
    sigma_b: float
    sigma_e: float

    def __post_init__(self) -> None:
        if not -1e-9 <= self.r_be <= 1.0 + 1e-9:
            raise ValidationError(f"Pearson coefficient out of range: {self.r_be!r}")
        if self.sigma_b < 0.0 or self.sigma_e < 0.0:
            raise ValidationError("standard deviations must be non-negative")


def click_statistics(scenario: NaturalLossScenario) -> tuple[float, float]:
    """Per-bit click probabilities (q0, q1) of one segment detector.

    A detector clicks unless its Poissonian arm is empty, so
    q_a = 1 - exp(-mu_E^(a)).
    """
    return tuple(-math.expm1(-scenario.eve_intensity(a)) for a in (0, 1))


def required_detector_count(scenario: NaturalLossScenario) -> DetectorRequirement:
    """Detectors needed before the click-count distributions separate.

    The two binomial click totals are distinguishable once their means part
    by the sum of their standard deviations, giving
    N = (sqrt(q0(1-q0)) + sqrt(q1(1-q1)))^2 / (mu_E1 - mu_E0)^2.
    ``scenario.detector_count`` is ignored; no safety factor is applied.
    """
    if scenario.mu0 == scenario.mu1:
        raise ValidationError("degenerate encoding: mu0 = mu1 leaks nothing to resolve")
    q0, q1 = click_statistics(scenario)
    gap = scenario.eve_intensity(1) - scenario.eve_intensity(0)
    spread = math.sqrt(q0 * (1.0 - q0)) + math.sqrt(q1 * (1.0 - q1))
    exact = (spread / gap) ** 2
    return DetectorRequirement(
        exact=exact,
        ceiling=math.ceil(exact),
        total_length_m=exact * scenario.segment_length_m,
    )


def _binary_symbol_information(p0: np.ndarray, p1: np.ndarray) -> float:
    """I(A;K) = 1 - (1/2) sum (p0+p1) h2(p0/(p0+p1)) for equiprobable bits."""
    total = p0 + p1
    keep = total > 0.0
    ratio = np.zeros_like(total)
    ratio[keep] = p0[keep] / total[keep]
    h2 = (sp.entr(ratio) + sp.entr(1.0 - ratio)) / math.log(2.0)
    return float(1.0 - 0.5 * np.sum(total * h2))


def info_individual_detectors(scenario: NaturalLossScenario) -> float:
    """Accessible information from per-detector click counts, in bits.

    Eve reads each of the N detectors independently; the sufficient
    statistic is the total click count, binomial in each arm.
    """
    n = scenario.detector_count
    if n == 0:
        return 0.0
    if n > MAX_DETECTORS:
        raise ValidationError(f"detector count {n} exceeds budget {MAX_DETECTORS}")
    q0, q1 = click_statistics(scenario)
    counts = np.arange(n + 1)
    p0 = stats.binom.pmf(counts, n, q0)
    p1 = stats.binom.pmf(counts, n, q1)
    return min(max(_binary_symbol_information(p0, p1), 0.0), 1.0)


def info_collective_photon_number(scenario: NaturalLossScenario) -> float:
    """Information from counting photons over all N segments jointly, in bits.

    The total collected field is Poissonian with mean N mu_E^(a); this is
    the h2-sum evaluation of the symbol information.
    """
    if scenario.detector_count == 0:
        return 0.0
    lam0 = scenario.detector_count * scenario.eve_intensity(0)
    lam1 = scenario.detector_count * scenario.eve_intensity(1)
    hi = int(max(stats.poisson.isf(TAIL_MASS, lam0) if lam0 > 0 else 1,
                 stats.poisson.isf(TAIL_MASS, lam1) if lam1 > 0 else 1)) + 1
    counts = np.arange(hi + 1)
    p0 = stats.poisson.pmf(counts, lam0)
    p1 = stats.poisson.pmf(counts, lam1)
    p0 = p0 / p0.sum()
    p1 = p1 / p1.sum()
    return min(max(_binary_symbol_information(p0, p1), 0.0), 1.0)


def holevo_phase_randomized(scenario: NaturalLossScenario) -> float:
    """Holevo bound for phase-randomized pulses, in bits.

    Phase randomization leaves Fock-diagonal states, so the bound is the
    entropy combination H((p0+p1)/2) - H(p0)/2 - H(p1)/2 of the same
    Poisson photon-count distributions used by
    ``info_collective_photon_number``; the two must agree to decimals.
    """
    if scenario.detector_count == 0:
        return 0.0
    lam0 = scenario.detector_count * scenario.eve_intensity(0)
    lam1 = scenario.detector_count * scenario.eve_intensity(1)
    hi = int(max(stats.poisson.isf(TAIL_MASS, lam0) if lam0 > 0 else 1,
                 stats.poisson.isf(TAIL_MASS, lam1) if lam1 > 0 else 1)) + 1
    counts = np.arange(hi + 1)
    p0 = stats.poisson.pmf(counts, lam0)
    p1 = stats.poisson.pmf(counts, lam1)
    p0 = p0 / p0.sum()
    p1 = p1 / p1.sum()
    chi = (
        shannon_entropy(0.5 * (p0 + p1), sum_tol=1e-6)
        - 0.5 * shannon_entropy(p0, sum_tol=1e-6)
        - 0.5 * shannon_entropy(p1, sum_tol=1e-6)
    )
    return min(max(chi, 0.0), 1.0)


def holevo_coherent(scenario: NaturalLossScenario) -> float:
    """Holevo bound without phase randomization, in bits.

    Eve's two hypotheses are coherent states of amplitude sqrt(r_l N) gamma_a
    whose overlap gives chi = h2(1/2 - exp(-r N (gamma1-gamma0)^2 / 2)/2).
    """
    captured = (
        scenario.captured_fraction
        * scenario.collection_efficiency
        * scenario.detector_count
    )
    gamma_gap = math.sqrt(scenario.mu1) - math.sqrt(scenario.mu0)
    overlap = math.exp(-0.5 * captured * gamma_gap * gamma_gap)
    return binary_entropy(0.5 - 0.5 * overlap)


def pearson_correlation(
    mean_photons: float, r_e: float, line: EffectiveLine
) -> CorrelationReport:
    """Pearson coefficient between Bob's and Eve's photon counts.

    The tap splits one amplified beam, so the pre-tap excess noise (G1 - 1)
    shows up in both arms; the covariance depends only on |gamma|^2, r_E and
    G1.  ``line`` supplies the reduced gains; its own leak fraction is not
    read, so one geometry can be reused across r_E values.
    """
    if not 0.0 <= r_e <= 1.0:
        raise ValidationError(f"leak fraction must be in [0, 1], got {r_e!r}")
    if mean_photons < 0.0:
        raise ValidationError("mean photon number must be non-negative")
    s1 = line.pre_eve.gain - 1.0
    s2 = line.post_eve.gain - 1.0
    mu = mean_photons
    keep = 1.0 - r_e
    irreducible = r_e * keep * s1 * (2.0 * mu + s1)
    var_b = (
        keep * (mu + s1) * (1.0 + 2.0 * s2)
        + keep * keep * s1 * (2.0 * mu + s1)
        + (1.0 + s2) * s2
    )
    var_e = r_e * (mu + s1) + r_e * r_e * s1 * (2.0 * mu + s1)
    sigma_b = math.sqrt(var_b)
    sigma_e = math.sqrt(var_e)
    if irreducible == 0.0:
        r_be = 0.0
    else:
        r_be = irreducible / (sigma_b * sigma_e)
    return CorrelationReport(
        r_be=r_be,
        irreducible_correlator=irreducible,
        sigma_b=sigma_b,
        sigma_e=sigma_e,
    )
