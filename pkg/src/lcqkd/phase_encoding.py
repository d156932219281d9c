"""Phase encoding: homodyne windows, a concavity bound on Eve, key rate.

Alice encodes her bit in the sign of a real amplitude, sending |+gamma> or
|-gamma>.  Bob homodynes the q quadrature and accepts the round when the
reading lands in [theta1p, theta2p] (bit 0) or its mirror image (bit 1).
All probabilities are Gaussian integrals and come out in closed form.

Eve's information per conclusive round is bounded through the concavity of
conditional entropy: conditioned on the field alpha at her tap she holds one
of two coherent states with overlap exp(-2 r_E |alpha|^2), and averaging the
resulting binary-entropy bound over the post-selected field distribution
(then moving the average inside h2, which only loosens the bound) leaves
h2((1 + <exp(-2 r_E |alpha|^2)>)/2) with a closed-form average.

A note on signs: the acceptance windows here are written so that bit
agreement is the high-probability event, i.e. the erf arguments carry
-(-1)^(a+b) times the signal amplitude.  Deriving p(b|a) from the Gaussian
quadrature density forces this choice; the opposite sign would send p(0|0)
to zero for bright pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import EffectiveLine
from .errors import ValidationError
from .numerics import binary_entropy, erf_difference
from .rates import ConditionalProbabilities, KeyRateBreakdown

__all__ = [
    "PhaseEncoding",
    "bob_conditional_probs",
    "eve_info_bound",
    "key_rate",
]


@dataclass(frozen=True, slots=True)
class PhaseEncoding:
    """Signal amplitude and quadrature acceptance window.

    ``gamma`` is the (real, positive) amplitude; the two signals are
    +gamma and -gamma.  ``theta2p`` may be infinite for a one-sided window,
    or equal to ``theta1p`` for an empty one (every round inconclusive).
    """

    gamma: float
    theta1p: float
    theta2p: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValidationError("gamma must be positive and finite")
        if math.isnan(self.theta1p) or math.isnan(self.theta2p):
            raise ValidationError("window bounds must not be NaN")
        if not 0.0 <= self.theta1p <= self.theta2p:
            raise ValidationError("need 0 <= theta1p <= theta2p")

    @property
    def mean_photons(self) -> float:
        return self.gamma * self.gamma


def _gaussian_parameters(enc: PhaseEncoding, line: EffectiveLine):
    r = line.leak_fraction
    s1 = line.pre_eve.gain - 1.0
    s2 = line.post_eve.gain - 1.0
    centre = math.sqrt((1.0 - r) * line.pre_eve.eta * line.post_eve.eta) * enc.gamma
    # q-quadrature variance: vacuum 1/4 plus amplifier noise from both
    # segments, the pre-leak part attenuated by the surviving fraction.
    den = 1.0 + 2.0 * s2 + 2.0 * (1.0 - r) * line.post_eve.eta * s1
    return centre, den


def bob_conditional_probs(
    enc: PhaseEncoding, line: EffectiveLine
) -> ConditionalProbabilities:
    """Homodyne outcome table p(b|a), closed form.

    The reading given bit a is N((-1)^a * centre, den/4); outcome b keeps
    the window (-1)^b [theta1p, theta2p].  By the mirror symmetry of the
    windows, p(check|0) and p(check|1) are bitwise identical.
    """
    centre, den = _gaussian_parameters(enc, line)
    root = math.sqrt(den)
    table = np.empty((2, 2))
    for a in (0, 1):
        for b in (0, 1):
            signed = -centre if (a + b) % 2 else centre
            table[a, b] = erf_difference(
                math.sqrt(2.0) * (enc.theta1p - signed) / root,
                math.sqrt(2.0) * (enc.theta2p - signed) / root,
            )
    return ConditionalProbabilities(table=table)


def eve_info_bound(enc: PhaseEncoding, line: EffectiveLine) -> float:
    """Concavity bound on Eve's information per conclusive round, in bits.

    Returns h2((1 + E)/2) with E the post-selected average of the coherent
    overlap exp(-2 r_E |alpha|^2) at the tap.  The closed form for E is
    specific to gain-compensated lines (unit net transmission on both sides
    of the tap); other lines are rejected.
    """
    r = line.leak_fraction
    if r <= 0.0:
        return 0.0
    if not line.is_gain_compensated:
        raise ValidationError(
            "eve_info_bound requires a gain-compensated line on both sides of the tap"
        )
    s1 = line.pre_eve.gain - 1.0
    s2 = line.post_eve.gain - 1.0
    probs = bob_conditional_probs(enc, line)
    p_check = probs.p_conclusive
    if p_check <= 0.0:
        return 0.0
    pp = 1.0 + 2.0 * r * s1
    zeta = math.sqrt(line.pre_eve.gain + line.post_eve.gain + 2.0 * r * s1 * s2 - 1.5)
    tilted = math.sqrt(1.0 - r) * enc.gamma
    scale = zeta * math.sqrt(pp)
    bracket = 0.0
    for sign in (1.0, -1.0):
        bracket += math.erf((enc.theta2p * pp + sign * tilted) / scale)
        bracket -= math.erf((enc.theta1p * pp + sign * tilted) / scale)
    average = math.exp(-2.0 * r * enc.mean_photons / pp) / (2.0 * p_check * pp) * bracket
    average = min(max(average, 0.0), 1.0)
    return binary_entropy(0.5 * (1.0 + average))


def key_rate(enc: PhaseEncoding, line: EffectiveLine) -> KeyRateBreakdown:
    """Normalized secret-key rate of the phase scheme on the given line.

    The post-selected mutual information collapses to 1 - h2(QBER) because
    the two bits are conclusive equally often.
    """
    probs = bob_conditional_probs(enc, line)
    p_check = probs.p_conclusive
    if p_check <= 0.0:
        return KeyRateBreakdown(
            i_ab=0.0, eve_bound=0.0, p_conclusive=0.0, normalized_rate=0.0
        )
    qber = min(max(probs.prob(1, 0) / p_check, 0.0), 1.0)
    i_ab = 1.0 - binary_entropy(qber)
    eve = eve_info_bound(enc, line)
    return KeyRateBreakdown.from_components(i_ab, eve, p_check)
