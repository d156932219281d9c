"""Conditional-probability tables and secret-key-rate assembly.

Both encoding schemes produce the same artefacts: a 2x2 table of Bob's
conclusive outcome probabilities p(b|a), the conclusive probability
p_check, the post-selected mutual information I(A,B), and a bound on the
eavesdropper's information per conclusive bit.  The normalized key rate is

    L_f / L = max(0, p_check * (I(A,B) - eve_bound)),

with the convention that Alice's bit is uniform, so S(A) = 1 and I(A,B)
is at most 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .numerics import binary_entropy, shannon_entropy

__all__ = [
    "ConditionalProbabilities",
    "KeyRateBreakdown",
    "conclusive_mutual_information",
]

# Row sums p(0|a) + p(1|a) + p(fail|a) must close to 1 within this.
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class ConditionalProbabilities:
    """Bob's conclusive outcome probabilities conditioned on Alice's bit.

    ``table[a, b]`` is p(b|a) for a, b in {0, 1}; the failure probabilities
    are the row complements.
    """

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.shape != (2, 2):
            raise ValidationError(f"table must be 2x2, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValidationError("probabilities must be finite")
        if np.any(t < -ROW_SUM_TOL) or np.any(t > 1.0 + ROW_SUM_TOL):
            raise ValidationError("probabilities must lie in [0, 1]")
        rows = t.sum(axis=1)
        if np.any(rows > 1.0 + ROW_SUM_TOL):
            raise ValidationError(f"row sums exceed 1: {rows!r}")
        t = np.clip(t, 0.0, 1.0)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def prob(self, b: int, a: int) -> float:
        """p(b|a)."""
        return float(self.table[a, b])

    @property
    def p_fail_given_a(self) -> np.ndarray:
        return 1.0 - self.table.sum(axis=1)

    @property
    def p_conclusive_given_a(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def p_conclusive(self) -> float:
        """p_check = (1/2) sum_{a,b} p(b|a)."""
        return float(0.5 * self.table.sum())

    @property
    def ensemble_weights(self) -> np.ndarray:
        """q_a = p(check|a) / (2 p_check), the conclusive-posterior weights."""
        p_check = self.p_conclusive
        if p_check <= 0.0:
            raise ValidationError("ensemble weights undefined at p_conclusive = 0")
        return self.p_conclusive_given_a / (2.0 * p_check)


@dataclass(frozen=True, slots=True)
class KeyRateBreakdown:
    """Per-bit information balance and the resulting normalized key rate."""

    i_ab: float
    eve_bound: float
    p_conclusive: float
    normalized_rate: float

    def __post_init__(self) -> None:
        for name in ("i_ab", "eve_bound"):
            value = getattr(self, name)
            if not -1e-9 <= value <= 1.0 + 1e-9:
                raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
        if not 0.0 <= self.p_conclusive <= 1.0 + 1e-9:
            raise ValidationError(
                f"p_conclusive must lie in [0, 1], got {self.p_conclusive!r}"
            )

    @classmethod
    def from_components(
        cls, i_ab: float, eve_bound: float, p_conclusive: float
    ) -> "KeyRateBreakdown":
        rate = max(0.0, p_conclusive * (i_ab - eve_bound))
        return cls(
            i_ab=i_ab,
            eve_bound=eve_bound,
            p_conclusive=p_conclusive,
            normalized_rate=rate,
        )

    @property
    def pre_clamp_rate(self) -> float:
        """p_check (I(A,B) - eve_bound) before flooring at zero."""
        return self.p_conclusive * (self.i_ab - self.eve_bound)

    @property
    def terminated(self) -> bool:
        """True when the users hold no information advantage."""
        return self.pre_clamp_rate <= 0.0


def conclusive_mutual_information(probs: ConditionalProbabilities) -> float:
    """I(A, B) over the post-selected joint distribution.

    The conclusive rounds carry the joint p(a, b) = p(b|a) / (2 p_check);
    the mutual information is H(A) + H(B) - H(A, B) of that table.  Returns
    0 when nothing is conclusive.
    """
    p_check = probs.p_conclusive
    if p_check <= 0.0:
        return 0.0
    joint = probs.table / (2.0 * p_check)
    h_a = binary_entropy(float(joint.sum(axis=1)[0]))
    h_b = binary_entropy(float(joint.sum(axis=0)[0]))
    h_ab = shannon_entropy(joint.ravel(), sum_tol=1e-6)
    info = h_a + h_b - h_ab
    return float(min(max(info, 0.0), 1.0))
