"""Loss/amplifier channel algebra for a segmented optical line.

A repeater-less line of span ``D`` is built from identical cells: ``d`` km of
fibre with transmittance ``T = 10^(-xi d)`` followed by an amplifier of gain
``G``.  In the gain-compensating regime ``G = 1/T`` the signal magnitude is
preserved while amplifier noise accumulates.  Everything here is exact
algebra on Gaussian channels:

* two losses (or two amplifiers) compose multiplicatively;
* an amplifier-then-loss pair can be rewritten as loss-then-amplifier with
  the product ``eta = G T`` unchanged;
* ``M`` identical cells collapse to a single equivalent pair in closed form.

The eavesdropper taps a fraction ``r_E`` of the intensity at one amplifier
node, which splits the line into a pre-tap and a post-tap equivalent pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

__all__ = [
    "ChannelPair",
    "LineGeometry",
    "EffectiveLine",
    "PhotonStats",
    "compose_same_kind",
    "commute_amp_then_loss",
    "reduce_chain",
    "split_line",
    "output_photon_stats",
    "min_detectable_leakage",
]

# |GT - 1| below this uses the degenerate (gain-compensating) closed form.
GAIN_COMP_TOL = 1e-9

# Positions must sit on the amplifier grid to within this fraction of d.
GRID_TOL = 1e-6

DEFAULT_ATTENUATION_PER_KM = 0.02
DEFAULT_AMP_SPACING_KM = 50.0


@dataclass(frozen=True, slots=True)
class ChannelPair:
    """A loss followed by an amplifier: ``Amp_G . Loss_T``.

    A pure loss is represented with ``gain = 1`` and a pure amplifier with
    ``transmittance = 1``.
    """

    transmittance: float
    gain: float

    def __post_init__(self) -> None:
        if not (0.0 < self.transmittance <= 1.0):
            raise ValidationError(
                f"transmittance must be in (0, 1], got {self.transmittance!r}"
            )
        if not self.gain >= 1.0:
            raise ValidationError(f"gain must be >= 1, got {self.gain!r}")

    @property
    def eta(self) -> float:
        """The commutation invariant ``G T``."""
        return self.gain * self.transmittance


@dataclass(frozen=True, slots=True)
class LineGeometry:
    """Geometry of the amplified line.

    All distances are in km.  ``span_km`` and ``eve_position_km`` must be
    integer multiples of ``amp_spacing_km`` (the tap sits at an amplifier
    node); off-grid positions are rejected, never rounded.
    ``attenuation_per_km`` is the base-10 intensity attenuation coefficient
    (0.02/km corresponds to standard 0.2 dB/km fibre).
    """

    span_km: float
    eve_position_km: float
    amp_spacing_km: float = DEFAULT_AMP_SPACING_KM
    attenuation_per_km: float = DEFAULT_ATTENUATION_PER_KM

    def __post_init__(self) -> None:
        if not self.span_km > 0.0:
            raise ValidationError(f"span_km must be positive, got {self.span_km!r}")
        if not self.amp_spacing_km > 0.0:
            raise ValidationError(
                f"amp_spacing_km must be positive, got {self.amp_spacing_km!r}"
            )
        if not self.attenuation_per_km > 0.0:
            raise ValidationError(
                f"attenuation_per_km must be positive, got {self.attenuation_per_km!r}"
            )
        if not 0.0 <= self.eve_position_km <= self.span_km:
            raise ValidationError(
                f"eve_position_km must lie in [0, span], got {self.eve_position_km!r}"
            )
        for name in ("span_km", "eve_position_km"):
            value = getattr(self, name)
            cells = value / self.amp_spacing_km
            if abs(cells - round(cells)) > GRID_TOL:
                raise ValidationError(
                    f"{name}={value!r} is not an integer multiple of "
                    f"amp_spacing_km={self.amp_spacing_km!r}"
                )

    @property
    def cells_before_eve(self) -> int:
        return round(self.eve_position_km / self.amp_spacing_km)

    @property
    def cells_after_eve(self) -> int:
        return round((self.span_km - self.eve_position_km) / self.amp_spacing_km)

    @property
    def cell_transmittance(self) -> float:
        return 10.0 ** (-self.attenuation_per_km * self.amp_spacing_km)


@dataclass(frozen=True, slots=True)
class EffectiveLine:
    """The line reduced to pre-tap and post-tap equivalent pairs.

    ``leak_fraction`` is the intensity fraction diverted at the tap node.
    ``split_line`` always produces gain-compensated pairs (``T = 1/G``), but
    the container accepts any valid pair so that non-compensated chains can
    be analysed too.
    """

    pre_eve: ChannelPair
    post_eve: ChannelPair
    leak_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.leak_fraction <= 1.0:
            raise ValidationError(
                f"leak_fraction must be in [0, 1], got {self.leak_fraction!r}"
            )

    @property
    def is_gain_compensated(self) -> bool:
        return (
            abs(self.pre_eve.eta - 1.0) < 1e-6 and abs(self.post_eve.eta - 1.0) < 1e-6
        )


@dataclass(frozen=True, slots=True)
class PhotonStats:
    """Output photon-number statistics of the amplified line.

    ``secondary_mode_noise`` is the broadband photon count leaking through a
    filter of time-bandwidth product ``filter_time_bandwidth``; it is
    reported for line-budget diagnostics only and never enters the encoding
    analyses, which track the in-mode amplifier noise exactly.
    """

    mean: float
    std_dev: float
    secondary_mode_noise: float
    filter_time_bandwidth: float

    def __post_init__(self) -> None:
        if self.mean < 0.0 or self.std_dev < 0.0 or self.secondary_mode_noise < 0.0:
            raise ValidationError("photon statistics must be non-negative")


def _same_kind(first: ChannelPair, second: ChannelPair) -> str:
    kinds = []
    for pair in (first, second):
        is_loss = pair.gain == 1.0
        is_amp = pair.transmittance == 1.0
        if is_loss and is_amp:
            kinds.append("identity")
        elif is_loss:
            kinds.append("loss")
        elif is_amp:
            kinds.append("amp")
        else:
            raise ValidationError(
                "compose_same_kind requires pure channels (gain 1 or transmittance 1)"
            )
    effective = {k for k in kinds if k != "identity"}
    if len(effective) > 1:
        raise ValidationError(f"kind mismatch: cannot compose {kinds[0]} with {kinds[1]}")
    return effective.pop() if effective else "identity"


def compose_same_kind(first: ChannelPair, second: ChannelPair) -> ChannelPair:
    """Compose two pure channels of the same kind.

    Two losses multiply transmittances, two amplifiers multiply gains; the
    identity composes with anything.  Mixed kinds raise ``ValidationError``
    (use ``commute_amp_then_loss`` to reorder mixed chains instead).
    """
    kind = _same_kind(first, second)
    if kind == "loss":
        return ChannelPair(first.transmittance * second.transmittance, 1.0)
    if kind == "amp":
        return ChannelPair(1.0, first.gain * second.gain)
    return ChannelPair(1.0, 1.0)


def commute_amp_then_loss(gain_prime: float, transmittance_prime: float) -> ChannelPair:
    """Rewrite ``Loss_T' . Amp_G'`` as the equivalent ``Amp_G . Loss_T``.

    The arguments describe an amplify-first chain (gain ``G'`` applied
    before loss ``T'``); the returned pair is the canonical loss-first order
    with

        ``T = G' T' / ((G' - 1) T' + 1)``,  ``G = (G' - 1) T' + 1``,

    so the product ``G T = G' T'`` is preserved.
    """
    if not gain_prime >= 1.0:
        raise ValidationError(f"gain must be >= 1, got {gain_prime!r}")
    if not (0.0 < transmittance_prime <= 1.0):
        raise ValidationError(
            f"transmittance must be in (0, 1], got {transmittance_prime!r}"
        )
    gain = (gain_prime - 1.0) * transmittance_prime + 1.0
    return ChannelPair(gain_prime * transmittance_prime / gain, gain)


def reduce_chain(repetitions: int, transmittance: float, gain: float) -> ChannelPair:
    """Collapse ``repetitions`` identical loss-then-amplifier cells.

    Closed form for the equivalent single pair:

        ``G* = ((G-1)(GT)^M + G(T-1)) / (GT - 1)``,  ``T* = (GT)^M / G*``,

    with the gain-compensating limit ``G* = G (M(1-T) + T)``,
    ``T* = T / (M(1-T) + T)`` used when ``|GT - 1|`` is below
    ``GAIN_COMP_TOL``.  ``repetitions = 0`` yields the identity; the
    invariant ``T* G* = (GT)^M`` holds on both branches.
    """
    if repetitions < 0 or repetitions != int(repetitions):
        raise ValidationError(
            f"repetitions must be a non-negative integer, got {repetitions!r}"
        )
    cell = ChannelPair(transmittance, gain)
    m = int(repetitions)
    if m == 0:
        return ChannelPair(1.0, 1.0)
    t, g = cell.transmittance, cell.gain
    eta = g * t
    if abs(eta - 1.0) < GAIN_COMP_TOL:
        scale = m * (1.0 - t) + t
        return ChannelPair(t / scale, g * scale)
    eta_m = eta**m
    g_star = ((g - 1.0) * eta_m + g * (t - 1.0)) / (eta - 1.0)
    return ChannelPair(eta_m / g_star, g_star)


def split_line(geometry: LineGeometry, leak_fraction: float) -> EffectiveLine:
    """Reduce the line to its pre-tap and post-tap equivalent pairs.

    Each cell is ``d`` km of fibre (``T = 10^(-xi d)``) compensated by an
    amplifier of gain ``1/T``; the ``M1`` cells before the tap and the
    ``M2 = M - M1`` cells after it collapse via ``reduce_chain``, which in
    this regime gives ``G1 = (10^(xi d) - 1) M1 + 1`` and likewise for
    ``G2``, so ``G1 + G2`` is constant along the line.
    """
    t = geometry.cell_transmittance
    pre = reduce_chain(geometry.cells_before_eve, t, 1.0 / t)
    post = reduce_chain(geometry.cells_after_eve, t, 1.0 / t)
    return EffectiveLine(pre_eve=pre, post_eve=post, leak_fraction=leak_fraction)


def output_photon_stats(
    mean_input_photons: float,
    repetitions: int,
    transmittance: float,
    gain: float,
    filter_time_bandwidth: float = 0.0,
) -> PhotonStats:
    """Photon-number statistics after ``repetitions`` identical cells.

    For an input coherent state of intensity ``|gamma|^2`` the output field
    is Gaussian with centre intensity ``c = (GT)^M |gamma|^2`` and per-axis
    excess variance ``v = (G* - 1)/2``, giving

        ``mean = c + 2v``,  ``var = mean + 4 c v + 4 v^2``

    (shot noise plus amplifier-noise broadening).  At the gain-compensated
    operating point this reduces to ``mean = |gamma|^2 + G* - 1`` and
    ``var = M(G-1)(M(G-1)+1) + |gamma|^2 (2M(G-1)+1)``; ``repetitions = 0``
    recovers Poissonian statistics.  The secondary-mode noise photon count
    is ``2 (G* - 1)`` per unit time-bandwidth product.
    """
    if mean_input_photons < 0.0:
        raise ValidationError(
            f"mean_input_photons must be >= 0, got {mean_input_photons!r}"
        )
    if filter_time_bandwidth < 0.0:
        raise ValidationError(
            f"filter_time_bandwidth must be >= 0, got {filter_time_bandwidth!r}"
        )
    reduced = reduce_chain(repetitions, transmittance, gain)
    c = reduced.eta * mean_input_photons
    v = 0.5 * (reduced.gain - 1.0)
    mean = c + 2.0 * v
    var = mean + 4.0 * c * v + 4.0 * v * v
    noise = 2.0 * (reduced.gain - 1.0) * filter_time_bandwidth
    return PhotonStats(
        mean=mean,
        std_dev=math.sqrt(var),
        secondary_mode_noise=noise,
        filter_time_bandwidth=filter_time_bandwidth,
    )


def min_detectable_leakage(repetitions: int, gain: float, test_pulse_photons: float) -> float:
    """Smallest leak fraction resolvable against amplifier-noise fluctuations.

    ``sqrt(M G / n)``: a tap weaker than this drowns in the intrinsic
    intensity noise of an ``M``-amplifier line monitored with test pulses of
    ``n`` photons.
    """
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions!r}")
    if not gain >= 1.0:
        raise ValidationError(f"gain must be >= 1, got {gain!r}")
    if not test_pulse_photons > 0.0:
        raise ValidationError(
            f"test_pulse_photons must be positive, got {test_pulse_photons!r}"
        )
    return math.sqrt(repetitions * gain / test_pulse_photons)
