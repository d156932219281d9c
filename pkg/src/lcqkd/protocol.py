"""Monte-Carlo protocol rounds, sifting, and Toeplitz privacy amplification.

The sampler draws each round through the physical model itself: Alice's
amplitude, the amplified pre-tap field, Eve's diverted share, the post-tap
field, and finally Bob's photon count or quadrature reading, classified by
the same post-selection windows the analytic modules integrate over.  Its
whole purpose is to disagree with those modules only at the statistical
level, and the tests hold it to that.

Randomness is counter based.  Rounds are partitioned into fixed chunks of
``CHUNK_ROUNDS``; chunk c of seed s draws from Philox keyed by (s, c), with
a fixed draw order inside the chunk.  Any execution order over chunks
(serial, threaded, re-run of a single chunk) therefore reproduces the same
rounds bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .channels import EffectiveLine
from .errors import ValidationError
from .numerics import binary_entropy
from .phase_encoding import PhaseEncoding
from .photon_encoding import PhotonNumberEncoding
from .rates import KeyRateBreakdown

__all__ = [
    "CHUNK_ROUNDS",
    "INCONCLUSIVE",
    "RoundSample",
    "RoundBatch",
    "MonteCarloReport",
    "ToeplitzSeed",
    "FinalKeyDecision",
    "round_stream",
    "sample_rounds",
    "sample_round",
    "run_protocol",
    "shannon_syndrome_length",
    "random_toeplitz_seed",
    "toeplitz_privacy_amplification",
    "final_key_length",
    "key_to_bytes",
    "write_key_file",
    "read_key_file",
]

CHUNK_ROUNDS = 4096

# Bob outcome code for rounds the post-selection discards.
INCONCLUSIVE = -1

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, slots=True)
class RoundSample:
    """One protocol round: Alice's bit, Eve's share, Bob's classified reading."""

    alice_bit: int
    eve_amplitude: complex
    bob_outcome: int
    bob_reading: float


@dataclass(frozen=True, slots=True)
class RoundBatch:
    """Struct-of-arrays form of many rounds, as the sampler produces them."""

    alice_bits: np.ndarray
    eve_amplitudes: np.ndarray
    bob_outcomes: np.ndarray
    bob_readings: np.ndarray

    def __len__(self) -> int:
        return self.alice_bits.size

    def round(self, i: int) -> RoundSample:
        return RoundSample(
            alice_bit=int(self.alice_bits[i]),
            eve_amplitude=complex(self.eve_amplitudes[i]),
            bob_outcome=int(self.bob_outcomes[i]),
            bob_reading=float(self.bob_readings[i]),
        )


@dataclass(frozen=True, slots=True)
class MonteCarloReport:
    """Aggregated protocol run: counts, error rate, and the sifted key pair."""

    rounds: int
    conclusive: int
    qber: float
    empirical_table: np.ndarray
    alice_key: np.ndarray
    bob_key: np.ndarray

    def __post_init__(self) -> None:
        if self.conclusive > self.rounds:
            raise ValidationError("conclusive count exceeds round count")
        if not 0.0 <= self.qber <= 1.0:
            raise ValidationError(f"qber out of range: {self.qber!r}")
        table = np.asarray(self.empirical_table, dtype=float)
        if table.shape != (2, 2):
            raise ValidationError("empirical table must be 2x2")
        if np.any(table.sum(axis=1) > 1.0 + 1e-9):
            raise ValidationError("empirical row sums exceed 1")
        if self.alice_key.size != self.conclusive or self.bob_key.size != self.conclusive:
            raise ValidationError("sifted keys must have one bit per conclusive round")

    @property
    def conclusive_fraction(self) -> float:
        return self.conclusive / self.rounds if self.rounds else 0.0


def _classify_photon(counts: np.ndarray, enc: PhotonNumberEncoding) -> np.ndarray:
    lo0, hi0 = enc.window(0)
    lo1, hi1 = enc.window(1)
    out = np.full(counts.shape, INCONCLUSIVE, dtype=np.int8)
    out[(counts >= lo0) & (counts <= hi0)] = 0
    # upper window is half-open below so the two windows stay disjoint
    out[(counts > lo1) & (counts <= hi1)] = 1
    return out


def _classify_phase(readings: np.ndarray, enc: PhaseEncoding) -> np.ndarray:
    out = np.full(readings.shape, INCONCLUSIVE, dtype=np.int8)
    out[(readings >= enc.theta1p) & (readings <= enc.theta2p)] = 0
    mirrored = (readings >= -enc.theta2p) & (readings <= -enc.theta1p)
    # theta1p = 0 lets a reading of exactly 0 satisfy both windows; the
    # direct window wins (zero-probability event, but keep it deterministic)
    out[mirrored & (out == INCONCLUSIVE)] = 1
    return out


def round_stream(seed: int, chunk: int = 0) -> np.random.Generator:
    """The Philox stream for one round chunk of one seed."""
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    key = np.array([seed & _MASK64, chunk & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_rounds(
    alice_bits: np.ndarray,
    enc: PhotonNumberEncoding | PhaseEncoding,
    line: EffectiveLine,
    stream: np.random.Generator,
) -> RoundBatch:
    """Propagate a batch of rounds through the sampled channel model.

    Draw order is fixed: phase angles (photon-number scheme only), pre-tap
    noise (re, im), post-tap noise (re, im), then Bob's reading.
    """
    bits = np.asarray(alice_bits)
    if not np.all((bits == 0) | (bits == 1)):
        raise ValidationError("alice bits must be 0 or 1")
    n = bits.size
    r = line.leak_fraction
    s1 = line.pre_eve.gain - 1.0
    s2 = line.post_eve.gain - 1.0
    photon = isinstance(enc, PhotonNumberEncoding)

    if photon:
        gamma = np.where(bits == 1, math.sqrt(enc.mu1), math.sqrt(enc.mu0))
        phi = stream.uniform(0.0, 2.0 * math.pi, n)
        signal = gamma * np.exp(1j * phi)
    else:
        signal = np.where(bits == 1, -enc.gamma, enc.gamma).astype(complex)

    sig1 = math.sqrt(0.5 * s1)
    alpha = math.sqrt(line.pre_eve.eta) * signal
    if s1 > 0.0:
        alpha = alpha + stream.normal(0.0, sig1, n) + 1j * stream.normal(0.0, sig1, n)
    sig2 = math.sqrt(0.5 * s2)
    beta = math.sqrt((1.0 - r) * line.post_eve.eta) * alpha
    if s2 > 0.0:
        beta = beta + stream.normal(0.0, sig2, n) + 1j * stream.normal(0.0, sig2, n)

    if photon:
        readings = stream.poisson(np.abs(beta) ** 2).astype(float)
        outcomes = _classify_photon(readings, enc)
    else:
        readings = stream.normal(beta.real, 0.5, n)
        outcomes = _classify_phase(readings, enc)

    return RoundBatch(
        alice_bits=bits.astype(np.int8),
        eve_amplitudes=math.sqrt(r) * alpha,
        bob_outcomes=outcomes,
        bob_readings=readings,
    )


def sample_round(
    a: int,
    enc: PhotonNumberEncoding | PhaseEncoding,
    line: EffectiveLine,
    stream: np.random.Generator,
) -> RoundSample:
    """One round for Alice's bit ``a`` drawn from the given stream."""
    if a not in (0, 1):
        raise ValidationError(f"bit must be 0 or 1, got {a!r}")
    return sample_rounds(np.array([a]), enc, line, stream).round(0)


def run_protocol(
    rounds: int,
    enc: PhotonNumberEncoding | PhaseEncoding,
    line: EffectiveLine,
    seed: int,
) -> MonteCarloReport:
    """Simulate ``rounds`` protocol rounds and sift the conclusive ones.

    Alice's bits are drawn first in every chunk, then the channel draws
    follow through ``sample_rounds``; chunking is invisible in the output.
    """
    if rounds < 1:
        raise ValidationError("need at least one round")
    counts = np.zeros((2, 2), dtype=np.int64)
    sent = np.zeros(2, dtype=np.int64)
    alice_parts: list[np.ndarray] = []
    bob_parts: list[np.ndarray] = []
    for chunk in range(0, rounds, CHUNK_ROUNDS):
        size = min(CHUNK_ROUNDS, rounds - chunk)
        stream = round_stream(seed, chunk // CHUNK_ROUNDS)
        bits = stream.integers(0, 2, size=size, dtype=np.int8)
        batch = sample_rounds(bits, enc, line, stream)
        keep = batch.bob_outcomes != INCONCLUSIVE
        a_kept = batch.alice_bits[keep]
        b_kept = batch.bob_outcomes[keep]
        np.add.at(counts, (a_kept, b_kept), 1)
        sent += np.bincount(bits, minlength=2)
        alice_parts.append(a_kept.astype(np.uint8))
        bob_parts.append(b_kept.astype(np.uint8))
    alice_key = np.concatenate(alice_parts) if alice_parts else np.empty(0, np.uint8)
    bob_key = np.concatenate(bob_parts) if bob_parts else np.empty(0, np.uint8)
    conclusive = int(counts.sum())
    errors = int(counts[0, 1] + counts[1, 0])
    table = np.zeros((2, 2))
    for a in (0, 1):
        if sent[a]:
            table[a] = counts[a] / sent[a]
    return MonteCarloReport(
        rounds=rounds,
        conclusive=conclusive,
        qber=errors / conclusive if conclusive else 0.0,
        empirical_table=table,
        alice_key=alice_key,
        bob_key=bob_key,
    )


def shannon_syndrome_length(report: MonteCarloReport) -> float:
    """Error-correction disclosure at the Shannon limit: conclusive * h2(qber)."""
    if report.conclusive == 0:
        raise ValidationError("no conclusive rounds to reconcile")
    return report.conclusive * binary_entropy(report.qber)


@dataclass(frozen=True, slots=True)
class ToeplitzSeed:
    """Diagonal generators of a binary Toeplitz matrix.

    ``first_column`` spans the raw-key dimension, ``first_row`` the output
    dimension; entry (i, j) of the matrix is column[i - j] on and below the
    main diagonal and row[j - i] above it.
    """

    first_column: np.ndarray
    first_row: np.ndarray

    def __post_init__(self) -> None:
        for name in ("first_column", "first_row"):
            bits = np.asarray(getattr(self, name), dtype=np.uint8)
            if bits.ndim != 1 or bits.size == 0:
                raise ValidationError(f"{name} must be a non-empty bit vector")
            if not np.all((bits == 0) | (bits == 1)):
                raise ValidationError(f"{name} must contain only bits")
            object.__setattr__(self, name, bits)

    @property
    def raw_length(self) -> int:
        return self.first_column.size

    @property
    def output_length(self) -> int:
        return self.first_row.size


def random_toeplitz_seed(
    raw_length: int, output_length: int, rng: np.random.Generator
) -> ToeplitzSeed:
    """Uniformly random seed for a raw_length x output_length hash."""
    if raw_length < 1 or output_length < 1:
        raise ValidationError("hash dimensions must be positive")
    return ToeplitzSeed(
        first_column=rng.integers(0, 2, raw_length, dtype=np.uint8),
        first_row=rng.integers(0, 2, output_length, dtype=np.uint8),
    )


def toeplitz_privacy_amplification(
    raw_key: np.ndarray, seed: ToeplitzSeed, out_len: int
) -> np.ndarray:
    """Compress the raw key with the seeded Toeplitz hash.

    Output bit j is the modulo-2 inner product of the raw key with the
    matrix column built from the seed diagonals.  Evaluated as one
    convolution; exact small-kernel convolution below a size threshold,
    FFT with integer rounding above it.
    """
    raw = np.asarray(raw_key, dtype=np.uint8)
    if raw.ndim != 1:
        raise ValidationError("raw key must be a bit vector")
    if not np.all((raw == 0) | (raw == 1)):
        raise ValidationError("raw key must contain only bits")
    if raw.size != seed.raw_length:
        raise ValidationError(
            f"seed column length {seed.raw_length} does not match key length {raw.size}"
        )
    if not 0 < out_len <= seed.output_length:
        raise ValidationError(
            f"output length {out_len} outside seed row length {seed.output_length}"
        )
    if out_len > raw.size:
        raise ValidationError("privacy amplification cannot lengthen the key")
    # kernel over diagonal offsets m = i - j in [-(out-1), raw-1]:
    # m >= 0 reads the first column, m < 0 the first row
    kernel = np.concatenate(
        [seed.first_row[1:out_len][::-1], seed.first_column]
    ).astype(np.int64)
    vals = raw.astype(np.int64)
    if raw.size * out_len <= 1 << 22:
        full = np.convolve(vals, kernel[::-1])
    else:
        full = np.rint(fftconvolve(vals, kernel[::-1])).astype(np.int64)
    return (full[raw.size - 1 : raw.size - 1 + out_len] % 2).astype(np.uint8)


@dataclass(frozen=True, slots=True)
class FinalKeyDecision:
    """Final key length in bits, with the termination verdict."""

    bits: int
    terminated: bool


def final_key_length(rounds: int, breakdown: KeyRateBreakdown) -> FinalKeyDecision:
    """Length of the final key from ``rounds`` raw rounds at the given rate.

    The protocol terminates (zero bits) whenever the rate before clamping
    is non-positive.
    """
    if rounds < 0:
        raise ValidationError("round count must be non-negative")
    terminated = breakdown.terminated
    # small slack so rates that are exact in decimal floor to the intended
    # integer (1e9 rounds at 1e-4 must give 1e5 bits, not 1e5 - 1)
    bits = 0 if terminated else int(math.floor(rounds * breakdown.normalized_rate + 1e-9))
    return FinalKeyDecision(bits=bits, terminated=terminated)


def key_to_bytes(bits: np.ndarray) -> bytes:
    """Pack a bit vector into bytes, most significant bit first."""
    arr = np.asarray(bits, dtype=np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("key must contain only bits")
    return np.packbits(arr).tobytes()


def write_key_file(bits: np.ndarray, path, fmt: str = "raw") -> None:
    """Write a key as packed binary (``raw``) or hex text (``hex``)."""
    payload = key_to_bytes(bits)
    if fmt == "raw":
        with open(path, "wb") as fh:
            fh.write(payload)
    elif fmt == "hex":
        with open(path, "w", encoding="ascii") as fh:
            fh.write(payload.hex())
            fh.write("\n")
    else:
        raise ValidationError(f"unknown key format {fmt!r}")


def read_key_file(path, fmt: str = "raw", bit_length: int | None = None) -> np.ndarray:
    """Read a key written by ``write_key_file`` back into a bit vector.

    ``bit_length`` trims byte-padding; by default all stored bits are kept.
    """
    if fmt == "raw":
        with open(path, "rb") as fh:
            payload = fh.read()
    elif fmt == "hex":
        with open(path, "r", encoding="ascii") as fh:
            payload = bytes.fromhex(fh.read().strip())
    else:
        raise ValidationError(f"unknown key format {fmt!r}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    if bit_length is not None:
        if bit_length > bits.size:
            raise ValidationError("requested more bits than the file holds")
        bits = bits[:bit_length]
    return bits
