"""Encoding optimization: multi-start simplex search, sweeps, worst-case Eve.

The objective is the normalized key rate, evaluated through the encoding
modules.  All search coordinates are logarithms (photon numbers, threshold
offsets), which keeps positivity and window ordering by construction and
makes the simplex tolerance meaningful across four orders of magnitude in
photon number.  Invalid corners of the space (inverted signal levels,
windows below zero counts) score zero rather than raising, so the simplex
slides off them.

Everything here is deterministic: the seeding grid is fixed, restart
jitter derives from the budget's seed, and the simplex refinement is
scipy's Nelder-Mead with explicit initial simplices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channels import EffectiveLine, LineGeometry, split_line
from .errors import TruncationError, ValidationError
from .phase_encoding import PhaseEncoding
from .phase_encoding import key_rate as phase_key_rate
from .photon_encoding import PhotonNumberEncoding
from .photon_encoding import key_rate as photon_key_rate
from .rates import KeyRateBreakdown

__all__ = [
    "SCHEME_PHOTON",
    "SCHEME_PHASE",
    "SearchBudget",
    "OptimizationResult",
    "SweepPoint",
    "WorstCasePlacement",
    "grid_seed_encodings",
    "optimize_encoding",
    "sweep_leak_fraction",
    "worst_case_eve",
]

SCHEME_PHOTON = "photon-number"
SCHEME_PHASE = "phase"

# search-space tolerance: simplex spread below this (in log coordinates)
# counts as converged
XATOL = 1e-3

_RATE_TIE = 1e-12


def _zero_rate() -> KeyRateBreakdown:
    return KeyRateBreakdown.from_components(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class SearchBudget:
    """Restart count, per-restart evaluation cap, and the jitter seed."""

    restarts: int = 20
    max_evaluations: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValidationError("need at least one restart")
        if self.max_evaluations < 10:
            raise ValidationError("evaluation budget too small to move a simplex")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True, slots=True)
class OptimizationResult:
    """Best encoding found, its rate breakdown, and search bookkeeping."""

    best_encoding: PhotonNumberEncoding | PhaseEncoding
    best_rate: KeyRateBreakdown
    evaluations: int
    converged: bool
    infeasible: bool


class _PhotonSpace:
    """(log mu0, log mu1, log thresholds / sqrt(mu_mid)) coordinates."""

    scheme = SCHEME_PHOTON
    dim = 6

    @staticmethod
    def decode(x: np.ndarray) -> PhotonNumberEncoding | None:
        if not np.all(np.isfinite(x)):
            return None
        with np.errstate(over="ignore"):
            mu0 = math.exp(min(x[0], 700.0))
            mu1 = math.exp(min(x[1], 700.0))
        if not 0.0 < mu0 < mu1 or not math.isfinite(mu1):
            return None
        root = math.sqrt(0.5 * (mu0 + mu1))
        mu_mid = 0.5 * (mu0 + mu1)
        theta1 = math.exp(min(x[2], 50.0)) * root
        theta2 = math.exp(min(x[3], 50.0)) * root
        # cap the lower window at zero counts instead of rejecting, so the
        # boundary (window reaching 0) stays reachable by the simplex
        theta3 = min(theta1 + math.exp(min(x[4], 50.0)) * root, mu_mid)
        theta4 = theta2 + math.exp(min(x[5], 50.0)) * root
        try:
            return PhotonNumberEncoding(
                mu0=mu0, mu1=mu1, theta1=theta1, theta2=theta2,
                theta3=theta3, theta4=theta4,
            )
        except ValidationError:
            return None

    @staticmethod
    def encode(enc: PhotonNumberEncoding) -> np.ndarray:
        root = math.sqrt(enc.mu_mid)
        floor = 1e-6 * root
        return np.array([
            math.log(enc.mu0),
            math.log(enc.mu1),
            math.log(max(enc.theta1, floor) / root),
            math.log(max(enc.theta2, floor) / root),
            math.log(max(enc.theta3 - enc.theta1, floor) / root),
            math.log(max(enc.theta4 - enc.theta2, floor) / root),
        ])

    @staticmethod
    def seeds(line: EffectiveLine) -> list[PhotonNumberEncoding]:
        levels = np.logspace(2.0, 6.0, 5)
        pairs = [(levels[i], levels[j]) for i in range(5) for j in range(i + 1, 5)]
        for m in levels:
            lo, hi = (m, 3.0 * m) if 3.0 * m <= levels[-1] else (levels[-1] / 3.0, levels[-1])
            pairs.append((lo, hi))
        out = []
        for mu0, mu1 in pairs:
            half_gap = 0.5 * (mu1 - mu0)
            mu_mid = 0.5 * (mu0 + mu1)
            root = math.sqrt(mu_mid)
            for inner_frac in (0.25, 0.5):
                for width in (2.0, 10.0, 30.0):
                    inner = inner_frac * half_gap
                    outer = min(half_gap + width * root, mu_mid)
                    if outer <= inner:
                        continue
                    try:
                        out.append(PhotonNumberEncoding(
                            mu0=mu0, mu1=mu1, theta1=inner, theta2=inner,
                            theta3=outer, theta4=half_gap + width * root,
                        ))
                    except ValidationError:
                        continue
        return out

    @staticmethod
    def evaluate(enc: PhotonNumberEncoding, line: EffectiveLine) -> KeyRateBreakdown:
        try:
            return photon_key_rate(enc, line)
        except TruncationError:
            return _zero_rate()

    @staticmethod
    def mean_photons(enc: PhotonNumberEncoding) -> float:
        return enc.mu_mid


class _PhaseSpace:
    """(log gamma^2, log theta1', log window width) coordinates."""

    scheme = SCHEME_PHASE
    dim = 3

    @staticmethod
    def decode(x: np.ndarray) -> PhaseEncoding | None:
        if not np.all(np.isfinite(x)):
            return None
        gamma = math.exp(min(0.5 * x[0], 350.0))
        theta1p = math.exp(min(x[1], 50.0))
        theta2p = theta1p + math.exp(min(x[2], 50.0))
        try:
            return PhaseEncoding(gamma=gamma, theta1p=theta1p, theta2p=theta2p)
        except ValidationError:
            return None

    @staticmethod
    def encode(enc: PhaseEncoding) -> np.ndarray:
        width = enc.theta2p - enc.theta1p
        if not math.isfinite(width):
            width = 1e4
        return np.array([
            2.0 * math.log(enc.gamma),
            math.log(max(enc.theta1p, 1e-9)),
            math.log(max(width, 1e-9)),
        ])

    @staticmethod
    def seeds(line: EffectiveLine) -> list[PhaseEncoding]:
        s1 = line.pre_eve.gain - 1.0
        s2 = line.post_eve.gain - 1.0
        r = line.leak_fraction
        sigma = 0.5 * math.sqrt(1.0 + 2.0 * s2 + 2.0 * (1.0 - r) * s1)
        out = []
        for gamma_sq in np.logspace(2.0, 6.0, 5):
            for frac in (0.1, 0.5, 1.0, 2.0):
                for width in (5.0, 50.0):
                    out.append(PhaseEncoding(
                        gamma=math.sqrt(gamma_sq),
                        theta1p=frac * sigma,
                        theta2p=(frac + width) * sigma,
                    ))
        return out

    @staticmethod
    def evaluate(enc: PhaseEncoding, line: EffectiveLine) -> KeyRateBreakdown:
        return phase_key_rate(enc, line)

    @staticmethod
    def mean_photons(enc: PhaseEncoding) -> float:
        return enc.gamma ** 2


_SPACES = {SCHEME_PHOTON: _PhotonSpace, SCHEME_PHASE: _PhaseSpace}


def _space_for(scheme: str):
    try:
        return _SPACES[scheme]
    except KeyError:
        raise ValidationError(
            f"unknown scheme {scheme!r}, expected {SCHEME_PHOTON!r} or {SCHEME_PHASE!r}"
        ) from None


def grid_seed_encodings(
    scheme: str, line: EffectiveLine
) -> list[PhotonNumberEncoding | PhaseEncoding]:
    """The coarse deterministic seeding lattice for the given scheme."""
    return _space_for(scheme).seeds(line)


@dataclass(frozen=True, slots=True)
class _Candidate:
    rate: float
    photons: float
    encoding: object
    breakdown: KeyRateBreakdown
    converged: bool


def _better(cand: _Candidate, best: _Candidate | None) -> bool:
    if best is None:
        return True
    if cand.rate > best.rate + _RATE_TIE:
        return True
    # ties go to the cheaper signal
    return abs(cand.rate - best.rate) <= _RATE_TIE and cand.photons < best.photons


def optimize_encoding(
    scheme: str,
    line: EffectiveLine,
    budget: SearchBudget | None = None,
    extra_starts: tuple = (),
) -> OptimizationResult:
    """Maximize the key rate over encoding parameters on a fixed line.

    Grid seeds are all evaluated; the best ones (after any ``extra_starts``
    warm starts) become Nelder-Mead restarts.  The returned rate is the max
    over every evaluation made, so it can never undercut the seeding grid.
    """
    space = _space_for(scheme)
    if budget is None:
        budget = SearchBudget()
    if scheme == SCHEME_PHASE and not line.is_gain_compensated:
        raise ValidationError("phase-scheme search needs a gain-compensated line")

    evaluations = 0
    best: _Candidate | None = None

    def consider(enc, breakdown, converged: bool) -> None:
        nonlocal best
        cand = _Candidate(
            rate=breakdown.normalized_rate,
            photons=space.mean_photons(enc),
            encoding=enc,
            breakdown=breakdown,
            converged=converged,
        )
        if _better(cand, best):
            best = cand

    scored = []
    for enc in space.seeds(line):
        breakdown = space.evaluate(enc, line)
        evaluations += 1
        consider(enc, breakdown, False)
        scored.append((breakdown.normalized_rate, len(scored), enc))
    scored.sort(key=lambda t: (-t[0], t[1]))

    starts = [space.encode(enc) for enc in extra_starts]
    starts.extend(space.encode(enc) for _, _, enc in scored)
    if len(starts) > budget.restarts:
        starts = starts[: budget.restarts]
    elif len(starts) < budget.restarts:
        rng = np.random.default_rng(np.random.SeedSequence((budget.seed, 17)))
        base = starts[0] if starts else np.zeros(space.dim)
        starts.extend(
            base + rng.normal(0.0, 0.25, space.dim)
            for _ in range(budget.restarts - len(starts))
        )

    def objective(x: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        enc = space.decode(x)
        if enc is None:
            return 0.0
        return -space.evaluate(enc, line).normalized_rate

    for x0 in starts:
        simplex = np.vstack([x0] + [x0 + 0.4 * basis for basis in np.eye(space.dim)])
        res = minimize(
            objective, x0, method="Nelder-Mead",
            options=dict(
                maxfev=budget.max_evaluations, xatol=XATOL, fatol=1e-10,
                adaptive=True, initial_simplex=simplex,
            ),
        )
        enc = space.decode(res.x)
        if enc is not None:
            consider(enc, space.evaluate(enc, line), bool(res.success))
            evaluations += 1

    assert best is not None
    return OptimizationResult(
        best_encoding=best.encoding,
        best_rate=best.breakdown,
        evaluations=evaluations,
        converged=best.converged,
        infeasible=best.rate <= 0.0,
    )


@dataclass(frozen=True, slots=True)
class SweepPoint:
    """One sweep row: the leak fraction and the search result at it."""

    leak_fraction: float
    result: OptimizationResult

    @property
    def rate(self) -> float:
        return self.result.best_rate.normalized_rate


def sweep_leak_fraction(
    scheme: str,
    geometry: LineGeometry,
    leak_grid,
    optimize_each: bool = True,
    budget: SearchBudget | None = None,
) -> list[SweepPoint]:
    """Rate versus leak fraction along an ascending r_E grid.

    With per-point optimization the grid is processed from the largest leak
    downward and each point warm-starts from its noisier neighbour's best
    encoding; since a fixed encoding's rate cannot improve as the leak
    grows, this chains the rows into a non-increasing curve.
    """
    grid = np.asarray(leak_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("leak grid must be a non-empty vector")
    if np.any(np.diff(grid) <= 0.0):
        raise ValidationError("leak grid must be strictly ascending")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValidationError("leak fractions must lie in [0, 1]")

    space = _space_for(scheme)
    rows: list[SweepPoint] = []
    if optimize_each:
        warm: tuple = ()
        for r in grid[::-1]:
            result = optimize_encoding(
                scheme, split_line(geometry, float(r)), budget, extra_starts=warm
            )
            rows.append(SweepPoint(leak_fraction=float(r), result=result))
            if not result.infeasible:
                warm = (result.best_encoding,)
        rows.reverse()
        return rows

    base = optimize_encoding(scheme, split_line(geometry, float(grid[0])), budget)
    for r in grid:
        breakdown = space.evaluate(base.best_encoding, split_line(geometry, float(r)))
        rows.append(SweepPoint(
            leak_fraction=float(r),
            result=OptimizationResult(
                best_encoding=base.best_encoding,
                best_rate=breakdown,
                evaluations=1,
                converged=base.converged,
                infeasible=breakdown.normalized_rate <= 0.0,
            ),
        ))
    return rows


@dataclass(frozen=True, slots=True)
class WorstCasePlacement:
    """Minimizing Eve position over the amplifier grid, with the full scan."""

    position_km: float
    rate: float
    result: OptimizationResult
    positions_km: np.ndarray
    rates: np.ndarray


def worst_case_eve(
    scheme: str,
    geometry: LineGeometry,
    leak_fraction: float,
    budget: SearchBudget | None = None,
) -> WorstCasePlacement:
    """Scan Eve's tap over every amplifier position and keep the worst rate.

    ``geometry.eve_position_km`` is ignored; the scan covers {0, d, ..., span}.
    Each position warm-starts from the previous one's optimum.
    """
    spacing = geometry.amp_spacing_km
    count = int(round(geometry.span_km / spacing))
    positions = np.array([i * spacing for i in range(count + 1)])
    results: list[OptimizationResult] = []
    warm: tuple = ()
    for pos in positions:
        geom = LineGeometry(
            span_km=geometry.span_km,
            eve_position_km=float(pos),
            amp_spacing_km=spacing,
            attenuation_per_km=geometry.attenuation_per_km,
        )
        result = optimize_encoding(
            scheme, split_line(geom, leak_fraction), budget, extra_starts=warm
        )
        results.append(result)
        if not result.infeasible:
            warm = (result.best_encoding,)
    rates = np.array([res.best_rate.normalized_rate for res in results])
    worst = int(np.argmin(rates))
    return WorstCasePlacement(
        position_km=float(positions[worst]),
        rate=float(rates[worst]),
        result=results[worst],
        positions_km=positions,
        rates=rates,
    )
