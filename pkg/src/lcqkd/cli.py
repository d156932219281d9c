"""Command-line front end: config resolution, orchestration, CSV/JSON output.

Every command reads an optional YAML config file; explicit flags override
file fields.  Results go to a CSV whose first row names the columns, plus a
JSON sidecar next to it carrying the fully resolved configuration, seeds,
and library versions, so any output file can be regenerated bit for bit.
Without ``--output`` the CSV goes to stdout and no sidecar is written.

Exit codes: 0 success, 1 runtime failure, 2 config/schema violation,
3 infeasible optimization, 4 quadrature failure.  Failures print a one-line
JSON object with a ``category`` field to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .channels import LineGeometry, min_detectable_leakage, split_line
from .eavesdrop import (
    NaturalLossScenario,
    click_statistics,
    holevo_coherent,
    holevo_phase_randomized,
    info_collective_photon_number,
    info_individual_detectors,
    required_detector_count,
)
from .errors import TruncationError, ValidationError
from .numerics import binary_entropy
from .optimizer import (
    SCHEME_PHASE,
    SCHEME_PHOTON,
    SearchBudget,
    optimize_encoding,
    sweep_leak_fraction,
    worst_case_eve,
)
from .phase_encoding import PhaseEncoding
from .phase_encoding import key_rate as phase_key_rate
from .photon_encoding import PhotonNumberEncoding
from .photon_encoding import key_rate as photon_key_rate
from .protocol import (
    final_key_length,
    random_toeplitz_seed,
    read_key_file,
    run_protocol,
    shannon_syndrome_length,
    toeplitz_privacy_amplification,
    write_key_file,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_QUADRATURE = 4

THREADS_ENV = "LCQKD_THREADS"


class SchemaError(Exception):
    """Configuration rejected before any computation started."""


class InfeasibleError(Exception):
    """Optimization produced no positive rate anywhere."""


def _fail(category: str, message: str) -> None:
    print(json.dumps({"category": category, "message": message}), file=sys.stderr)


def _fmt(value) -> str:
    return "%.12g" % float(value)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise SchemaError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if count < 1:
        raise SchemaError(f"{THREADS_ENV} must be positive")
    return count


# -- config plumbing ---------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read config file: {exc}") from None
    except yaml.YAMLError as exc:
        raise SchemaError(f"config file is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SchemaError("config file must hold a mapping at top level")
    return data


def _pick(flag, file_section: dict, key: str, default=None):
    """Flag beats file beats default."""
    if flag is not None:
        return flag
    if key in file_section:
        return file_section[key]
    return default


def _as_float(value, what: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{what} must be a number, got {value!r}") from None


def _as_int(value, what: str) -> int:
    try:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{what} must be an integer, got {value!r}") from None


def _build_geometry(args, file_cfg: dict) -> LineGeometry:
    section = file_cfg.get("geometry", {})
    if not isinstance(section, dict):
        raise SchemaError("geometry section must be a mapping")
    span = _pick(args.span_km, section, "span_km")
    if span is None:
        raise SchemaError("geometry.span_km is required")
    eve = _pick(getattr(args, "eve_km", None), section, "eve_position_km", 0.0)
    spacing = _pick(args.amp_spacing_km, section, "amp_spacing_km", 50.0)
    atten = _pick(args.attenuation_per_km, section, "attenuation_per_km", 0.02)
    try:
        return LineGeometry(
            span_km=_as_float(span, "span_km"),
            eve_position_km=_as_float(eve, "eve_position_km"),
            amp_spacing_km=_as_float(spacing, "amp_spacing_km"),
            attenuation_per_km=_as_float(atten, "attenuation_per_km"),
        )
    except ValidationError as exc:
        raise SchemaError(f"invalid geometry: {exc}") from None


def _resolve_scheme(args, file_cfg: dict) -> str:
    scheme = _pick(args.scheme, file_cfg, "scheme", SCHEME_PHOTON)
    if scheme not in (SCHEME_PHOTON, SCHEME_PHASE):
        raise SchemaError(
            f"scheme must be {SCHEME_PHOTON!r} or {SCHEME_PHASE!r}, got {scheme!r}"
        )
    return scheme


_PHOTON_FIELDS = ("mu0", "mu1", "theta1", "theta2", "theta3", "theta4")
_PHASE_FIELDS = ("gamma", "theta1p", "theta2p")


def _build_encoding(scheme: str, args, file_cfg: dict):
    section = file_cfg.get("encoding", {})
    if not isinstance(section, dict):
        raise SchemaError("encoding section must be a mapping")
    names = _PHOTON_FIELDS if scheme == SCHEME_PHOTON else _PHASE_FIELDS
    values = {}
    for name in names:
        value = _pick(getattr(args, name, None), section, name)
        if value is None:
            raise SchemaError(f"encoding.{name} is required for scheme {scheme!r}")
        values[name] = _as_float(value, f"encoding.{name}")
    try:
        if scheme == SCHEME_PHOTON:
            return PhotonNumberEncoding(**values)
        return PhaseEncoding(**values)
    except ValidationError as exc:
        raise SchemaError(f"invalid encoding: {exc}") from None


def _build_budget(args, file_cfg: dict) -> SearchBudget:
    section = file_cfg.get("budget", {})
    if not isinstance(section, dict):
        raise SchemaError("budget section must be a mapping")
    try:
        return SearchBudget(
            restarts=_as_int(_pick(args.restarts, section, "restarts", 20), "budget.restarts"),
            max_evaluations=_as_int(
                _pick(args.max_evals, section, "max_evaluations", 500),
                "budget.max_evaluations",
            ),
            seed=_as_int(_pick(args.opt_seed, section, "seed", 0), "budget.seed"),
        )
    except ValidationError as exc:
        raise SchemaError(f"invalid budget: {exc}") from None


def _resolve_leak(args, file_cfg: dict) -> float:
    leak = _pick(args.leak, file_cfg, "leak_fraction")
    if leak is None:
        raise SchemaError("leak_fraction is required")
    value = _as_float(leak, "leak_fraction")
    if not 0.0 <= value <= 1.0:
        raise SchemaError(f"leak_fraction must lie in [0, 1], got {value}")
    return value


def _resolve_grid(args, file_cfg: dict, *, key: str, what: str) -> np.ndarray:
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        try:
            values = np.array([float(tok) for tok in flag.split(",") if tok.strip()])
        except ValueError:
            raise SchemaError(f"{what} must be comma-separated numbers") from None
        return values
    section = file_cfg.get(key.replace("-", "_"))
    if section is None:
        raise SchemaError(f"{what} is required")
    if isinstance(section, (list, tuple)):
        return np.array([_as_float(v, what) for v in section])
    if isinstance(section, dict):
        start = _as_float(section.get("start"), f"{what}.start")
        stop = _as_float(section.get("stop"), f"{what}.stop")
        points = _as_int(section.get("points"), f"{what}.points")
        spacing = section.get("spacing", "log")
        if points < 1:
            raise SchemaError(f"{what}.points must be positive")
        if spacing == "log":
            if start <= 0.0 or stop <= 0.0:
                raise SchemaError(f"log-spaced {what} needs positive endpoints")
            return np.logspace(math.log10(start), math.log10(stop), points)
        if spacing == "linear":
            return np.linspace(start, stop, points)
        raise SchemaError(f"{what}.spacing must be 'log' or 'linear'")
    raise SchemaError(f"{what} must be a list or a start/stop/points mapping")


def _encoding_columns(scheme: str) -> list[str]:
    if scheme == SCHEME_PHOTON:
        return ["mu0", "mu1", "theta1", "theta2", "theta3", "theta4"]
    return ["gamma_sq", "theta1p", "theta2p"]


def _encoding_values(scheme: str, enc) -> list[float]:
    if scheme == SCHEME_PHOTON:
        return [enc.mu0, enc.mu1, enc.theta1, enc.theta2, enc.theta3, enc.theta4]
    return [enc.gamma ** 2, enc.theta1p, enc.theta2p]


def _rate_header(scheme: str) -> list[str]:
    return (
        ["r_E", "D_AE_km", "rate"]
        + _encoding_columns(scheme)
        + ["i_ab", "eve_bound", "p_conclusive"]
    )


def _rate_row(scheme: str, leak: float, position_km: float, enc, breakdown) -> list[str]:
    values = (
        [leak, position_km, breakdown.normalized_rate]
        + _encoding_values(scheme, enc)
        + [breakdown.i_ab, breakdown.eve_bound, breakdown.p_conclusive]
    )
    return [_fmt(v) for v in values]


def _write_csv(output: str | None, header: list[str], rows: list[list[str]]) -> None:
    if output is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(output: str | None, payload: dict) -> None:
    if output is None:
        return
    path = Path(output).with_suffix(".json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metadata(command: str, config_echo: dict) -> dict:
    return {
        "command": command,
        "config": config_echo,
        "threads": _thread_count(),
        "versions": {
            "artifact": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def _geometry_echo(geometry: LineGeometry) -> dict:
    return {
        "span_km": geometry.span_km,
        "eve_position_km": geometry.eve_position_km,
        "amp_spacing_km": geometry.amp_spacing_km,
        "attenuation_per_km": geometry.attenuation_per_km,
    }


def _budget_echo(budget: SearchBudget) -> dict:
    return {
        "restarts": budget.restarts,
        "max_evaluations": budget.max_evaluations,
        "seed": budget.seed,
    }


def _encoding_echo(scheme: str, enc) -> dict:
    return dict(zip(_encoding_columns(scheme), _encoding_values(scheme, enc)))


def _evaluate(scheme: str, enc, line):
    if scheme == SCHEME_PHOTON:
        return photon_key_rate(enc, line)
    return phase_key_rate(enc, line)


# -- commands ----------------------------------------------------------------

def _cmd_keyrate(args, file_cfg: dict) -> int:
    scheme = _resolve_scheme(args, file_cfg)
    geometry = _build_geometry(args, file_cfg)
    leak = _resolve_leak(args, file_cfg)
    enc = _build_encoding(scheme, args, file_cfg)
    breakdown = _evaluate(scheme, enc, split_line(geometry, leak))
    rows = [_rate_row(scheme, leak, geometry.eve_position_km, enc, breakdown)]
    _write_csv(args.output, _rate_header(scheme), rows)
    meta = _metadata("keyrate", {
        "scheme": scheme,
        "geometry": _geometry_echo(geometry),
        "leak_fraction": leak,
        "encoding": _encoding_echo(scheme, enc),
    })
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_optimize(args, file_cfg: dict) -> int:
    scheme = _resolve_scheme(args, file_cfg)
    geometry = _build_geometry(args, file_cfg)
    leak = _resolve_leak(args, file_cfg)
    budget = _build_budget(args, file_cfg)
    result = optimize_encoding(scheme, split_line(geometry, leak), budget)
    rows = [_rate_row(
        scheme, leak, geometry.eve_position_km, result.best_encoding, result.best_rate
    )]
    _write_csv(args.output, _rate_header(scheme), rows)
    meta = _metadata("optimize", {
        "scheme": scheme,
        "geometry": _geometry_echo(geometry),
        "leak_fraction": leak,
        "budget": _budget_echo(budget),
    })
    meta["evaluations"] = result.evaluations
    meta["converged"] = result.converged
    meta["infeasible"] = result.infeasible
    _write_sidecar(args.output, meta)
    if result.infeasible:
        raise InfeasibleError(
            f"no encoding achieves a positive rate at leak_fraction={leak:g}"
        )
    return EXIT_OK


def _cmd_sweep(args, file_cfg: dict) -> int:
    scheme = _resolve_scheme(args, file_cfg)
    geometry = _build_geometry(args, file_cfg)
    grid = _resolve_grid(args, file_cfg, key="leak_grid", what="leak_grid")
    budget = _build_budget(args, file_cfg)
    optimize_each = not args.no_optimize_each
    if "optimize_each" in file_cfg and not args.no_optimize_each:
        optimize_each = bool(file_cfg["optimize_each"])
    try:
        points = sweep_leak_fraction(scheme, geometry, grid, optimize_each, budget)
    except ValidationError as exc:
        raise SchemaError(str(exc)) from None
    rows = [
        _rate_row(scheme, p.leak_fraction, geometry.eve_position_km,
                  p.result.best_encoding, p.result.best_rate)
        for p in points
    ]
    _write_csv(args.output, _rate_header(scheme), rows)
    meta = _metadata("sweep", {
        "scheme": scheme,
        "geometry": _geometry_echo(geometry),
        "leak_grid": [float(v) for v in grid],
        "optimize_each": optimize_each,
        "budget": _budget_echo(budget),
    })
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_worst_eve(args, file_cfg: dict) -> int:
    scheme = _resolve_scheme(args, file_cfg)
    geometry = _build_geometry(args, file_cfg)
    leak = _resolve_leak(args, file_cfg)
    budget = _build_budget(args, file_cfg)
    placement = worst_case_eve(scheme, geometry, leak, budget)
    rows = []
    for pos, rate in zip(placement.positions_km, placement.rates):
        if pos == placement.position_km:
            enc = placement.result.best_encoding
            breakdown = placement.result.best_rate
            rows.append(_rate_row(scheme, leak, float(pos), enc, breakdown))
        else:
            rows.append(
                [_fmt(leak), _fmt(pos), _fmt(rate)]
                + [""] * len(_encoding_columns(scheme)) + ["", "", ""]
            )
    _write_csv(args.output, _rate_header(scheme), rows)
    meta = _metadata("worst-eve", {
        "scheme": scheme,
        "geometry": _geometry_echo(geometry),
        "leak_fraction": leak,
        "budget": _budget_echo(budget),
    })
    meta["worst_position_km"] = placement.position_km
    meta["worst_rate"] = placement.rate
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_montecarlo(args, file_cfg: dict) -> int:
    scheme = _resolve_scheme(args, file_cfg)
    geometry = _build_geometry(args, file_cfg)
    leak = _resolve_leak(args, file_cfg)
    enc = _build_encoding(scheme, args, file_cfg)
    rounds = _as_int(_pick(args.rounds, file_cfg, "rounds", 100000), "rounds")
    seed = _as_int(_pick(args.seed, file_cfg, "seed", 0), "seed")
    if rounds < 1:
        raise SchemaError("rounds must be positive")
    if seed < 0:
        raise SchemaError("seed must be non-negative")
    key_format = _pick(args.key_format, file_cfg, "key_format", "raw")
    if key_format not in ("raw", "hex"):
        raise SchemaError(f"key_format must be 'raw' or 'hex', got {key_format!r}")

    line = split_line(geometry, leak)
    report = run_protocol(rounds, enc, line, seed)
    analytic = _evaluate(scheme, enc, line)
    syndrome = (
        shannon_syndrome_length(report) if report.conclusive else 0.0
    )
    decision = final_key_length(rounds, analytic)
    empirical_syndrome_rate = (
        binary_entropy(report.qber) if report.conclusive else 0.0
    )

    header = [
        "rounds", "conclusive", "qber", "p00", "p01", "p10", "p11",
        "syndrome_bits", "empirical_sab", "analytic_rate", "final_bits", "terminated",
    ]
    row = [
        "%d" % report.rounds, "%d" % report.conclusive, _fmt(report.qber),
        _fmt(report.empirical_table[0, 0]), _fmt(report.empirical_table[0, 1]),
        _fmt(report.empirical_table[1, 0]), _fmt(report.empirical_table[1, 1]),
        _fmt(syndrome), _fmt(empirical_syndrome_rate),
        _fmt(analytic.normalized_rate), "%d" % decision.bits,
        "1" if decision.terminated else "0",
    ]
    _write_csv(args.output, header, [row])

    key_paths = {}
    if args.sifted_key is not None:
        write_key_file(report.alice_key, args.sifted_key, key_format)
        key_paths["sifted"] = args.sifted_key
    if args.final_key is not None:
        out_len = min(decision.bits, report.conclusive)
        if out_len > 0:
            hash_rng = np.random.default_rng(np.random.SeedSequence((seed, 0x70A)))
            toeplitz = random_toeplitz_seed(report.conclusive, out_len, hash_rng)
            final_bits = toeplitz_privacy_amplification(
                report.alice_key, toeplitz, out_len
            )
        else:
            final_bits = np.empty(0, dtype=np.uint8)
        write_key_file(final_bits, args.final_key, key_format)
        key_paths["final"] = args.final_key

    meta = _metadata("montecarlo", {
        "scheme": scheme,
        "geometry": _geometry_echo(geometry),
        "leak_fraction": leak,
        "encoding": _encoding_echo(scheme, enc),
        "rounds": rounds,
        "seed": seed,
        "key_format": key_format,
    })
    meta["key_files"] = key_paths
    meta["conclusive"] = report.conclusive
    meta["qber"] = report.qber
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_natural_loss(args, file_cfg: dict) -> int:
    section = file_cfg.get("natural_loss", {})
    if not isinstance(section, dict):
        raise SchemaError("natural_loss section must be a mapping")
    mu0 = _as_float(_pick(args.mu0, section, "mu0", 9000.0), "natural_loss.mu0")
    mu1 = _as_float(_pick(args.mu1, section, "mu1", 11000.0), "natural_loss.mu1")
    segment = _as_float(
        _pick(args.segment_m, section, "segment_length_m", 0.2),
        "natural_loss.segment_length_m",
    )
    atten = _as_float(
        _pick(args.attenuation_per_km, section, "attenuation_per_km", 0.02),
        "natural_loss.attenuation_per_km",
    )
    efficiency = _as_float(
        _pick(args.efficiency, section, "collection_efficiency", 1.0),
        "natural_loss.collection_efficiency",
    )
    if args.detectors is not None:
        counts = [int(tok) for tok in args.detectors.split(",") if tok.strip()]
    elif "detector_counts" in section:
        counts = [_as_int(v, "detector_counts") for v in section["detector_counts"]]
    else:
        counts = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]

    def scenario(n: int) -> NaturalLossScenario:
        try:
            return NaturalLossScenario(
                mu0=mu0, mu1=mu1, segment_length_m=segment, detector_count=n,
                attenuation_per_km=atten, collection_efficiency=efficiency,
            )
        except ValidationError as exc:
            raise SchemaError(f"invalid natural-loss scenario: {exc}") from None

    header = [
        "detector_count", "total_length_m", "q0", "q1",
        "info_individual", "info_collective", "holevo_phase_randomized",
        "holevo_coherent",
    ]
    rows = []
    for n in counts:
        sc = scenario(n)
        q0, q1 = click_statistics(sc)
        rows.append([
            "%d" % n, _fmt(sc.total_length_m), _fmt(q0), _fmt(q1),
            _fmt(info_individual_detectors(sc)),
            _fmt(info_collective_photon_number(sc)),
            _fmt(holevo_phase_randomized(sc)),
            _fmt(holevo_coherent(sc)),
        ])
    _write_csv(args.output, header, rows)

    requirement = required_detector_count(scenario(max(counts)))
    meta = _metadata("natural-loss", {
        "natural_loss": {
            "mu0": mu0, "mu1": mu1, "segment_length_m": segment,
            "attenuation_per_km": atten, "collection_efficiency": efficiency,
            "detector_counts": counts,
        },
    })
    meta["required_detectors"] = {
        "exact": requirement.exact,
        "ceiling": requirement.ceiling,
        "total_length_m": requirement.total_length_m,
    }
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_loss_control(args, file_cfg: dict) -> int:
    section = file_cfg.get("loss_control", {})
    if not isinstance(section, dict):
        raise SchemaError("loss_control section must be a mapping")
    gain = _as_float(_pick(args.gain, section, "gain", 10.0), "loss_control.gain")
    photons = _as_float(
        _pick(args.test_photons, section, "test_pulse_photons", 1e14),
        "loss_control.test_pulse_photons",
    )
    if args.repetitions is not None:
        reps = [int(tok) for tok in args.repetitions.split(",") if tok.strip()]
    elif "repetitions" in section:
        reps = [_as_int(v, "repetitions") for v in section["repetitions"]]
    else:
        reps = [20, 800]

    header = ["repetitions", "gain", "test_pulse_photons", "min_detectable_leakage"]
    rows = []
    for m in reps:
        try:
            value = min_detectable_leakage(m, gain, photons)
        except ValidationError as exc:
            raise SchemaError(f"invalid loss-control input: {exc}") from None
        rows.append(["%d" % m, _fmt(gain), _fmt(photons), _fmt(value)])
    _write_csv(args.output, header, rows)
    meta = _metadata("loss-control", {
        "loss_control": {
            "repetitions": reps, "gain": gain, "test_pulse_photons": photons,
        },
    })
    _write_sidecar(args.output, meta)
    return EXIT_OK


def _cmd_pa(args, file_cfg: dict) -> int:
    section = file_cfg.get("pa", {})
    if not isinstance(section, dict):
        raise SchemaError("pa section must be a mapping")
    input_path = _pick(args.input, section, "input")
    output_path = _pick(args.pa_output, section, "output")
    if input_path is None or output_path is None:
        raise SchemaError("pa needs input and output key paths")
    input_format = _pick(args.input_format, section, "input_format", "raw")
    output_format = _pick(args.output_format, section, "output_format", "raw")
    for fmt in (input_format, output_format):
        if fmt not in ("raw", "hex"):
            raise SchemaError(f"key format must be 'raw' or 'hex', got {fmt!r}")
    out_len = _pick(args.out_len, section, "out_len")
    if out_len is None:
        raise SchemaError("pa.out_len is required")
    out_len = _as_int(out_len, "pa.out_len")
    seed = _as_int(_pick(args.seed, section, "seed", 0), "pa.seed")
    bit_length = _pick(args.bit_length, section, "bit_length")
    if bit_length is not None:
        bit_length = _as_int(bit_length, "pa.bit_length")

    try:
        raw = read_key_file(input_path, input_format, bit_length)
    except OSError as exc:
        raise SchemaError(f"cannot read key file: {exc}") from None
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x70A)))
    toeplitz = random_toeplitz_seed(raw.size, out_len, rng)
    hashed = toeplitz_privacy_amplification(raw, toeplitz, out_len)
    write_key_file(hashed, output_path, output_format)

    meta = _metadata("pa", {
        "pa": {
            "input": str(input_path), "input_format": input_format,
            "output": str(output_path), "output_format": output_format,
            "out_len": out_len, "seed": seed,
            "bit_length": bit_length,
        },
    })
    meta["raw_bits"] = int(raw.size)
    _write_sidecar(str(output_path), meta)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, *, geometry: bool = True) -> None:
    sub.add_argument("--config", help="YAML config file; flags override its fields")
    sub.add_argument("--output", help="CSV output path (stdout when omitted)")
    if geometry:
        sub.add_argument("--scheme", choices=[SCHEME_PHOTON, SCHEME_PHASE])
        sub.add_argument("--span-km", type=float, dest="span_km")
        sub.add_argument("--eve-km", type=float, dest="eve_km")
        sub.add_argument("--amp-spacing-km", type=float, dest="amp_spacing_km")
        sub.add_argument("--attenuation-per-km", type=float, dest="attenuation_per_km")


def _add_encoding_flags(sub: argparse.ArgumentParser) -> None:
    for name in _PHOTON_FIELDS + _PHASE_FIELDS:
        sub.add_argument(f"--{name}", type=float)


def _add_budget_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--restarts", type=int)
    sub.add_argument("--max-evals", type=int, dest="max_evals")
    sub.add_argument("--opt-seed", type=int, dest="opt_seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcqkd",
        description="Key rates, optimization, and protocol simulation for "
                    "amplified lossy lines under tapping attacks.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    keyrate = commands.add_parser("keyrate", help="evaluate one encoding on one line")
    _add_common(keyrate)
    _add_encoding_flags(keyrate)
    keyrate.add_argument("--leak", type=float)
    keyrate.set_defaults(func=_cmd_keyrate)

    optimize = commands.add_parser("optimize", help="search encodings on one line")
    _add_common(optimize)
    _add_budget_flags(optimize)
    optimize.add_argument("--leak", type=float)
    optimize.set_defaults(func=_cmd_optimize)

    sweep = commands.add_parser("sweep", help="rate versus leak fraction curve")
    _add_common(sweep)
    _add_budget_flags(sweep)
    sweep.add_argument("--leak-grid", dest="leak_grid",
                       help="comma-separated ascending leak fractions")
    sweep.add_argument("--no-optimize-each", action="store_true",
                       help="optimize once at the lowest leak and reuse")
    sweep.set_defaults(func=_cmd_sweep)

    worst = commands.add_parser("worst-eve", help="scan Eve positions for the minimum rate")
    _add_common(worst)
    _add_budget_flags(worst)
    worst.add_argument("--leak", type=float)
    worst.set_defaults(func=_cmd_worst_eve)

    mc = commands.add_parser("montecarlo", help="simulate protocol rounds end to end")
    _add_common(mc)
    _add_encoding_flags(mc)
    mc.add_argument("--leak", type=float)
    mc.add_argument("--rounds", type=int)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--sifted-key", dest="sifted_key", help="write the sifted key here")
    mc.add_argument("--final-key", dest="final_key", help="write the hashed final key here")
    mc.add_argument("--key-format", dest="key_format", choices=["raw", "hex"])
    mc.set_defaults(func=_cmd_montecarlo)

    nl = commands.add_parser("natural-loss", help="eavesdropping on natural fiber loss")
    _add_common(nl, geometry=False)
    nl.add_argument("--mu0", type=float)
    nl.add_argument("--mu1", type=float)
    nl.add_argument("--segment-m", type=float, dest="segment_m")
    nl.add_argument("--attenuation-per-km", type=float, dest="attenuation_per_km")
    nl.add_argument("--efficiency", type=float)
    nl.add_argument("--detectors", help="comma-separated detector counts")
    nl.set_defaults(func=_cmd_natural_loss)

    lc = commands.add_parser("loss-control", help="transmittometry detection floor table")
    _add_common(lc, geometry=False)
    lc.add_argument("--repetitions", help="comma-separated repetition counts")
    lc.add_argument("--gain", type=float)
    lc.add_argument("--test-photons", type=float, dest="test_photons")
    lc.set_defaults(func=_cmd_loss_control)

    pa = commands.add_parser("pa", help="Toeplitz-hash a key file")
    _add_common(pa, geometry=False)
    pa.add_argument("--input")
    pa.add_argument("--input-format", dest="input_format", choices=["raw", "hex"])
    pa.add_argument("--bit-length", type=int, dest="bit_length")
    pa.add_argument("--pa-output", dest="pa_output", help="output key file")
    pa.add_argument("--output-format", dest="output_format", choices=["raw", "hex"])
    pa.add_argument("--out-len", type=int, dest="out_len")
    pa.add_argument("--seed", type=int)
    pa.set_defaults(func=_cmd_pa)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config_file(args.config)
        _thread_count()
    except SchemaError as exc:
        _fail("schema", str(exc))
        return EXIT_SCHEMA
    try:
        return args.func(args, file_cfg)
    except SchemaError as exc:
        _fail("schema", str(exc))
        return EXIT_SCHEMA
    except InfeasibleError as exc:
        _fail("infeasible", str(exc))
        return EXIT_INFEASIBLE
    except TruncationError as exc:
        _fail("quadrature", str(exc))
        return EXIT_QUADRATURE
    except ValidationError as exc:
        _fail("runtime", str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _fail("runtime", str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
