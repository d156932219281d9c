"""End-to-end command tests driven through ``lcqkd.cli.main``.

Each test runs the real argument parser and command body in-process and
inspects the CSV/JSON artifacts.  One subprocess test pins the module
entry point itself.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lcqkd.cli import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_SCHEMA,
    THREADS_ENV,
    main,
)
from lcqkd.protocol import (
    random_toeplitz_seed,
    read_key_file,
    toeplitz_privacy_amplification,
    write_key_file,
)

PHASE_ARGS = [
    "--scheme", "phase", "--span-km", "100", "--eve-km", "50",
    "--leak", "1e-5", "--gamma", "30", "--theta1p", "3", "--theta2p", "120",
]

# frozen from a verified run; the rate layer is oracle-tested elsewhere,
# this pins the CSV column set and %.12g formatting
PHASE_GOLDEN = (
    "r_E,D_AE_km,rate,gamma_sq,theta1p,theta2p,i_ab,eve_bound,p_conclusive\n"
    "1e-05,50,0.925869078519,900,3,120,1,0.0741309214809,1\n"
)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestKeyrate:
    def test_stdout_golden(self, capsys):
        assert main(["keyrate"] + PHASE_ARGS) == EXIT_OK
        assert capsys.readouterr().out == PHASE_GOLDEN

    def test_photon_columns(self, tmp_path):
        out = tmp_path / "kr.csv"
        code = main([
            "keyrate", "--scheme", "photon-number", "--span-km", "100",
            "--eve-km", "50", "--leak", "1e-5",
            "--mu0", "4", "--mu1", "6", "--theta1", "1.5", "--theta2", "0.5",
            "--theta3", "4.5", "--theta4", "30", "--output", str(out),
        ])
        assert code == EXIT_OK
        (row,) = read_rows(out)
        assert set(row) == {
            "r_E", "D_AE_km", "rate", "mu0", "mu1", "theta1", "theta2",
            "theta3", "theta4", "i_ab", "eve_bound", "p_conclusive",
        }
        assert float(row["mu0"]) == 4.0
        assert 0.0 <= float(row["rate"]) <= 1.0

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "scheme: phase\n"
            "geometry: {span_km: 100, eve_position_km: 50}\n"
            "leak_fraction: 1.0e-5\n"
            "encoding: {gamma: 30, theta1p: 3, theta2p: 120}\n"
        )
        assert main(["keyrate", "--config", str(cfg)]) == EXIT_OK
        assert capsys.readouterr().out == PHASE_GOLDEN
        assert main(["keyrate", "--config", str(cfg), "--gamma", "40"]) == EXIT_OK
        override = capsys.readouterr().out
        assert override != PHASE_GOLDEN
        assert override.splitlines()[1].split(",")[3] == "1600"

    def test_sidecar_metadata(self, tmp_path):
        out = tmp_path / "kr.csv"
        assert main(["keyrate"] + PHASE_ARGS + ["--output", str(out)]) == EXIT_OK
        meta = json.loads((tmp_path / "kr.json").read_text())
        assert meta["command"] == "keyrate"
        assert meta["config"]["geometry"]["span_km"] == 100.0
        assert meta["config"]["encoding"]["gamma_sq"] == 900.0
        assert set(meta["versions"]) == {"artifact", "python", "numpy", "scipy"}
        assert meta["threads"] == 1

    def test_no_sidecar_without_output(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["keyrate"] + PHASE_ARGS) == EXIT_OK
        capsys.readouterr()
        assert list(tmp_path.iterdir()) == []


class TestSchemaFailures:
    def check(self, argv, capsys):
        assert main(argv) == EXIT_SCHEMA
        err = json.loads(capsys.readouterr().err)
        assert err["category"] == "schema"
        assert err["message"]

    def test_missing_span(self, capsys):
        self.check(["keyrate", "--scheme", "phase", "--leak", "1e-5",
                    "--gamma", "30", "--theta1p", "3", "--theta2p", "120"], capsys)

    def test_missing_encoding_field(self, capsys):
        self.check(["keyrate", "--scheme", "phase", "--span-km", "100",
                    "--eve-km", "50", "--leak", "1e-5", "--gamma", "30"], capsys)

    def test_leak_out_of_range(self, capsys):
        self.check(["keyrate"] + PHASE_ARGS[:-6] + ["--leak", "1.5", "--gamma",
                    "30", "--theta1p", "3", "--theta2p", "120"], capsys)

    def test_invalid_encoding_values(self, capsys):
        self.check(["keyrate"] + PHASE_ARGS[:-2] + ["--theta2p", "-1"], capsys)

    def test_broken_yaml(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("geometry: [unclosed\n")
        self.check(["keyrate", "--config", str(cfg)], capsys)

    def test_non_mapping_config(self, tmp_path, capsys):
        cfg = tmp_path / "list.yaml"
        cfg.write_text("- 1\n- 2\n")
        self.check(["keyrate", "--config", str(cfg)], capsys)

    def test_bad_thread_env(self, capsys, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        self.check(["keyrate"] + PHASE_ARGS, capsys)

    def test_unknown_scheme_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["keyrate", "--scheme", "polarization"])
        assert exc.value.code == EXIT_SCHEMA

    def test_descending_sweep_grid(self, capsys):
        self.check([
            "sweep", "--scheme", "phase", "--span-km", "100", "--eve-km", "50",
            "--leak-grid", "1e-4,1e-5", "--restarts", "1", "--max-evals", "10",
        ], capsys)


class TestOptimizeCommand:
    def test_infeasible_exit_still_writes_output(self, tmp_path, capsys):
        out = tmp_path / "opt.csv"
        code = main([
            "optimize", "--scheme", "phase", "--span-km", "100", "--eve-km",
            "50", "--leak", "0.9", "--restarts", "2", "--max-evals", "60",
            "--output", str(out),
        ])
        assert code == EXIT_INFEASIBLE
        assert json.loads(capsys.readouterr().err)["category"] == "infeasible"
        (row,) = read_rows(out)
        assert float(row["rate"]) == 0.0
        assert json.loads((tmp_path / "opt.json").read_text())["infeasible"] is True

    def test_feasible_search(self, tmp_path):
        out = tmp_path / "opt.csv"
        code = main([
            "optimize", "--scheme", "phase", "--span-km", "100", "--eve-km",
            "50", "--leak", "1e-5", "--restarts", "2", "--max-evals", "80",
            "--output", str(out),
        ])
        assert code == EXIT_OK
        (row,) = read_rows(out)
        assert float(row["rate"]) > 0.9
        meta = json.loads((tmp_path / "opt.json").read_text())
        assert meta["infeasible"] is False
        assert meta["evaluations"] > 40


class TestSweepCommand:
    def test_fixed_encoding_sweep(self, tmp_path):
        out = tmp_path / "sw.csv"
        code = main([
            "sweep", "--scheme", "phase", "--span-km", "100", "--eve-km", "50",
            "--leak-grid", "1e-6,1e-5,1e-4", "--no-optimize-each",
            "--restarts", "2", "--max-evals", "60", "--output", str(out),
        ])
        assert code == EXIT_OK
        rows = read_rows(out)
        assert [float(r["r_E"]) for r in rows] == [1e-6, 1e-5, 1e-4]
        rates = [float(r["rate"]) for r in rows]
        assert rates == sorted(rates, reverse=True)
        assert len({r["gamma_sq"] for r in rows}) == 1
        meta = json.loads((tmp_path / "sw.json").read_text())
        assert meta["config"]["optimize_each"] is False


class TestMonteCarloCommand:
    def test_run_with_key_files(self, tmp_path):
        out = tmp_path / "mc.csv"
        sifted = tmp_path / "sifted.bin"
        final = tmp_path / "final.bin"
        code = main([
            "montecarlo", *PHASE_ARGS, "--rounds", "4000", "--seed", "11",
            "--output", str(out), "--sifted-key", str(sifted),
            "--final-key", str(final),
        ])
        assert code == EXIT_OK
        (row,) = read_rows(out)
        assert int(row["rounds"]) == 4000
        conclusive = int(row["conclusive"])
        assert 0 < conclusive <= 4000
        table_mass = sum(float(row[k]) for k in ("p00", "p01", "p10", "p11"))
        assert table_mass == pytest.approx(2.0, abs=0.1)
        sifted_bits = read_key_file(sifted, "raw", conclusive)
        assert sifted_bits.size == conclusive
        final_bits_expected = min(int(row["final_bits"]), conclusive)
        final_bits = read_key_file(final, "raw", final_bits_expected)
        assert final_bits.size == final_bits_expected
        meta = json.loads((tmp_path / "mc.json").read_text())
        assert meta["conclusive"] == conclusive
        assert meta["key_files"] == {"sifted": str(sifted), "final": str(final)}

    def test_rejects_bad_rounds(self, capsys):
        assert main([
            "montecarlo", *PHASE_ARGS, "--rounds", "0",
        ]) == EXIT_SCHEMA
        assert json.loads(capsys.readouterr().err)["category"] == "schema"


class TestNaturalLossCommand:
    def test_table(self, tmp_path):
        out = tmp_path / "nl.csv"
        code = main([
            "natural-loss", "--detectors", "10,100,1000", "--output", str(out),
        ])
        assert code == EXIT_OK
        rows = read_rows(out)
        assert [int(r["detector_count"]) for r in rows] == [10, 100, 1000]
        infos = [float(r["info_individual"]) for r in rows]
        assert infos == sorted(infos)
        for row in rows:
            assert 0.0 < float(row["q0"]) < float(row["q1"]) < 1.0
            assert float(row["info_individual"]) <= float(row["info_collective"]) + 1e-12
        meta = json.loads((tmp_path / "nl.json").read_text())
        assert 900 <= meta["required_detectors"]["ceiling"] <= 1100


class TestLossControlCommand:
    def test_default_table(self, capsys):
        assert main(["loss-control"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "repetitions,gain,test_pulse_photons,min_detectable_leakage"
        assert lines[1].split(",")[3] == "1.41421356237e-06"
        assert lines[2].split(",")[3] == "8.94427191e-06"


class TestPaCommand:
    def test_matches_library_hash(self, tmp_path):
        rng = np.random.default_rng(99)
        raw = rng.integers(0, 2, 500, dtype=np.uint8)
        src = tmp_path / "raw.bin"
        dst = tmp_path / "out.hex"
        write_key_file(raw, src, "raw")
        code = main([
            "pa", "--input", str(src), "--bit-length", "500",
            "--pa-output", str(dst), "--output-format", "hex",
            "--out-len", "128", "--seed", "21",
        ])
        assert code == EXIT_OK
        got = read_key_file(dst, "hex", 128)
        seed = random_toeplitz_seed(
            500, 128, np.random.default_rng(np.random.SeedSequence((21, 0x70A)))
        )
        expected = toeplitz_privacy_amplification(raw, seed, 128)
        assert np.array_equal(got, expected)
        meta = json.loads((tmp_path / "out.json").read_text())
        assert meta["raw_bits"] == 500

    def test_zero_key_hashes_to_zero(self, tmp_path):
        src = tmp_path / "zero.bin"
        dst = tmp_path / "hashed.bin"
        write_key_file(np.zeros(64, dtype=np.uint8), src, "raw")
        assert main([
            "pa", "--input", str(src), "--bit-length", "64",
            "--pa-output", str(dst), "--out-len", "16", "--seed", "4",
        ]) == EXIT_OK
        assert not read_key_file(dst, "raw", 16).any()

    def test_missing_paths(self, capsys):
        assert main(["pa", "--out-len", "16"]) == EXIT_SCHEMA
        assert json.loads(capsys.readouterr().err)["category"] == "schema"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lcqkd.cli", "keyrate", *PHASE_ARGS],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_OK
    assert proc.stdout == PHASE_GOLDEN
