import csv
import subprocess
import sys
from pathlib import Path

import pytest

from atommol import cli
from atommol.config import ExperimentConfig, GridSpec, dump
from atommol.model import PRESETS, parse_kinds

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets_listing(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out
    lines = {ln.split()[0]: ln for ln in out.splitlines()}
    assert "alpha=5+0j beta=2+0j" in lines["fig1"]
    assert "alpha=5+0j beta=-2+0j" in lines["fig1d"]
    assert "alpha=10+0j beta=-2+0j" in lines["fig3d"]
    assert "Fig. 1" in lines["fig1"]


def test_sweep_preset_fig4(tmp_path):
    assert cli.main(["sweep", "fig4", "--out", str(tmp_path)]) == 0
    path = tmp_path / "fig4.csv"
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"omega_t,t,witness,order_n,order_m,backend,value"
    rows = read_rows(path)
    assert len(rows) == 200 * 3
    assert [r["witness"] for r in rows[:3]] == ["HZ1", "HZ2", "Duan"]
    # each grid point shows entanglement through at least one Hillery-Zubairy witness
    for i in range(0, len(rows), 3):
        assert min(float(rows[i]["value"]), float(rows[i + 1]["value"])) < 0


def test_sweep_output_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "fig3", "--out", str(a)]) == 0
    assert cli.main(["sweep", "fig3", "--out", str(b)]) == 0
    assert (a / "fig3.csv").read_bytes() == (b / "fig3.csv").read_bytes()


def test_csv_values_are_engine_values_at_17_digits(tmp_path):
    from atommol import sweep
    cfg = ExperimentConfig.from_preset("fig2", grid=GridSpec(0.5, 7))
    assert cli.main(["sweep", write_cfg(tmp_path, dump(cfg)), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "fig2.csv")
    series = sweep(cfg.params, cfg.time_grid, cfg.kinds)
    expected = [s.values[i] for i in range(7) for s in series]
    assert [float(r["value"]) for r in rows] == expected
    assert all(r["value"] == format(v, ".17g") for r, v in zip(rows, expected))


def test_zero_only_grid_gives_baselines(tmp_path):
    text = ("[experiment]\nname = zero\npreset = fig1\n[grid]\npoints = 0\n"
            "[witnesses]\nkinds = VarXa, VarYb, Dab, HZ1, HOAb(3)\n[numerics]\nbackend = both\n")
    assert cli.main(["sweep", write_cfg(tmp_path, text), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "zero.csv")
    assert len(rows) == 10
    for r in rows:
        base = 0.25 if r["witness"].startswith("Var") else 0.0
        assert abs(float(r["value"]) - base) < 1e-9
    assert rows[-1]["order_n"] == "3" and rows[0]["order_n"] == ""


def test_fig1_both_backends_interleave(tmp_path):
    cfg = ExperimentConfig.from_preset("fig1", grid=GridSpec(0.5, 4), backend="both")
    assert cli.main(["sweep", write_cfg(tmp_path, dump(cfg)), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "fig1.csv")
    assert [r["backend"] for r in rows[:4]] == ["perturbative", "exact"] * 2
    assert len(rows) == 4 * 6 * 2


def test_validity_warning_requires_force(tmp_path, capsys):
    cfg = ExperimentConfig.from_preset("fig3", grid=GridSpec(1.5, 5), name="late")
    path = write_cfg(tmp_path, dump(cfg))
    assert cli.main(["sweep", path, "--out", str(tmp_path)]) == 1
    assert "outside stated validity" in capsys.readouterr().err
    assert cli.main(["sweep", path, "--out", str(tmp_path), "--force"]) == 0


def test_config_errors_exit_one(tmp_path, capsys):
    assert cli.main(["sweep", write_cfg(tmp_path, "[params]\nspeed = 3\n")]) == 1
    assert ":2:" in capsys.readouterr().err
    assert cli.main(["sweep", "no-such-thing"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_exact_only_kind_with_perturbative_backend(tmp_path, capsys):
    text = "[experiment]\npreset = fig1\n[witnesses]\nkinds = LeeR(2,1,a)\n"
    assert cli.main(["sweep", write_cfg(tmp_path, text), "--out", str(tmp_path)]) == 1
    assert "exact backend" in capsys.readouterr().err


def test_cutoff_exhaustion_exit_two(tmp_path, capsys):
    text = ("[experiment]\nname = small\n[params]\nomega = 100\ndelta = 1e4\nalpha = 2\nbeta = 1\n"
            "[grid]\npoints = 0.5\n[witnesses]\nkinds = Da\n[numerics]\nbackend = exact\n")
    rc = cli.main(["sweep", write_cfg(tmp_path, text), "--out", str(tmp_path),
                   "--cutoff-a", "12", "--cutoff-b", "8"])
    assert rc == 2
    assert "alpha=" in capsys.readouterr().err


LADDER = ("[experiment]\nname = lad\n[params]\nomega = 100\ndelta = 1e4\nalpha = 2\nbeta = 1\n"
          "[witnesses]\nkinds = {kinds}\n[compare]\nladder = 0.2, 0.1, 0.05, 0.025\n{extra}")


def test_compare_reference_ladder_passes(tmp_path, capsys):
    path = write_cfg(tmp_path, LADDER.format(kinds="VarXa, LeeR(2,1,a)", extra=""))
    assert cli.main(["compare", path, "--out", str(tmp_path)]) == 0
    cap = capsys.readouterr()
    assert "skipping exact-only witness LeeR(2,1,a)" in cap.err
    assert "VarXa" in cap.out and "PASS" in cap.out
    rows = read_rows(tmp_path / "lad_compare.csv")
    assert len(rows) == 4 and float(rows[0]["omega_t"]) == 0.2


def test_compare_fault_injection_fails(tmp_path, capsys):
    path = write_cfg(tmp_path, LADDER.format(kinds="VarXa", extra="corrupt = f2*1.5\n"))
    assert cli.main(["compare", path, "--out", str(tmp_path)]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_compare_degenerate_ladder(tmp_path, capsys):
    text = LADDER.format(kinds="VarXa", extra="").replace("ladder = 0.2, 0.1, 0.05, 0.025", "ladder = 0")
    assert cli.main(["compare", write_cfg(tmp_path, text)]) == 1
    assert "ladder" in capsys.readouterr().err


def test_compare_residual_tolerance(tmp_path):
    path = write_cfg(tmp_path, LADDER.format(kinds="VarXa", extra="residual_tolerance = 1e-9\n"))
    assert cli.main(["compare", path, "--out", str(tmp_path)]) == 2


def test_tolerance_flag_reaches_config(tmp_path):
    cfg = cli.load_config("fig1")
    args = cli.build_parser().parse_args(["sweep", "fig1", "--tolerance", "1e-7", "--backend", "exact"])
    out = cli.apply_flags(cfg, args)
    assert out.tolerance == 1e-7 and out.backend == "exact"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "atommol", "presets"], capture_output=True, text=True)
    assert proc.returncode == 0 and "fig5" in proc.stdout


def test_shipped_configs_parse():
    for path in sorted((ROOT / "configs").glob("*.cfg")):
        cfg = cli.load_config(str(path))
        assert cfg.kinds
