"""Command-line entry point: ``sweep``, ``compare`` and ``presets``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(exhausted cutoff or a failed convergence check).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from . import engine
from .fock import NumericalError
from .model import BACKENDS, PRESETS, ValidationError, validate
from .perturbative import NotDerivedError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

SWEEP_HEADER = ("omega_t", "t", "witness", "order_n", "order_m", "backend", "value")
COMPARE_HEADER = ("omega_t", "t", "witness", "order_n", "order_m", "perturbative", "exact", "residual")


class UsageError(Exception):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _order(v) -> str:
    return "" if v is None else str(v)


def load_config(target: str) -> cfgmod.ExperimentConfig:
    """A config file path, or the name of a shipped preset."""
    path = Path(target)
    if path.is_file():
        return cfgmod.load(path)
    if target in PRESETS:
        return cfgmod.ExperimentConfig.from_preset(target)
    raise UsageError(f"{target!r} is neither a config file nor a preset ({', '.join(PRESETS)})")


def apply_flags(cfg: cfgmod.ExperimentConfig, args) -> cfgmod.ExperimentConfig:
    changes = {}
    if getattr(args, "backend", None):
        changes["backend"] = args.backend
    if args.out:
        changes["output_dir"] = args.out
    if args.cutoff_a is not None:
        changes["cutoff_a"] = args.cutoff_a
    if args.cutoff_b is not None:
        changes["cutoff_b"] = args.cutoff_b
    if args.tolerance is not None:
        changes["tolerance"] = args.tolerance
    return replace(cfg, **changes)


def exact_options(cfg) -> engine.ExactOptions:
    return engine.ExactOptions(cfg.cutoff_a, cfg.cutoff_b, cfg.tolerance, cfg.method)


def coeff_hook(cfg):
    if cfg.corrupt is None:
        return None
    name, factor = cfg.corrupt
    return lambda c: c.scaled(name, factor)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def sweep_rows(series: list[engine.WitnessSeries]):
    """Rows ordered grid point first, then kind, then backend (input order)."""
    if not series:
        return []
    grid = series[0].grid
    params = series[0].params
    rows = []
    for i, wt in enumerate(grid):
        for s in series:
            rows.append((_num(wt), _num(wt / params.omega), s.kind.tag, _order(s.kind.n),
                         _order(s.kind.m), s.backend, _num(s.values[i])))
    return rows


def run_sweep(cfg: cfgmod.ExperimentConfig, force: bool = False, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    grid = cfg.time_grid
    report = validate(cfg.params, grid, cfg.backend)
    for msg in report.errors:
        print(f"error: {msg}", file=err)
    for msg in report.warnings:
        print(f"warning: {msg}", file=err)
    if report.fatal:
        return EXIT_USAGE
    if report.warnings and not force:
        print("refusing to run with warnings; pass --force to proceed", file=err)
        return EXIT_USAGE
    if cfg.backend == "both":
        for k in cfg.kinds:
            if not k.has_closed_form:
                print(f"note: {k} is exact-only; no perturbative rows", file=err)
    series = engine.sweep(cfg.params, grid, cfg.kinds, cfg.backend, exact=exact_options(cfg),
                          corrected=cfg.corrected, coeff_hook=coeff_hook(cfg))
    path = Path(cfg.output_dir) / f"{cfg.name}.csv"
    write_csv(path, SWEEP_HEADER, sweep_rows(series))
    for s in series:
        reg = engine.regions(s)
        spans = ", ".join(f"[{a:.4g}, {b:.4g}]" for a, b in reg.intervals) or "none"
        print(f"{s.kind.label:16s} {s.backend:12s} below {reg.threshold:g}: {spans}", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def run_compare(cfg: cfgmod.ExperimentConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    ladder = cfg.ladder if cfg.ladder is not None else cfg.time_grid.samples
    kinds = []
    for k in cfg.kinds:
        if k.has_closed_form:
            kinds.append(k)
        else:
            print(f"warning: skipping exact-only witness {k}", file=err)
    if not kinds:
        print("error: no dual-backend witnesses to compare", file=err)
        return EXIT_USAGE
    try:
        pts = engine.check_ladder(ladder)
    except engine.DegenerateLadderError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    reports = engine.compare_many(cfg.params, pts, kinds, exact=exact_options(cfg),
                                  corrected=cfg.corrected, coeff_hook=coeff_hook(cfg),
                                  min_slope=cfg.min_slope, tolerance=cfg.residual_tolerance)
    rows = []
    for i, wt in enumerate(pts):
        for r in reports:
            rows.append((_num(wt), _num(wt / cfg.params.omega), r.kind.tag, _order(r.kind.n),
                         _order(r.kind.m), _num(r.perturbative[i]), _num(r.exact[i]),
                         _num(r.residuals[i])))
    path = Path(cfg.output_dir) / f"{cfg.name}_compare.csv"
    write_csv(path, COMPARE_HEADER, rows)
    print(f"{'witness':16s} {'max residual':>13s} {'slope':>7s}  result", file=out)
    for r in reports:
        verdict = "PASS" if r.passed else "FAIL"
        why = []
        if not r.slope_ok:
            why.append(f"slope < {r.min_slope:g}")
        if not r.residual_ok:
            why.append(f"residual > {r.tolerance:g}")
        tail = f" ({'; '.join(why)})" if why else ""
        print(f"{r.kind.label:16s} {r.max_abs_residual:13.3e} {r.slope:7.2f}  {verdict}{tail}", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC


def list_presets(out=None) -> int:
    out = out or sys.stdout
    for p in PRESETS.values():
        q = p.params
        kinds = ", ".join(k.label for k in p.kinds)
        print(f"{p.name:6s} alpha={q.alpha.real:g}{q.alpha.imag:+g}j beta={q.beta.real:g}{q.beta.imag:+g}j "
              f"omega={q.omega:g} delta={q.delta:g} omega_t=(0, {p.omega_t_max:g}] x{p.samples}  "
              f"{p.source}: {kinds}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="atommol", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="config file or preset name")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--cutoff-a", type=int, dest="cutoff_a")
        p.add_argument("--cutoff-b", type=int, dest="cutoff_b")
        p.add_argument("--tolerance", type=float)

    s = sub.add_parser("sweep", help="evaluate witnesses over a time grid and write CSV")
    common(s)
    s.add_argument("--backend", choices=BACKENDS)
    s.add_argument("--force", action="store_true", help="run despite validation warnings")
    c = sub.add_parser("compare", help="cross-backend residuals and convergence slopes")
    common(c)
    sub.add_parser("presets", help="list figure presets")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "presets":
        return list_presets()
    try:
        cfg = apply_flags(load_config(args.config), args)
        if args.command == "sweep":
            return run_sweep(cfg, force=args.force)
        return run_compare(cfg)
    except (UsageError, cfgmod.ConfigError, ValidationError, NotDerivedError,
            engine.ExactOnlyWitnessError, engine.DegenerateLadderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        cfg_ctx = locals().get("cfg")
        ctx = ""
        if cfg_ctx is not None:
            p = cfg_ctx.params
            ctx = f" [omega={p.omega:g}, delta={p.delta:g}, alpha={p.alpha}, beta={p.beta}]"
        print(f"numerical failure: {exc}{ctx}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
