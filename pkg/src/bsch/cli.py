"""``bsch`` command-line entry point.

Subcommands::

    bsch run <config>            one trajectory with diagnostics
    bsch sweep <config>          parameter sweep from the config's "sweep" section
    bsch validate [<config>]     potential assumptions and operator properties
    bsch replay-check <run-dir>  recompute state columns from saved snapshots

Output goes under ``--out`` (default ``./out``).  Exit status: 0 success,
1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import grid as G
from .config import ParseError, RunConfig, ValidationError, defaults_text, parse_config
from .errors import BschError
from .experiments import RunResult, execute, replay_check, run_sweep
from .potentials import validate_assumptions

__all__ = ["main", "parse_config", "check_run", "operator_checks"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MASS_TOL = 1e-10
ENERGY_TOL = 1e-10

_RUN_PLOT = """\
# gnuplot script: energy and separation against time
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set xlabel 't'
set output 'energy.png'
set ylabel 'energy'
plot 'series.csv' using 1:4 with lines title 'total energy'
set output 'separation.png'
set ylabel '1 - max |field|'
plot 'series.csv' using 1:12 with lines title 'bulk', '' using 1:13 with lines title 'surface'
"""

_SWEEP_PLOT = """\
# gnuplot script: distance between consecutive sweep members
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'sweep_distance.png'
set logscale y
set xlabel '{param}'
set ylabel 'max-in-time L2 distance to next member'
plot 'summary.csv' using 1:6 with linespoints title 'pairwise distance'
"""


def check_run(result: RunResult, singular: bool) -> list[str]:
    """Invariant violations of one run, each naming the offending record or step."""
    problems = []
    recs = result.records
    m0, ms0 = recs[0].mass_bulk, recs[0].mass_surf
    for k, r in enumerate(recs):
        if abs(r.mass_bulk - m0) > MASS_TOL or abs(r.mass_surf - ms0) > MASS_TOL:
            problems.append(f"mass conservation violated at record {k} (t={r.t!r}): "
                            f"bulk drift {r.mass_bulk - m0:.3e}, surface drift {r.mass_surf - ms0:.3e}")
        if singular and not (r.sep_bulk > 0 and r.sep_surf > 0):
            problems.append(f"separation lost at record {k} (t={r.t!r})")
    for n, rpt in enumerate(result.reports, start=1):
        if rpt.energy_after > rpt.energy_before + ENERGY_TOL:
            problems.append(f"energy increased at step {n}: {rpt.energy_before!r} -> {rpt.energy_after!r}")
    return problems


def operator_checks(g: G.Grid, seed: int = 0) -> list[tuple[str, bool, float]]:
    """Discrete operator identities on random fields: ``(name, passed, defect)``."""
    rng = np.random.default_rng(seed)
    u, w = rng.standard_normal(g.bulk_shape), rng.standard_normal(g.bulk_shape)
    v, z = rng.standard_normal(g.surf_shape), rng.standard_normal(g.surf_shape)
    Lu, Lw = G.laplace_bulk(g, u), G.laplace_bulk(g, w)
    scale = float(np.max(np.abs(Lu))) * g.area
    out = []

    def add(name, defect, tol):
        out.append((name, bool(defect <= tol), float(defect)))

    add("bulk Laplacian symmetric", abs(G.inner_bulk(g, Lu, w) - G.inner_bulk(g, u, Lw)), 1e-12 * scale)
    add("bulk Laplacian annihilates constants",
        float(np.max(np.abs(G.laplace_bulk(g, np.full(g.bulk_shape, 3.0))))), 1e-10)
    add("bulk divergence theorem", abs(G.integrate_bulk(g, Lu)), 1e-12 * scale)
    add("bulk Dirichlet form", abs(G.dirichlet_energy_bulk(g, u) + 0.5 * G.inner_bulk(g, Lu, u)), 1e-12 * scale)
    Lv, Lz = G.laplace_surface(g, v), G.laplace_surface(g, z)
    s_scale = float(np.max(np.abs(Lv))) * g.perimeter
    add("surface Laplacian symmetric", abs(G.inner_surface(g, Lv, z) - G.inner_surface(g, v, Lz)), 1e-12 * s_scale)
    add("surface divergence theorem", abs(G.integrate_surface(g, Lv)), 1e-12 * s_scale)
    add("surface Dirichlet form",
        abs(G.dirichlet_energy_surface(g, v) + 0.5 * G.inner_surface(g, Lv, v)), 1e-12 * s_scale)
    lin = G.laplace_bulk(g, 2.0 * u - 3.0 * w) - (2.0 * Lu - 3.0 * Lw)
    add("bulk Laplacian linear", float(np.max(np.abs(lin))), 1e-12 * float(np.max(np.abs(Lu)) + np.max(np.abs(Lw))) * 5)
    return out


def _load(path: str) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out) / cfg["output"]["directory"]


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    out = _out_dir(args, cfg)
    sc = cfg.scenario()
    result = execute(sc, out)
    if cfg["output"]["emit_plots"]:
        (out / "plot.gp").write_text(_RUN_PLOT)
    last = result.records[-1]
    print(f"run: {out} steps={sc.n_steps} halvings={result.halvings} final_energy={last.energy!r} "
          f"min_separation={result.min_separation!r} mass_drift={result.mass_drift!r}")
    problems = check_run(result, sc.params.singular)
    for msg in problems:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_FAIL if problems else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args.config)
    spec = cfg.sweep_spec()
    out = _out_dir(args, cfg)
    report = run_sweep(spec, out)
    if cfg["output"]["emit_plots"]:
        (out / "sweep" / "plot.gp").write_text(_SWEEP_PLOT.format(param=spec.param.value))
    status = EXIT_OK
    for v, r in zip(spec.values, report.runs):
        print(f"{spec.run_id(v)}: final_energy={r.final_energy!r} min_separation={r.min_separation!r} "
              f"mass_drift={r.mass_drift!r}")
        for msg in check_run(r, r.scenario.params.singular):
            print(f"FAIL {spec.run_id(v)}: {msg}", file=sys.stderr)
            status = EXIT_FAIL
    for d in report.pairwise:
        print(f"distance {d.a!r} -> {d.b!r}: bulk={d.bulk!r} surf={d.surf!r} combined={d.combined!r}")
    return status


def _cmd_validate(args) -> int:
    if args.print_defaults:
        sys.stdout.write(defaults_text())
        return EXIT_OK
    if args.config is None:
        print("validate: a config path is required unless --print-defaults is given", file=sys.stderr)
        return EXIT_USAGE
    cfg = _load(args.config)
    p = cfg.params()
    rep = validate_assumptions(p.potential_bulk, p.potential_surf)
    ok = rep.all_passed
    for line in rep.lines():
        print(line)
    for name, passed, defect in operator_checks(cfg.grid()):
        print(f"{name}: {'pass' if passed else 'FAIL'} [defect={defect:.3e}]")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_replay(args) -> int:
    target = Path(args.run_dir)
    if not target.exists() and not target.is_absolute():
        target = Path(args.out) / target
    if not target.exists():
        print(f"replay-check: {target} does not exist", file=sys.stderr)
        return EXIT_USAGE
    runs = sorted(p.parent for p in target.rglob("run.json"))
    if not runs:
        print(f"replay-check: no run directories under {target}", file=sys.stderr)
        return EXIT_FAIL
    status = EXIT_OK
    for d in runs:
        rep = replay_check(d)
        print(f"{d}: {'ok' if rep.ok else 'FAIL'} ({rep.checked} snapshots)")
        for msg in rep.failures:
            print(f"FAIL {msg}", file=sys.stderr)
        if not rep.ok:
            status = EXIT_FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bsch", description="Bulk-surface Cahn-Hilliard simulator")
    ap.add_argument("--out", default="out", help="output root directory (default ./out)")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one trajectory")
    p.add_argument("config")
    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("config")
    p = sub.add_parser("validate", help="check potential assumptions and operator identities")
    p.add_argument("config", nargs="?")
    p.add_argument("--print-defaults", action="store_true", help="print the default configuration")
    p = sub.add_parser("replay-check", help="recompute diagnostics from snapshots")
    p.add_argument("run_dir")
    # --out is accepted after the subcommand too
    for sp in sub.choices.values():
        sp.add_argument("--out", default=argparse.SUPPRESS)
    return ap


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate, "replay-check": _cmd_replay}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"{getattr(args, 'config', '')}: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        for path, msg in exc.errors:
            print(f"{getattr(args, 'config', '')}: {path}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BschError as exc:
        print(f"FAIL {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
