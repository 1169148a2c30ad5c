"""
Command-line entry point:  tumblekin CONFIG.ini [--G X] [--I N] [--J N]

Exit status: 0 success, 2 configuration error, 3 a solve did not converge,
4 numerical failure.  Every output file is assembled in memory and written
only after all solves finish; nothing is written if validation fails.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import convergence_study, flux_residuals, verify_suite
from .coefficients import compute_coefficients, drift_sweep, mean_velocity
from .config import ConfigError, RunConfig, load_config
from .corrector import solve_corrector, source_diffusion, source_drift
from .equilibrium import NumericalFailure, SolveReport, SolverConfig, solve_equilibrium
from .mesh import GridField, Mesh, build_mesh, row_averages
from .tumbling import TumblingModel

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERIC = 0, 2, 3, 4
WORKERS_ENV = "TUMBLEKIN_WORKERS"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def field_csv(mesh: Mesh, f: GridField, name: str = "Q") -> str:
    """
    One row per node (side empty, or ``M`` for the display mean on the
    diagonal) followed by the two one-sided diagonal values as ``L`` / ``R``.
    """
    yy = np.repeat(mesh.y, mesh.nv)
    vv = np.tile(mesh.v, mesh.ny)
    side = np.full(mesh.ny * mesh.nv, "", dtype=object)
    side[np.arange(mesh.ny) * mesh.nv + mesh.diag_columns] = "M"
    dv = mesh.v[mesh.diag_columns]
    f17 = np.vectorize(lambda x: format(float(x), ".17g"), otypes=[object])
    body = [f17(yy), f17(vv), f17(f.interior.ravel()), side]
    lines = [f"y,v,{name},side"]
    lines.extend(",".join(r) for r in zip(*body))
    for i in range(mesh.ny):
        for s, val in (("L", f.diag_left[i]), ("R", f.diag_right[i])):
            lines.append(f"{fmt(mesh.y[i])},{fmt(dv[i])},{fmt(val)},{s}")
    return "\n".join(lines) + "\n"


def moments_csv(mesh: Mesh, Q0: GridField) -> str:
    avg = row_averages(mesh, Q0)
    avg_v = row_averages(mesh, Q0.multiply_columns(mesh, mesh.v))
    res = flux_residuals(mesh, Q0)
    return csv_text(["y", "avgQ", "avgVQ", "flux_residual"], zip(mesh.y, avg, avg_v, res))


def report_text(title: str, cfg: RunConfig, items: dict) -> str:
    lines = [f"# {title}", f"version = {__version__}"]
    for fl in fields(RunConfig):
        val = getattr(cfg, fl.name)
        if isinstance(val, list):
            val = " ".join(fmt(x) for x in val)
        if val is None:
            val = "auto" if fl.name == "dt" else "none"
        lines.append(f"{fl.name} = {fmt(val)}")
    for k, v in items.items():
        lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def _solve_items(prefix: str, rep: SolveReport) -> dict:
    return {
        f"{prefix}.steps_taken": rep.steps_taken,
        f"{prefix}.final_residual": rep.final_residual,
        f"{prefix}.converged": rep.converged,
        f"{prefix}.mass_history_max_deviation": rep.mass_history_max_deviation,
        f"{prefix}.reason": rep.reason,
    }


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        logger.warning("ignoring %s=%r", WORKERS_ENV, raw)
        return 1


def execute(cfg: RunConfig) -> tuple[dict[str, str], bool]:
    """Run one command; returns (file name -> contents, all converged)."""
    model = TumblingModel(lambda0_bar=cfg.lambda0_bar, chi=cfg.chi)
    solver = SolverConfig(dt=cfg.dt, tol=cfg.tol, cadence=cfg.cadence, max_steps=cfg.max_steps)
    files: dict[str, str] = {}
    cmd = cfg.command

    if cmd in ("solve", "corrector"):
        mesh = build_mesh(cfg.G, cfg.I, cfg.J)
        Q0, rep = solve_equilibrium(mesh, model, solver)
        items = _solve_items("equilibrium", rep)
        ok = rep.converged
        files["q0.csv"] = field_csv(mesh, Q0)
        files["moments.csv"] = moments_csv(mesh, Q0)
        if cmd == "corrector":
            v0 = mean_velocity(mesh, Q0)
            h, rep_h = solve_corrector(mesh, model, Q0, source_drift(mesh, model, Q0), solver)
            hd, rep_d = solve_corrector(mesh, model, Q0, source_diffusion(mesh, Q0, v0), solver)
            files["h_drift.csv"] = field_csv(mesh, h, "h")
            files["h_diffusion.csv"] = field_csv(mesh, hd, "h")
            items.update(_solve_items("drift_corrector", rep_h))
            items.update(_solve_items("diffusion_corrector", rep_d))
            ok = ok and rep_h.converged and rep_d.converged
        items["converged"] = ok
        files["report.txt"] = report_text(cmd, cfg, items)
        return files, ok

    if cmd == "coefficients":
        mesh = build_mesh(cfg.G, cfg.I, cfg.J)
        rpt = compute_coefficients(mesh, model, solver)
        row = rpt.as_row()
        files["coefficients.csv"] = csv_text(list(row), [list(row.values())])
        items = {}
        for name, rep in rpt.diagnostics.items():
            items.update(_solve_items(name, rep))
        items["converged"] = rpt.converged
        files["report.txt"] = report_text(cmd, cfg, items)
        return files, rpt.converged

    if cmd == "sweep":
        rows = drift_sweep(cfg.G_list, model, solver, I=cfg.I, J=cfg.J, workers=_workers())
        header = ["G", "c02_direct", "c02_corrector", "D02", "v0", "converged", "error"]
        files["sweep.csv"] = csv_text(header, ([getattr(r, h) for h in header] for r in rows))
        ok = all(r.converged for r in rows)
        files["report.txt"] = report_text(cmd, cfg, {"rows": len(rows), "converged": ok})
        return files, ok

    if cmd == "convergence":
        rows = convergence_study(model, cfg.G, cfg.I_list, cfg.I_ref, solver, warm_start=True)
        header = ["I", "c02", "c02_rel_err", "q_max_err", "steps", "converged", "error"]
        files["convergence.csv"] = csv_text(header, ([getattr(r, h) for h in header] for r in rows))
        ok = all(r.converged for r in rows)
        files["report.txt"] = report_text(cmd, cfg, {"rows": len(rows), "converged": ok})
        return files, ok

    if cmd == "verify":
        mesh = build_mesh(cfg.G, cfg.I, cfg.J)
        checks = verify_suite(mesh, model, solver)
        files["verify.csv"] = csv_text(["check", "passed", "value", "bound"],
                                       ([c.name, c.passed, c.value, c.bound] for c in checks))
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={fmt(c.value)} ({c.bound})")
        all_ok = all(c.passed for c in checks)
        files["report.txt"] = report_text(cmd, cfg, {"checks": len(checks), "all_passed": all_ok})
        return files, all_ok

    raise ConfigError(f"unknown command {cmd!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tumblekin", description=__doc__.splitlines()[1])
    p.add_argument("config", type=Path, help="INI run configuration")
    p.add_argument("--G", type=float, help="override [mesh] G")
    p.add_argument("--I", type=int, help="override [mesh] I")
    p.add_argument("--J", type=int, help="override [mesh] J")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("G", "I", "J") if getattr(args, k) is not None}
        if "I" in overrides and "J" not in overrides and cfg.J == cfg.I:
            overrides["J"] = overrides["I"]
        cfg = replace(cfg, **overrides).validate()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        files, ok = execute(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    if cfg.command == "verify":
        return EXIT_OK if ok else 1
    if not ok:
        print("warning: at least one solve did not converge (converged = false in report.txt)", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
