"""
Quantitative checks on computed equilibria: singular-line and boundary power
laws, the reflection symmetry, the zero-flux identity, mesh convergence
against a nested reference, and independence of the initial state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .coefficients import drift_c02_direct
from .equilibrium import NumericalFailure, SolverConfig, convergence_metric, solve_equilibrium
from .mesh import GridField, Mesh, build_mesh, prolong, row_averages
from .tumbling import TumblingModel

logger = logging.getLogger(__name__)

__all__ = [
    "ExponentFit",
    "ConvergenceRow",
    "fit_power_law",
    "fit_blowup_exponent",
    "fit_decay_exponent",
    "check_symmetry",
    "flux_residuals",
    "check_flux_identity",
    "convergence_study",
    "observed_orders",
    "self_convergence_order",
    "uniqueness_check",
    "CheckResult",
    "verify_suite",
]

MIN_POINTS = 5


@dataclass
class ExponentFit:
    exponent: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    prefactor: float = math.nan


def fit_power_law(distance: np.ndarray, values: np.ndarray,
                  window: tuple[float, float]) -> ExponentFit:
    """Least-squares slope of log(values) against log(distance) for distances in ``window``."""
    distance = np.asarray(distance, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    keep = (distance >= lo * (1 - 1e-12)) & (distance <= hi * (1 + 1e-12)) & (values > 0)
    n = int(keep.sum())
    if n < MIN_POINTS:
        raise ValueError(f"only {n} usable points in window [{lo:g}, {hi:g}]; "
                         f"need at least {MIN_POINTS} (refine the mesh or widen the window)")
    x = np.log(distance[keep])
    yv = np.log(values[keep])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, yv, rcond=None)
    resid = yv - A @ np.array([slope, icpt])
    ss_tot = float(((yv - yv.mean()) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    # flat data (round-off spread only): r^2 is undefined and the constant fit is exact
    flat = ss_tot <= 1e-20 * n * max(1.0, float(np.abs(yv).max())) ** 2
    r2 = 1.0 if flat else 1.0 - ss_res / ss_tot
    return ExponentFit(float(slope), r2, (float(lo), float(hi)), n, float(math.exp(icpt)))


def _default_window(mesh: Mesh) -> tuple[float, float]:
    return 3.0 * mesh.dy, mesh.G / 4.0


def _column_values(mesh: Mesh, Q0: GridField, j: int) -> np.ndarray:
    """Column j of Q0 using the one-sided diagonal values (not the display mean)."""
    col = Q0.interior[:, j].copy()
    rows = np.nonzero(mesh.diag_columns == j)[0]
    for i in rows:
        # the column is approached from y < vG by the backward sweep
        col[i] = Q0.diag_left[i]
    return col


def fit_blowup_exponent(mesh: Mesh, Q0: GridField, v_fixed: float,
                        window: Optional[tuple[float, float]] = None) -> ExponentFit:
    """
    Slope of log Q(y, v_fixed) against log(v_fixed G - y) on the side
    v_fixed G - y > 0, interior rows only.
    """
    j = mesh.column(v_fixed)
    window = window or _default_window(mesh)
    W = mesh.weights()[:, j]
    rows = np.arange(1, mesh.ny - 1)
    rows = rows[W[rows] > 0]
    return fit_power_law(W[rows], Q0.interior[rows, j], window)


def fit_decay_exponent(mesh: Mesh, Q0: GridField, v_fixed: float,
                       window: Optional[tuple[float, float]] = None) -> ExponentFit:
    """Slope of log Q(y, v_fixed) against log(G - |y|) for y near -G."""
    j = mesh.column(v_fixed)
    window = window or _default_window(mesh)
    if window[1] > mesh.G / 4.0 * (1 + 1e-12):
        raise ValueError("decay window must lie inside (-G, -G + G/4)")
    rows = np.arange(1, mesh.I)
    dist = rows * mesh.dy
    inside = dist <= window[1] * (1 + 1e-12)
    rows, dist = rows[inside], dist[inside]
    col = Q0.interior[rows, j]
    if np.any(mesh.diag_columns[rows] == j):
        raise ValueError(f"v={v_fixed} meets the diagonal inside the decay window")
    return fit_power_law(dist, col, window)


def check_symmetry(mesh: Mesh, Q0: GridField) -> float:
    """max |Q(i, j) - Q(2I - i, 2J - j)|, with the diagonal pair mapped L <-> R."""
    flipped = Q0.interior[::-1, ::-1]
    diff = np.abs(Q0.interior - flipped)
    idx = np.arange(mesh.ny)
    diff[idx, mesh.diag_columns] = 0.0
    dl = np.abs(Q0.diag_left - Q0.diag_right[::-1])
    return float(max(diff.max(), dl.max()))


def flux_residuals(mesh: Mesh, Q0: GridField) -> np.ndarray:
    """Row-wise G <v Q> - y <Q>."""
    avg = row_averages(mesh, Q0)
    avg_v = row_averages(mesh, Q0.multiply_columns(mesh, mesh.v))
    return mesh.G * avg_v - mesh.y * avg


def check_flux_identity(mesh: Mesh, Q0: GridField) -> float:
    return float(np.abs(flux_residuals(mesh, Q0)[1:-1]).max())


@dataclass
class ConvergenceRow:
    I: int
    c02: float
    c02_rel_err: float
    q_max_err: float
    steps: int
    converged: bool
    error: str = ""


def convergence_study(model: TumblingModel, G: float, I_list: Sequence[int], I_ref: int,
                      cfg: Optional[SolverConfig] = None,
                      reference: Optional[tuple[float, np.ndarray]] = None,
                      solutions: Optional[dict] = None,
                      warm_start: bool = False) -> list[ConvergenceRow]:
    """
    Errors of c02 and <Q> at each I against the solve at ``I_ref`` (J = I).

    ``reference`` may supply a precomputed (c02, <Q>) at I_ref; ``solutions``
    may map I -> Q0 to reuse existing solves.  With ``warm_start`` the meshes
    are solved coarse to fine, each starting from the prolonged solution of
    the finest nested mesh already solved.
    """
    cfg = cfg or SolverConfig()
    for I in I_list:
        if I_ref % I:
            raise ValueError(f"I={I} does not divide I_ref={I_ref}")
    solutions = solutions or {}
    solved: dict[int, tuple[Mesh, GridField]] = {}

    def solve(I):
        mesh = build_mesh(G, I, I)
        if I in solutions:
            solved[I] = (mesh, solutions[I])
            return mesh, solutions[I], None
        run_cfg = cfg
        coarser = [k for k in solved if k < I and I % k == 0]
        if warm_start and coarser:
            k = max(coarser)
            run_cfg = replace(cfg, init=prolong(solved[k][0], solved[k][1], mesh))
        Q0, rep = solve_equilibrium(mesh, model, run_cfg)
        solved[I] = (mesh, Q0)
        return mesh, Q0, rep

    results = {}
    for I in sorted(set(I_list)):
        try:
            results[I] = solve(I)
        except (NumericalFailure, ValueError) as exc:
            logger.warning("convergence row I=%d failed: %s", I, exc)
            results[I] = exc
    if reference is None:
        mesh_r, Q_r, rep_r = solve(I_ref)
        if rep_r is not None and not rep_r.converged:
            logger.warning("reference solve at I=%d did not converge", I_ref)
        reference = (drift_c02_direct(mesh_r, model, Q_r), row_averages(mesh_r, Q_r))
    c_ref, avg_ref = reference
    rows = []
    for I in I_list:
        res = results[I]
        try:
            if isinstance(res, Exception):
                raise res
            mesh, Q0, rep = res
            c = drift_c02_direct(mesh, model, Q0)
            avg = row_averages(mesh, Q0)
            stride = I_ref // I
            err_q = float(np.abs(avg - avg_ref[::stride]).max())
            rows.append(ConvergenceRow(I, c, abs(c - c_ref) / abs(c_ref), err_q,
                                       rep.steps_taken if rep else 0,
                                       rep.converged if rep else True))
        except (NumericalFailure, ValueError) as exc:
            rows.append(ConvergenceRow(I, math.nan, math.nan, math.nan, 0, False, str(exc)))
    return rows


def observed_orders(errors: Sequence[float]) -> list[float]:
    """log2(err(I) / err(2I)) for consecutive entries of a doubling sequence."""
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


def self_convergence_order(values: Sequence[float]) -> float:
    """
    Order from three values on meshes I, 2I, 4I without a reference:
    log2(|f_I - f_2I| / |f_2I - f_4I|).
    """
    a, b, c = values
    return math.log2(abs(a - b) / abs(b - c))


def uniqueness_check(mesh: Mesh, model: TumblingModel, cfg: SolverConfig,
                     init_a: GridField, init_b: GridField) -> float:
    """eq_conv distance between the equilibria reached from two starting fields."""
    from dataclasses import replace
    Qa, _ = solve_equilibrium(mesh, model, replace(cfg, init=init_a))
    Qb, _ = solve_equilibrium(mesh, model, replace(cfg, init=init_b))
    return convergence_metric(mesh, Qa, Qb)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    bound: str


def verify_suite(mesh: Mesh, model: TumblingModel, cfg: Optional[SolverConfig] = None) -> list[CheckResult]:
    """
    Invariant checks on one configuration: mass, positivity, symmetry (chi = 0),
    flux identity, uniqueness, coefficient signs, closed forms and two-route
    agreement.
    """
    from dataclasses import replace

    from .coefficients import coeffs_case2, coeffs_case3, compute_coefficients
    from .equilibrium import bump_field, uniform_field
    from .mesh import total_mass

    cfg = cfg or SolverConfig()
    out: list[CheckResult] = []

    def add(name, ok, value, bound):
        out.append(CheckResult(name, bool(ok), float(value), bound))

    Q0, rep = solve_equilibrium(mesh, model, replace(cfg, init="uniform"))
    add("equilibrium_converged", rep.converged, rep.final_residual, f"< {cfg.tol:g}")
    add("unit_mass", abs(total_mass(mesh, Q0) - 1.0) <= 1e-12, total_mass(mesh, Q0) - 1.0, "|M - 1| <= 1e-12")
    qmin = Q0.min_value(mesh)
    add("interior_nonnegative", qmin >= -1e-12, qmin, ">= -1e-12")
    amin = float(row_averages(mesh, Q0)[1:-1].min())
    add("row_average_positive", amin > 0, amin, "> 0")
    if model.is_constant:
        s = check_symmetry(mesh, Q0)
        add("reflection_symmetry", s <= 1e-8, s, "<= 1e-8")
    f = check_flux_identity(mesh, Q0)
    add("flux_identity", f <= 1e-2, f, "<= 1e-2")
    d = uniqueness_check(mesh, model, cfg, uniform_field(mesh), bump_field(mesh))
    add("uniqueness", d <= 1e-8, d, "<= 1e-8")

    rpt = compute_coefficients(mesh, model, cfg, Q0=Q0)
    add("correctors_converged", rpt.converged, 0.0, "converged")
    add("D02_positive", rpt.D02 > 0, rpt.D02, "> 0")
    exact = 2.0 / (3.0 * model.lambda0_bar)
    D03, _ = coeffs_case2(model, mesh.G)
    D04, c04 = coeffs_case3(model, mesh.G)
    add("D03_closed_form", abs(D03 - exact) <= 1e-14, D03 - exact, "|err| <= 1e-14")
    add("D04_closed_form", abs(D04 - exact) <= 1e-14, D04 - exact, "|err| <= 1e-14")
    if model.lambda0_fn is None:
        c04_exact = mesh.G * model.chi / model.lambda0_bar
        add("c04_closed_form", c04 == c04_exact, c04 - c04_exact, "== G chi / lambda0_bar")
    if model.is_constant:
        add("v0_zero", abs(rpt.v0) <= 1e-8, rpt.v0, "|v0| <= 1e-8")
        bound = model.lambda1_bound() / model.lambda0_bar
        add("c02_bounded", abs(rpt.c02_direct) <= bound, rpt.c02_direct, f"|c02| <= {bound:g}")
        add("c02_two_routes", rpt.c02_rel_diff <= 5e-2, rpt.c02_rel_diff, "<= 5e-2")
    return out
