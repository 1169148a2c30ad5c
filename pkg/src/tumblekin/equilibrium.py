"""
Equilibrium Q0 of  d/dy((vG - y) Q) = Lambda0(y) (<Q> - Q)  by semi-implicit relaxation.

Each step solves, column by column, the one-sided upwind systems (second-order
backward differences below the diagonal, forward differences above it,
first-order next to the boundary) with the loss term implicit and the gain
Lambda0 <Q> lagged.  The result is rescaled to unit mass after every step and
the loop stops once the L1 change over ``cadence`` steps drops below ``tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels
from .mesh import GridField, Mesh, total_mass, y_integral
from .tumbling import TumblingModel

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SolveReport",
    "NumericalFailure",
    "upwind_weight",
    "evolve_step",
    "normalize",
    "convergence_metric",
    "solve_equilibrium",
    "uniform_field",
    "bump_field",
]


class NumericalFailure(RuntimeError):
    """Non-finite values or a non-positive mass during a solve."""


@dataclass
class SolverConfig:
    """
    ``dt=None`` means dy / (2G), the step used for the published runs.
    ``init`` is "uniform" or a GridField used as the starting state.
    """

    dt: Optional[float] = None
    tol: float = 1e-10
    cadence: int = 100
    max_steps: int = 10_000_000
    init: Union[str, GridField] = "uniform"
    divergence_factor: float = 10.0

    def __post_init__(self):
        if self.dt is not None and not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise ValueError(f"cadence must be a positive integer, got {self.cadence}")
        if self.max_steps < self.cadence:
            raise ValueError(f"max_steps ({self.max_steps}) must be >= cadence ({self.cadence})")
        if not (isinstance(self.init, GridField) or self.init == "uniform"):
            raise ValueError(f"init must be 'uniform' or a GridField, got {self.init!r}")

    def time_step(self, mesh: Mesh) -> float:
        return self.dt if self.dt is not None else mesh.dy / (2.0 * mesh.G)


@dataclass
class SolveReport:
    steps_taken: int
    final_residual: float
    converged: bool
    mass_history_max_deviation: float
    reason: str = ""
    residual_history: list = field(default_factory=list, repr=False)


def upwind_weight(mesh: Mesh, i: int, j: int) -> float:
    """W_ij = v_j G - y_i; exactly zero on the diagonal."""
    return mesh.G * (j * mesh.I - i * mesh.J) / (mesh.I * mesh.J)


def _lambda_rows(mesh: Mesh, model: TumblingModel) -> np.ndarray:
    lam = np.asarray(model.lambda0(mesh.y), dtype=float)
    return np.ascontiguousarray(np.broadcast_to(lam, (mesh.ny,)))


def _check_field(mesh: Mesh, f: GridField, name: str) -> None:
    if f.interior.shape != mesh.shape or f.diag_left.shape != (mesh.ny,) or f.diag_right.shape != (mesh.ny,):
        raise ValueError(f"{name} does not match the mesh shape {mesh.shape}")


def _c(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def evolve_step(mesh: Mesh, model: TumblingModel, Q: GridField, cfg: SolverConfig,
                source: Optional[GridField] = None) -> GridField:
    """
    Advance one step without renormalizing.  ``source`` is added explicitly
    to the right-hand side (corrector mode).
    """
    _check_field(mesh, Q, "Q")
    if not Q.is_finite():
        raise NumericalFailure("input field has non-finite values")
    out = GridField.zeros(mesh)
    avg = np.empty(mesh.ny)
    _kernels.row_averages(_c(Q.interior), _c(Q.diag_left), _c(Q.diag_right), mesh.I, mesh.J, avg)
    if source is not None:
        _check_field(mesh, source, "source")
        S, SL, SR = _c(source.interior), _c(source.diag_left), _c(source.diag_right)
    else:
        S = SL = SR = None
    avg_new = np.empty(mesh.ny)
    _kernels.sweep_step(_c(Q.interior), _c(Q.diag_left), _c(Q.diag_right), avg, 1.0,
                        None, None, None, None, 0.0, S, SL, SR,
                        _lambda_rows(mesh, model), cfg.time_step(mesh), mesh.I, mesh.J,
                        out.interior, out.diag_left, out.diag_right, avg_new)
    if not out.is_finite():
        raise NumericalFailure("non-finite values after a step; dt too large or model out of bounds")
    return out


def normalize(mesh: Mesh, field: GridField) -> GridField:
    m = total_mass(mesh, field)
    if not np.isfinite(m) or m <= 0.0:
        raise NumericalFailure(f"cannot normalize a field with mass {m}")
    return field.scaled(1.0 / m)


def convergence_metric(mesh: Mesh, Qa: GridField, Qb: GridField) -> float:
    """L1 distance sum |Qa - Qb| dv dy over every stored value, both diagonal values included."""
    _check_field(mesh, Qa, "Qa")
    _check_field(mesh, Qb, "Qb")
    s = _kernels.l1_distance(_c(Qa.interior), _c(Qa.diag_left), _c(Qa.diag_right), 1.0,
                             _c(Qb.interior), _c(Qb.diag_left), _c(Qb.diag_right), 1.0,
                             mesh.I, mesh.J)
    return float(s * mesh.dv * mesh.dy)


def uniform_field(mesh: Mesh) -> GridField:
    f = GridField(np.ones(mesh.shape), np.ones(mesh.ny), np.ones(mesh.ny))
    f.interior[0] = f.interior[-1] = 0.0
    f.diag_left[[0, -1]] = 0.0
    f.diag_right[[0, -1]] = 0.0
    return f


def bump_field(mesh: Mesh, y0: float = 0.3, v0: float = 0.4, width: float = 0.2) -> GridField:
    """Positive, off-centre Gaussian bump (plus a small floor) for uniqueness checks."""
    def fn(y, v):
        return 0.05 + np.exp(-((y / mesh.G - y0) ** 2 + (v - v0) ** 2) / (2 * width ** 2))
    f = GridField.from_function(mesh, fn)
    f.interior[0] = f.interior[-1] = 0.0
    f.diag_left[[0, -1]] = 0.0
    f.diag_right[[0, -1]] = 0.0
    return f


class _Relaxation:
    """
    Shared driver for the equilibrium and corrector loops.

    The state after a step is kept unnormalized together with the scale and
    shift that map it to the normalized/projected iterate; the next sweep
    consumes those factors directly.
    """

    def __init__(self, mesh: Mesh, model: TumblingModel, cfg: SolverConfig,
                 start: GridField, project, source: Optional[GridField] = None,
                 kernel: Optional[GridField] = None):
        self.mesh = mesh
        self.cfg = cfg
        self.dt = cfg.time_step(mesh)
        self.lam = _lambda_rows(mesh, model)
        self.project = project
        # the sweeps only read nodes they have not yet overwritten, so the
        # field is updated in place; the row averages are double-buffered
        self.Q = _c(start.interior).copy()
        self.QL = _c(start.diag_left).copy()
        self.QR = _c(start.diag_right).copy()
        self.avg = [np.empty(mesh.ny), np.empty(mesh.ny)]
        _kernels.row_averages(self.Q, self.QL, self.QR, mesh.I, mesh.J, self.avg[0])
        if source is not None:
            self.S = (_c(source.interior), _c(source.diag_left), _c(source.diag_right))
        else:
            self.S = (None, None, None)
        if kernel is not None:
            self.P = (_c(kernel.interior), _c(kernel.diag_left), _c(kernel.diag_right))
            self.avgP = np.empty(mesh.ny)
            _kernels.row_averages(*self.P, mesh.I, mesh.J, self.avgP)
        else:
            self.P = (None, None, None)
            self.avgP = None
        self.cur = 0
        self.scale, self.shift = project(self.avg[0], self.avgP)

    def step(self) -> None:
        c, n = self.cur, 1 - self.cur
        m = self.mesh
        _kernels.sweep_step(self.Q, self.QL, self.QR, self.avg[c], self.scale,
                            *self.P, self.avgP, self.shift, *self.S,
                            self.lam, self.dt, m.I, m.J,
                            self.Q, self.QL, self.QR, self.avg[n])
        self.cur = n
        self.scale, self.shift = self.project(self.avg[n], self.avgP)

    def materialize(self) -> GridField:
        if self.P[0] is None:
            f = GridField(self.Q * self.scale, self.QL * self.scale, self.QR * self.scale)
        else:
            f = GridField(self.Q * self.scale - self.shift * self.P[0],
                          self.QL * self.scale - self.shift * self.P[1],
                          self.QR * self.scale - self.shift * self.P[2])
            f.refresh_diagonal(self.mesh)
        return f

    def run(self, monitor=None) -> tuple[GridField, SolveReport]:
        cfg, mesh = self.cfg, self.mesh
        snap = self.materialize()
        history: list[float] = []
        max_dev = abs(monitor(snap)) if monitor else 0.0
        metric = np.inf
        steps = 0
        reason = "max_steps reached"
        converged = False
        while steps < cfg.max_steps:
            for _ in range(cfg.cadence):
                self.step()
            steps += cfg.cadence
            if not (np.isfinite(self.scale) and np.isfinite(self.shift)):
                raise NumericalFailure(f"mass became non-finite after {steps} steps")
            current = self.materialize()
            if not current.is_finite():
                raise NumericalFailure(f"non-finite values after {steps} steps; dt too large or model out of bounds")
            if monitor:
                max_dev = max(max_dev, abs(monitor(current)))
            prev_metric = metric
            metric = convergence_metric(mesh, current, snap)
            history.append(metric)
            snap = current
            logger.debug("step %d metric %.3e", steps, metric)
            if metric < cfg.tol:
                converged = True
                reason = "converged"
                break
            if len(history) > 2 and metric > cfg.divergence_factor * prev_metric:
                reason = "diverging"
                logger.warning("metric grew from %.3e to %.3e; stopping", prev_metric, metric)
                break
        report = SolveReport(steps, float(metric), converged, float(max_dev), reason, history)
        return snap, report


def _mass_projector(mesh: Mesh):
    def project(avg, _avgP):
        m = y_integral(mesh, avg)
        if not np.isfinite(m) or m <= 0.0:
            raise NumericalFailure(f"total mass {m} during relaxation")
        return 1.0 / m, 0.0
    return project


def solve_equilibrium(mesh: Mesh, model: TumblingModel,
                      cfg: Optional[SolverConfig] = None) -> tuple[GridField, SolveReport]:
    """
    Relax to the unit-mass equilibrium.  Non-convergence within
    ``cfg.max_steps`` is reported, not raised.
    """
    cfg = cfg or SolverConfig()
    if isinstance(cfg.init, GridField):
        _check_field(mesh, cfg.init, "init")
        start = cfg.init.copy()
    else:
        start = uniform_field(mesh)
    start = normalize(mesh, start)
    relax = _Relaxation(mesh, model, cfg, start, _mass_projector(mesh))
    Q0, report = relax.run(monitor=lambda f: total_mass(mesh, f) - 1.0)
    if not report.converged:
        logger.warning("equilibrium not converged after %d steps (%s, metric %.3e)",
                       report.steps_taken, report.reason, report.final_residual)
    return Q0, report
