"""
Correctors h solving  d/dy((vG - y) h) - Lambda0 (<h> - h) = R  with zero total mass.

The same relaxation as the equilibrium is used with R added explicitly; after
each step the component along Q0 (the kernel direction) is removed,
h <- h - M[h] Q0.  A source must itself have zero mass for a solution to exist.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .equilibrium import SolverConfig, SolveReport, _check_field, _Relaxation
from .mesh import GridField, Mesh, row_averages, total_mass, y_integral
from .tumbling import TumblingModel

logger = logging.getLogger(__name__)

__all__ = ["CorrectorSource", "source_drift", "source_diffusion", "make_source", "solve_corrector"]

MASS_TOL = 1e-12
MASS_REPAIR_TOL = 1e-10


@dataclass
class CorrectorSource:
    values: GridField
    kind: str = "custom"

    def mass(self, mesh: Mesh) -> float:
        return total_mass(mesh, self.values)


def make_source(mesh: Mesh, Q0: GridField, values: GridField, kind: str = "custom") -> CorrectorSource:
    """
    Wrap ``values`` as a source, removing any mass along Q0 beyond round-off.
    """
    _check_field(mesh, values, "source")
    m = total_mass(mesh, values)
    if abs(m) > MASS_REPAIR_TOL:
        logger.warning("%s source has mass %.3e; subtracting mass * Q0", kind, m)
        values = values - Q0.scaled(m / total_mass(mesh, Q0))
    return CorrectorSource(values, kind)


def source_drift(mesh: Mesh, model: TumblingModel, Q0: GridField) -> CorrectorSource:
    """Lambda1(y) (<Q0> - Q0), diagonal pair included."""
    avg = row_averages(mesh, Q0)
    l1 = np.asarray(np.broadcast_to(model.lambda1(mesh.y), (mesh.ny,)), dtype=float)
    vals = GridField(l1[:, None] * (avg[:, None] - Q0.interior),
                     l1 * (avg - Q0.diag_left),
                     l1 * (avg - Q0.diag_right))
    return make_source(mesh, Q0, vals, "drift")


def source_diffusion(mesh: Mesh, Q0: GridField, v0: float) -> CorrectorSource:
    """(v - v0) Q0."""
    vals = Q0.multiply_columns(mesh, mesh.v - v0)
    return make_source(mesh, Q0, vals, "diffusion")


def solve_corrector(mesh: Mesh, model: TumblingModel, Q0: GridField, src: CorrectorSource,
                    cfg: Optional[SolverConfig] = None) -> tuple[GridField, SolveReport]:
    cfg = cfg or SolverConfig()
    _check_field(mesh, Q0, "Q0")
    q0_mass = total_mass(mesh, Q0)
    if not q0_mass > 0:
        raise ValueError(f"Q0 must have positive mass, got {q0_mass}")
    if abs(src.mass(mesh)) > MASS_REPAIR_TOL:
        src = make_source(mesh, Q0, src.values, src.kind)

    def project(avg, avgP):
        if avgP is None:
            return 1.0, 0.0
        return 1.0, y_integral(mesh, avg) / y_integral(mesh, avgP)

    if isinstance(cfg.init, GridField):
        _check_field(mesh, cfg.init, "init")
        start = cfg.init.copy()
    else:
        start = GridField.zeros(mesh)
    relax = _Relaxation(mesh, model, cfg, start, project, source=src.values, kernel=Q0)
    h, report = relax.run(monitor=lambda f: total_mass(mesh, f))
    if not report.converged:
        logger.warning("corrector (%s) not converged after %d steps (%s, metric %.3e)",
                       src.kind, report.steps_taken, report.reason, report.final_residual)
    return h, report
