"""
Macroscopic drift and diffusion coefficients for the three scaling regimes.

Moments of fields use the mesh quadrature (trapezoid in v, Simpson in y) and
the unit-mass convention  integral of <Q> dy = 1, so ``<.>`` already carries
the 1/2 of the velocity average.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .corrector import solve_corrector, source_diffusion, source_drift
from .equilibrium import NumericalFailure, SolverConfig, solve_equilibrium
from .mesh import GridField, Mesh, build_mesh, row_averages, y_integral
from .tumbling import TumblingModel

logger = logging.getLogger(__name__)

__all__ = [
    "CoefficientReport",
    "mean_velocity",
    "drift_c02_direct",
    "drift_c02_corrector",
    "diffusion_D02",
    "coeffs_case2",
    "coeffs_case3",
    "compute_coefficients",
    "SweepRow",
    "drift_sweep",
]


def _velocity_moment(mesh: Mesh, f: GridField, weight_v: np.ndarray,
                     weight_y: Optional[np.ndarray] = None) -> float:
    g = f.multiply_columns(mesh, weight_v)
    avg = row_averages(mesh, g)
    if weight_y is not None:
        avg = avg * weight_y
    return y_integral(mesh, avg)


def mean_velocity(mesh: Mesh, Q0: GridField) -> float:
    return _velocity_moment(mesh, Q0, mesh.v)


def drift_c02_direct(mesh: Mesh, model: TumblingModel, Q0: GridField) -> float:
    """
    c02 = -(1/Lambda0) * integral of Lambda1(y) <v Q0> dy.

    Only valid for a constant Lambda0, where the adjoint corrector of v is v/Lambda0.
    """
    if not model.is_constant:
        raise ValueError("the direct c02 formula needs a constant Lambda0 (chi = 0); "
                         "use the corrector route for y-dependent rates")
    l1 = np.asarray(np.broadcast_to(model.lambda1(mesh.y), (mesh.ny,)), dtype=float)
    return -_velocity_moment(mesh, Q0, mesh.v, l1) / model.lambda0_bar


def drift_c02_corrector(mesh: Mesh, h: GridField, v0: float) -> float:
    """(v - v0)-moment of the drift corrector."""
    return _velocity_moment(mesh, h, mesh.v - v0)


def diffusion_D02(mesh: Mesh, h_diff: GridField, v0: float) -> float:
    return _velocity_moment(mesh, h_diff, mesh.v - v0)


def coeffs_case2(model: TumblingModel, G: float) -> tuple[float, float]:
    """
    D03 = (1/L) * integral of v^2 over [-1, 1],  c03 = (1/L) * integral of v Lambda1(v G).
    L is the mean rate lambda0_bar.
    """
    lam = model.lambda0_bar
    D03 = 2.0 / (3.0 * lam)
    val, _ = integrate.quad(lambda v: v * float(model.lambda1(v * G)), -1.0, 1.0,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return D03, val / lam


def coeffs_case3(model: TumblingModel, G: float) -> tuple[float, float]:
    """
    D04 = (1/Lambda(0)) * integral of v^2 over [-1, 1],  c04 = -G Lambda'(0) / Lambda(0)^2.
    """
    if model.lambda0_fn is None:
        # tanh family: Lambda(0) = lambda0_bar, Lambda'(0) = -lambda0_bar * chi
        return 2.0 / (3.0 * model.lambda0_bar), G * model.chi / model.lambda0_bar
    lam0 = float(model.lambda0(0.0))
    return 2.0 / (3.0 * lam0), -G * model.lambda0_prime_at_zero() / lam0 ** 2


@dataclass
class CoefficientReport:
    v0: float
    c02_direct: float
    c02_corrector: float
    c02_rel_diff: float
    D02: float
    D03: float
    c03: float
    D04: float
    c04: float
    G: float
    lambda0_bar: float
    chi: float
    I: int
    J: int
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("diagnostics")
        return row


def compute_coefficients(mesh: Mesh, model: TumblingModel, cfg: Optional[SolverConfig] = None,
                         Q0: Optional[GridField] = None, with_diffusion: bool = True) -> CoefficientReport:
    """
    Full pipeline: equilibrium, drift and diffusion correctors, all coefficients.
    A precomputed ``Q0`` skips the equilibrium solve.
    """
    cfg = cfg or SolverConfig()
    diag: dict = {}
    converged = True
    if Q0 is None:
        Q0, rep = solve_equilibrium(mesh, model, cfg)
        diag["equilibrium"] = rep
        converged &= rep.converged
    corr_cfg = SolverConfig(dt=cfg.dt, tol=cfg.tol, cadence=cfg.cadence, max_steps=cfg.max_steps)
    v0 = mean_velocity(mesh, Q0)
    c_direct = drift_c02_direct(mesh, model, Q0) if model.is_constant else math.nan
    h, rep_h = solve_corrector(mesh, model, Q0, source_drift(mesh, model, Q0), corr_cfg)
    diag["drift_corrector"] = rep_h
    converged &= rep_h.converged
    c_corr = drift_c02_corrector(mesh, h, v0)
    rel = abs(c_direct - c_corr) / abs(c_corr) if (model.is_constant and c_corr != 0.0) else math.nan
    if with_diffusion:
        hd, rep_d = solve_corrector(mesh, model, Q0, source_diffusion(mesh, Q0, v0), corr_cfg)
        diag["diffusion_corrector"] = rep_d
        converged &= rep_d.converged
        D02 = diffusion_D02(mesh, hd, v0)
    else:
        D02 = math.nan
    D03, c03 = coeffs_case2(model, mesh.G)
    D04, c04 = coeffs_case3(model, mesh.G)
    return CoefficientReport(v0, c_direct, c_corr, rel, D02, D03, c03, D04, c04,
                             mesh.G, model.lambda0_bar, model.chi, mesh.I, mesh.J,
                             bool(converged), diag)


@dataclass
class SweepRow:
    G: float
    c02_direct: float
    c02_corrector: float
    D02: float
    v0: float
    converged: bool
    error: str = ""


def _sweep_one(G: float, model: TumblingModel, I: int, J: int, cfg: SolverConfig,
               with_corrector: bool) -> SweepRow:
    try:
        mesh = build_mesh(G, I, J)
        Q0, rep = solve_equilibrium(mesh, model, cfg)
        v0 = mean_velocity(mesh, Q0)
        c_direct = drift_c02_direct(mesh, model, Q0) if model.is_constant else math.nan
        if with_corrector or not model.is_constant:
            rpt = compute_coefficients(mesh, model, cfg, Q0=Q0)
            return SweepRow(G, c_direct, rpt.c02_corrector, rpt.D02, v0, rep.converged and rpt.converged)
        return SweepRow(G, c_direct, math.nan, math.nan, v0, rep.converged)
    except (NumericalFailure, ValueError) as exc:
        logger.warning("sweep row G=%g failed: %s", G, exc)
        return SweepRow(G, math.nan, math.nan, math.nan, math.nan, False, str(exc))


def drift_sweep(G_list: Sequence[float], model: TumblingModel, cfg: Optional[SolverConfig] = None,
                I: int = 100, J: Optional[int] = None, with_corrector: bool = True,
                workers: int = 1) -> list[SweepRow]:
    """
    c02 (both routes), D02 and v0 for each gradient in ``G_list``, in input order.
    A failing row is recorded and the sweep moves on.
    """
    G_list = [float(g) for g in G_list]
    if any(g <= 0 for g in G_list):
        raise ValueError("gradients must be positive")
    if G_list != sorted(G_list):
        raise ValueError("G_list must be sorted")
    cfg = cfg or SolverConfig()
    J = J or I
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_sweep_one, g, model, I, J, cfg, with_corrector) for g in G_list]
            return [f.result() for f in futs]
    return [_sweep_one(g, model, I, J, cfg, with_corrector) for g in G_list]
