"""Tumbling-rate functions: the leading rate Lambda0(y) and its perturbation Lambda1(y)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["TumblingModel", "lambda0", "lambda1", "bounds"]

_SAMPLE_Y = np.linspace(-50.0, 50.0, 20001)


@dataclass(frozen=True)
class TumblingModel:
    """
    Lambda0(y) = lambda0_bar * (1 - chi * tanh(y)),  Lambda1(y) = -tanh(y).

    Custom evaluators may replace either function.  A custom Lambda0 must come
    with its declared bounds ``(lam_min, lam_max)``; they are checked on a
    sample of y values at construction.
    """

    lambda0_bar: float = 1.0
    chi: float = 0.0
    lambda0_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lambda1_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    declared_bounds: Optional[tuple[float, float]] = None
    lambda1_sup: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.lambda0_bar) or self.lambda0_bar <= 0.0:
            raise ValueError(f"lambda0_bar must be positive, got {self.lambda0_bar}")
        if not (0.0 <= self.chi < 1.0):
            raise ValueError(f"chi must lie in [0,1), got {self.chi}")
        if self.lambda0_fn is not None:
            if self.declared_bounds is None:
                raise ValueError("a custom lambda0 needs declared_bounds=(lam_min, lam_max)")
            lo, hi = self.declared_bounds
            if not (0.0 < lo <= hi):
                raise ValueError(f"declared bounds must satisfy 0 < lam_min <= lam_max, got {self.declared_bounds}")
            vals = np.asarray(self.lambda0_fn(_SAMPLE_Y), dtype=float)
            if vals.min() < lo * (1 - 1e-12) or vals.max() > hi * (1 + 1e-12):
                raise ValueError("custom lambda0 violates its declared bounds on sampled y")
        if self.lambda1_fn is not None:
            vals = np.asarray(self.lambda1_fn(_SAMPLE_Y), dtype=float)
            if not np.isfinite(vals).all():
                raise ValueError("custom lambda1 must be finite")
            sup = float(np.abs(vals).max())
            if self.lambda1_sup is not None and sup > self.lambda1_sup * (1 + 1e-12):
                raise ValueError("custom lambda1 exceeds its declared sup")
            if sup > 1e6:
                logger.warning("custom lambda1 reaches %.3g on sampled y", sup)

    @property
    def is_constant(self) -> bool:
        """True when Lambda0 does not depend on y."""
        return self.lambda0_fn is None and self.chi == 0.0

    def lambda0(self, y):
        if self.lambda0_fn is not None:
            return self.lambda0_fn(y)
        return self.lambda0_bar * (1.0 - self.chi * np.tanh(y))

    def lambda1(self, y):
        if self.lambda1_fn is not None:
            return self.lambda1_fn(y)
        return -np.tanh(y)

    def bounds(self) -> tuple[float, float]:
        if self.declared_bounds is not None:
            return tuple(float(b) for b in self.declared_bounds)
        return (self.lambda0_bar * (1.0 - self.chi), self.lambda0_bar * (1.0 + self.chi))

    def lambda1_bound(self) -> float:
        """sup |Lambda1|; exactly 1 for -tanh."""
        if self.lambda1_fn is None:
            return 1.0
        if self.lambda1_sup is not None:
            return float(self.lambda1_sup)
        return float(np.abs(np.asarray(self.lambda1_fn(_SAMPLE_Y))).max())

    def lambda0_prime_at_zero(self, h: float = 1e-5) -> float:
        if self.lambda0_fn is None:
            return -self.lambda0_bar * self.chi
        # fourth-order central difference
        f = self.lambda0_fn
        return float((-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h))

    def with_lambda1(self, fn: Callable[[np.ndarray], np.ndarray], sup: Optional[float] = None) -> TumblingModel:
        return TumblingModel(self.lambda0_bar, self.chi, self.lambda0_fn, fn, self.declared_bounds, sup)


def lambda0(model: TumblingModel, y):
    return model.lambda0(y)


def lambda1(model: TumblingModel, y):
    return model.lambda1(y)


def bounds(model: TumblingModel) -> tuple[float, float]:
    return model.bounds()
