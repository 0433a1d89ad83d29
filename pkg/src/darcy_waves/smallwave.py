"""Small traveling waves by Picard iteration of the contraction map K.

For forcing psi the traveling-wave equation

    -speed * eta' = -G[eta](sigma H(eta) + g eta + psi)

is rewritten, after splitting G[eta] = m(D) + R[eta] and
H(eta) = -eta'' + R_H(eta), as the fixed-point problem

    eta = K(eta) = m1(D) [ -sigma m(D) R_H(eta) - R[eta](sigma H(eta) + g eta) - G[eta] psi ]

with m1 the inverse symbol of -speed d/dx + m(D)(-sigma d^2/dx^2 + g).
The same construction works for sigma = 0 provided g > 0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .curvature import curvature_remainder, mean_curvature
from .dtn import DEFAULT_NZ, apply_dtn, build_workspace
from .errors import BottomCollisionError, PreconditionError, SolverError
from .spectral import (
    FluidParams,
    GridFunction,
    apply_multiplier,
    interpolate,
    project_mean_zero,
    symbol_m,
    symbol_m1,
)

__all__ = [
    "PicardReport",
    "fixed_point_map_K",
    "solve_small_wave",
    "SigmaLimitRow",
    "surface_tension_limit",
]

log = logging.getLogger(__name__)


@dataclass
class PicardReport:
    solution: GridFunction
    iterations: int
    contraction_ratios: List[float]
    final_residual: float
    increments: List[float] = field(default_factory=list)

    @property
    def terminal_ratio(self) -> float:
        finite = [r for r in self.contraction_ratios if math.isfinite(r)]
        return finite[-1] if finite else 0.0


def _mean_zero(f: GridFunction, what: str) -> GridFunction:
    if abs(f.mean()) > 1e-9 * max(1.0, f.sup()):
        raise PreconditionError(f"{what} must have mean zero")
    return project_mean_zero(f)


def fixed_point_map_K(eta: GridFunction, psi: GridFunction, params: FluidParams,
                      nz: int = DEFAULT_NZ) -> GridFunction:
    if params.sigma == 0 and params.gravity <= 0:
        raise PreconditionError("the sigma = 0 map needs g > 0")
    eta = _mean_zero(eta, "eta")
    psi = _mean_zero(psi, "psi")
    sigma, g = params.sigma, params.gravity
    ws = build_workspace(eta, params.depth, nz)
    m = symbol_m(params.depth)
    # w = sigma H(eta) + g eta;  R[eta] w + G[eta] psi = G[eta](w + psi) - m(D) w
    w = project_mean_zero(sigma * mean_curvature(eta) + g * eta)
    rhs = -(apply_dtn(ws, w + psi)) + apply_multiplier(w, m)
    if sigma:
        rhs = rhs - sigma * apply_multiplier(curvature_remainder(eta), m)
    return apply_multiplier(project_mean_zero(rhs), symbol_m1(params))


def solve_small_wave(psi: GridFunction, params: FluidParams, tol: float = 1e-12, max_iter: int = 200,
                     eta0: GridFunction | None = None, nz: int = DEFAULT_NZ) -> PicardReport:
    """Picard iteration eta_{n+1} = K(eta_n) from eta0 (default 0).

    Stops when the sup-norm increment drops to ``tol``.  Raises
    :class:`SolverError` (``ratio`` = last contraction ratio) when the
    iteration does not converge, which signals forcing outside the
    contraction regime.
    """
    from .continuation import residual

    if params.sigma == 0 and params.gravity <= 0:
        raise PreconditionError("sigma = 0 requires g > 0")
    psi = _mean_zero(psi, "psi")
    eta = GridFunction.zeros(psi.n) if eta0 is None else _mean_zero(eta0, "eta0")
    increments: List[float] = []
    ratios: List[float] = []
    for it in range(1, max_iter + 1):
        try:
            new = fixed_point_map_K(eta, psi, params, nz)
        except BottomCollisionError as exc:
            raise SolverError(f"Picard iterate hit the bottom at iteration {it}: {exc}",
                              iterations=it, ratio=ratios[-1] if ratios else None) from exc
        inc = (new - eta).sup()
        if increments:
            ratios.append(inc / increments[-1] if increments[-1] > 0 else 0.0)
        increments.append(inc)
        eta = new
        if inc <= tol:
            break
        if not math.isfinite(inc) or (len(ratios) >= 3 and min(ratios[-3:]) > 1.0):
            raise SolverError(f"Picard iteration diverging (increment {inc:.3e})", residual=inc,
                              iterations=it, ratio=ratios[-1] if ratios else None)
    else:
        raise SolverError(f"Picard iteration did not converge in {max_iter} iterations "
                          f"(increment {increments[-1]:.3e})", residual=increments[-1],
                          iterations=max_iter, ratio=ratios[-1] if ratios else None)
    res = residual(eta, 1.0, psi, params, nz=nz).sup()
    return PicardReport(eta, it, ratios, res, increments)


@dataclass
class SigmaLimitRow:
    sigma: float
    eta: GridFunction
    difference: float


def surface_tension_limit(phi: GridFunction, kappa: float, g: float, gamma: float, depth,
                          sigmas: Sequence[float], n: int | None = None, tol: float = 1e-12,
                          nz: int = DEFAULT_NZ):
    """Capillary-gravity waves for a decreasing list of sigma and the gravity wave (sigma = 0).

    Returns ``(rows, eta_gravity)`` where each row carries the sup-norm
    distance to the gravity wave.  A non-monotone sequence of distances is
    logged as a warning.
    """
    if not g > 0:
        raise PreconditionError("the vanishing surface tension limit needs g > 0")
    if n is not None and n != phi.n:
        phi = interpolate(phi, n)
    psi = kappa * _mean_zero(phi, "phi")
    base = FluidParams(sigma=0.0, gravity=g, speed=gamma, depth=depth)
    eta0 = solve_small_wave(psi, base, tol=tol, nz=nz).solution
    rows = []
    for s in sigmas:
        eta = solve_small_wave(psi, base.replace(sigma=float(s)), tol=tol, nz=nz).solution
        rows.append(SigmaLimitRow(float(s), eta, (eta - eta0).sup()))
    diffs = np.array([r.difference for r in rows])
    if np.any(np.diff(diffs) >= 0) and np.any(diffs > 0):
        log.warning("surface-tension sweep: differences not strictly decreasing: %s", diffs)
    return rows, eta0
