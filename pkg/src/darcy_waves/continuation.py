"""Traveling-wave residual, Newton corrector and pseudo-arclength branch following.

Unknowns are ``(eta, kappa)`` with ``eta`` mean-zero.  Inside the Newton
solver ``eta`` is stored as the packed real and imaginary parts of its
Fourier coefficients ``k = 1 .. N/2 - 1``; the mean and the Nyquist mode are
never touched, so every iterate stays mean-zero exactly.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .curvature import invert_capillary_gravity, mean_curvature
from .dtn import DEFAULT_NZ, _dx, apply_dtn, build_workspace, solve_neumann
from .errors import BottomCollisionError, PreconditionError, SolverError
from .spectral import (
    Finite,
    FluidParams,
    GridFunction,
    MultiplierSymbol,
    _linear_symbol,
    _m_values,
    apply_multiplier,
    discrete_norms,
    inner,
    interpolate,
    project_mean_zero,
    symbol_m,
    symbol_m1,
)

__all__ = [
    "residual",
    "compact_map_F",
    "linearization_at_origin",
    "jacobian_action",
    "energy_identity",
    "Termination",
    "PointDiagnostics",
    "BranchPoint",
    "BranchTrace",
    "ArclengthConstraint",
    "StepConfig",
    "StopConfig",
    "CorrectorFailure",
    "newton_correct",
    "continue_branch",
]

log = logging.getLogger(__name__)


def _mean_zero(f: GridFunction, what: str) -> GridFunction:
    if not isinstance(f, GridFunction):
        f = GridFunction(f)
    if abs(f.mean()) > 1e-9 * max(1.0, f.sup()):
        raise PreconditionError(f"{what} must have mean zero")
    return project_mean_zero(f)


def residual(eta: GridFunction, kappa: float, phi: GridFunction, params: FluidParams,
             nz: int = DEFAULT_NZ, clearance_floor: float | None = None) -> GridFunction:
    """-speed * eta' + G[eta](sigma H(eta) + g eta + kappa phi)."""
    eta = _mean_zero(eta, "eta")
    phi = _mean_zero(phi, "phi")
    ws = build_workspace(eta, params.depth, nz, clearance_floor)
    data = params.gravity * eta + kappa * phi
    if params.sigma:
        data = data + params.sigma * mean_curvature(eta)
    out = apply_dtn(ws, project_mean_zero(data)).values - params.speed * _dx(eta.values)
    return GridFunction(out - out.mean(), mean_zero=True)


def compact_map_F(eta: GridFunction, kappa: float, phi: GridFunction, params: FluidParams,
                  nz: int = DEFAULT_NZ) -> GridFunction:
    """(sigma H + g)^{-1}(-speed G[eta]^{-1} eta' + kappa phi).

    Zeros of ``eta + F(eta, kappa)`` are exactly the zeros of :func:`residual`.
    """
    if not params.sigma > 0:
        raise PreconditionError("compact_map_F needs sigma > 0")
    eta = _mean_zero(eta, "eta")
    phi = _mean_zero(phi, "phi")
    ws = build_workspace(eta, params.depth, nz)
    slope = GridFunction(_dx(eta.values), mean_zero=True)
    arg = -params.speed * solve_neumann(ws, slope) + kappa * phi
    out = invert_capillary_gravity(project_mean_zero(arg), params.sigma, params.gravity)
    return project_mean_zero(out)


def linearization_at_origin(params: FluidParams) -> MultiplierSymbol:
    """Symbol a(k) = 1 - i speed k / ((sigma k^2 + g) m(k)) of D(eta + F) at the origin."""
    if not params.sigma > 0:
        raise PreconditionError("linearization_at_origin needs sigma > 0")

    def a(k):
        k = np.asarray(k, dtype=float)
        return 1.0 - 1j * params.speed * k / ((params.sigma * k**2 + params.gravity) * _m_values(k, params.depth))

    return MultiplierSymbol(a, "a", singular_at_zero=True)


def jacobian_action(eta: GridFunction, kappa: float, phi: GridFunction, params: FluidParams,
                    direction: GridFunction, h0: float = 1e-6, nz: int = DEFAULT_NZ) -> GridFunction:
    """Central difference of :func:`residual` in ``eta`` along ``direction``."""
    direction = _mean_zero(direction, "direction")
    vs = direction.sup()
    if vs == 0:
        return GridFunction.zeros(direction.n)
    h = h0 * (1.0 + eta.sup()) / vs
    plus = residual(eta + h * direction, kappa, phi, params, nz)
    minus = residual(eta - h * direction, kappa, phi, params, nz)
    return GridFunction((plus.values - minus.values) / (2 * h), mean_zero=True)


def energy_identity(eta: GridFunction, params: FluidParams, nz: int = DEFAULT_NZ) -> float:
    """<w, G[eta] w> with w = sigma H(eta) + g eta; vanishes only at traveling waves with kappa = 0."""
    eta = _mean_zero(eta, "eta")
    w = params.gravity * eta
    if params.sigma:
        w = w + params.sigma * mean_curvature(eta)
    w = project_mean_zero(w)
    ws = build_workspace(eta, params.depth, nz)
    return inner(w.values, apply_dtn(ws, w).values)


# ---------------------------------------------------------------------------
# packed coefficient representation


def _pack(values: np.ndarray) -> np.ndarray:
    c = np.fft.rfft(values)[1:-1] / values.size
    return np.concatenate([c.real, c.imag])


def _unpack(vec: np.ndarray, n: int) -> np.ndarray:
    h = n // 2 - 1
    spec = np.zeros(n // 2 + 1, dtype=complex)
    spec[1:-1] = vec[:h] + 1j * vec[h:]
    return np.fft.irfft(spec * n, n=n)


# L^2(T) inner product expressed on packed coefficients: 2 pi * 2 * sum Re(a conj b)
_ETA_WEIGHT = 4.0 * math.pi


class Termination(str, enum.Enum):
    NORM_GROWTH = "NormGrowth"
    BOTTOM_APPROACH = "BottomApproach"
    KAPPA_RANGE_EXHAUSTED = "KappaRangeExhausted"
    STEP_FAILURE = "StepFailure"
    MAX_POINTS = "MaxPoints"


@dataclass(frozen=True)
class PointDiagnostics:
    residual_sup: float
    c1_norm: float
    holder_seminorm: float
    bottom_clearance: float
    kappa: float


@dataclass(frozen=True)
class BranchPoint:
    eta: GridFunction
    kappa: float
    arclength: float
    diagnostics: PointDiagnostics
    newton_iterations: int = 0

    @property
    def n(self) -> int:
        return self.eta.n


@dataclass
class BranchTrace:
    points: List[BranchPoint]
    termination: Termination
    message: str = ""
    anomalies: List[str] = field(default_factory=list)
    kappa_crossings: List[Tuple[float, float]] = field(default_factory=list)
    origin_energy: float = 0.0
    grid_sizes: List[int] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def anomalous(self) -> bool:
        return bool(self.anomalies)


@dataclass(frozen=True)
class ArclengthConstraint:
    """Linear constraint <u - anchor, tangent> = step on (eta, kappa)."""

    tangent_eta: np.ndarray  # packed coefficients
    tangent_kappa: float
    anchor_eta: np.ndarray
    anchor_kappa: float
    step: float

    @classmethod
    def fixed_kappa(cls, kappa: float, n: int) -> "ArclengthConstraint":
        z = np.zeros(n - 2)
        return cls(z, 1.0, z, float(kappa), 0.0)

    def value(self, u_eta: np.ndarray, u_kappa: float) -> float:
        return (_ETA_WEIGHT * float(np.dot(u_eta - self.anchor_eta, self.tangent_eta))
                + (u_kappa - self.anchor_kappa) * self.tangent_kappa - self.step)

    def resampled(self, n: int) -> "ArclengthConstraint":
        return replace(self, tangent_eta=_resample_packed(self.tangent_eta, n),
                       anchor_eta=_resample_packed(self.anchor_eta, n))


def _resample_packed(vec: np.ndarray, n_new: int) -> np.ndarray:
    h_old = vec.size // 2
    h_new = n_new // 2 - 1
    re = np.zeros(h_new)
    im = np.zeros(h_new)
    m = min(h_old, h_new)
    re[:m] = vec[:m]
    im[:m] = vec[h_old:h_old + m]
    return np.concatenate([re, im])


@dataclass(frozen=True)
class StepConfig:
    initial_step: float = 0.05
    min_step: float = 1e-10
    max_step: float = 0.25
    grow: float = 1.5
    shrink: float = 0.5
    accept_tol: float = 1e-8
    max_newton: int = 8
    fast_newton: int = 3
    fd_step: float = 1e-7
    gmres_rtol: float = 1e-6
    refine_threshold: float = 1e-8
    max_n: int = 512
    direction: int = 1
    nz: int = DEFAULT_NZ
    holder_beta: float = 0.5

    def __post_init__(self):
        errs = []
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            errs.append("need 0 < min_step <= initial_step <= max_step")
        if not self.accept_tol > 0:
            errs.append("accept_tol must be positive")
        if self.direction not in (1, -1):
            errs.append("direction must be +1 or -1")
        if not 0 < self.shrink < 1 or not self.grow >= 1:
            errs.append("need 0 < shrink < 1 <= grow")
        if errs:
            raise ValueError("; ".join(errs))


@dataclass(frozen=True)
class StopConfig:
    c1_max: float = 10.0
    clearance_fraction: float = 0.05
    kappa_max: float = 100.0
    max_points: int = 400

    def __post_init__(self):
        if not (self.c1_max > 0 and self.kappa_max > 0 and 0 <= self.clearance_fraction < 1
                and self.max_points >= 1):
            raise ValueError("invalid stop configuration")


class CorrectorFailure(SolverError):
    """Newton corrector left its basin; the stepper reacts by shrinking the step."""


def _clearance(eta: GridFunction, params: FluidParams) -> float:
    if isinstance(params.depth, Finite):
        return float(eta.values.min() + params.depth.b)
    return math.inf


def _diagnose(eta: GridFunction, kappa: float, res_sup: float, params: FluidParams, beta: float) -> PointDiagnostics:
    norms = discrete_norms(eta, beta)
    return PointDiagnostics(res_sup, norms.c1_norm, norms.holder_seminorm, _clearance(eta, params), float(kappa))


def _l0_inverse(n: int, params: FluidParams) -> np.ndarray:
    k = np.arange(1, n // 2)
    return 1.0 / _linear_symbol(k, params)


def newton_correct(guess, constraint: ArclengthConstraint, phi: GridFunction, params: FluidParams,
                   accept_tol: float = 1e-8, cfg: StepConfig | None = None,
                   arclength: float = 0.0) -> BranchPoint:
    """Newton-Krylov solve of {residual = 0, constraint = 0} from ``guess``.

    ``guess`` is a :class:`BranchPoint` or an ``(eta, kappa)`` pair.  The
    Jacobian is applied by forward differences of the residual inside GMRES,
    right-preconditioned by the inverse of the linearization at the origin.
    Raises :class:`CorrectorFailure` when the iteration does not reach
    ``accept_tol`` in ``cfg.max_newton`` steps or diverges.
    """
    cfg = cfg or StepConfig(accept_tol=accept_tol)
    if isinstance(guess, BranchPoint):
        eta0, kappa = guess.eta, guess.kappa
    else:
        eta0, kappa = guess
    eta0 = _mean_zero(eta0, "eta")
    phi = _mean_zero(phi, "phi")
    n = eta0.n
    if phi.n != n:
        raise PreconditionError("phi and eta must share the grid")
    if constraint.tangent_eta.size != n - 2:
        constraint = constraint.resampled(n)
    nz = cfg.nz
    hdim = n // 2 - 1
    dim = n - 2 + 1
    linv = _l0_inverse(n, params)
    target = 0.1 * accept_tol

    def res_vals(u_eta, u_kappa):
        return residual(GridFunction(_unpack(u_eta, n), mean_zero=True), u_kappa, phi, params, nz).values

    def precondition(y):
        c = (y[:hdim] + 1j * y[hdim:2 * hdim]) * linv
        return np.concatenate([c.real, c.imag, y[-1:]])

    u_eta = _pack(eta0.values)
    u_kappa = float(kappa)
    try:
        r = res_vals(u_eta, u_kappa)
    except (BottomCollisionError, SolverError) as exc:
        raise CorrectorFailure(f"residual evaluation failed at the predictor: {exc}") from exc
    rsup = float(np.abs(r).max())
    cval = constraint.value(u_eta, u_kappa)
    history = [rsup]
    it = 0
    while not (rsup <= target and abs(cval) <= target):
        if it >= cfg.max_newton:
            if rsup <= accept_tol and abs(cval) <= accept_tol:
                break
            raise CorrectorFailure(f"Newton did not converge in {cfg.max_newton} steps (residual {rsup:.3e})",
                                   residual=rsup, iterations=it)
        it += 1
        fvec = np.concatenate([_pack(r), [cval]])
        scale = 1.0 + float(np.abs(_unpack(u_eta, n)).max())

        def jmv(y, u_eta=u_eta, u_kappa=u_kappa, r=r):
            v = precondition(y)
            v_eta, v_kappa = v[:-1], v[-1]
            vmax = max(float(np.abs(_unpack(v_eta, n)).max()), abs(v_kappa))
            if vmax == 0:
                return np.zeros(dim)
            h = cfg.fd_step * scale / vmax
            rp = res_vals(u_eta + h * v_eta, u_kappa + h * v_kappa)
            jv = _pack((rp - r) / h)
            cv = _ETA_WEIGHT * float(np.dot(v_eta, constraint.tangent_eta)) + v_kappa * constraint.tangent_kappa
            return np.concatenate([jv, [cv]])

        op = LinearOperator((dim, dim), matvec=jmv, dtype=float)
        try:
            y, _info = gmres(op, -fvec, rtol=cfg.gmres_rtol, atol=0.0, restart=40, maxiter=3)
            step = precondition(y)
            u_eta = u_eta + step[:-1]
            u_kappa = u_kappa + float(step[-1])
            r = res_vals(u_eta, u_kappa)
        except (BottomCollisionError, SolverError) as exc:
            raise CorrectorFailure(f"Newton step {it} failed: {exc}", iterations=it) from exc
        rsup = float(np.abs(r).max())
        cval = constraint.value(u_eta, u_kappa)
        history.append(rsup)
        if not math.isfinite(rsup) or (len(history) >= 3 and history[-1] > history[-2] > history[-3]):
            raise CorrectorFailure(f"Newton diverging (residuals {history[-3:]})", residual=rsup, iterations=it)
    eta = GridFunction(_unpack(u_eta, n), mean_zero=True)
    # acceptance uses a fresh evaluation, independent of the Newton bookkeeping
    res_sup = residual(eta, u_kappa, phi, params, nz).sup()
    if res_sup > accept_tol:
        raise CorrectorFailure(f"corrected point has residual {res_sup:.3e} > {accept_tol:.1e}",
                               residual=res_sup, iterations=it)
    diag = _diagnose(eta, u_kappa, res_sup, params, cfg.holder_beta)
    return BranchPoint(eta, u_kappa, arclength, diag, it)


def _upper_energy_fraction(eta: GridFunction) -> float:
    c = np.abs(np.fft.rfft(eta.values)[1:]) ** 2
    total = c.sum()
    if total == 0:
        return 0.0
    return float(c[c.size // 2:].sum() / total)


def _resample_point(p: BranchPoint, n: int) -> BranchPoint:
    return replace(p, eta=project_mean_zero(interpolate(p.eta, n)))


def continue_branch(phi: GridFunction, params: FluidParams, step_cfg: StepConfig | None = None,
                    stop_cfg: StopConfig | None = None, progress=None) -> BranchTrace:
    """Follow the solution branch through (0, 0) by secant pseudo-arclength continuation.

    The run ends with one of the :class:`Termination` reasons; none of them
    is an error.  ``progress``, if given, is called with each accepted point.
    """
    scfg = step_cfg or StepConfig()
    stop = stop_cfg or StopConfig()
    phi = _mean_zero(phi, "phi")
    if phi.sup() == 0:
        raise PreconditionError("phi must be nonzero: with zero forcing the branch is the flat state")
    if not params.sigma > 0:
        raise PreconditionError("continuation needs sigma > 0")
    t0 = time.perf_counter()
    n = phi.n
    accept = scfg.accept_tol

    origin_diag = _diagnose(GridFunction.zeros(n), 0.0, residual(GridFunction.zeros(n), 0.0, phi, params, scfg.nz).sup(),
                            params, scfg.holder_beta)
    points = [BranchPoint(GridFunction.zeros(n), 0.0, 0.0, origin_diag, 0)]
    trace = BranchTrace(points, Termination.MAX_POINTS, grid_sizes=[n])
    trace.origin_energy = energy_identity(points[0].eta, params, scfg.nz)

    # linear response direction (-m1(D) m(D) phi, 1)
    lin = apply_multiplier(apply_multiplier(phi, symbol_m(params.depth)), symbol_m1(params))
    t_eta = -_pack(lin.values)
    t_kappa = 1.0
    norm = math.sqrt(_ETA_WEIGHT * float(t_eta @ t_eta) + t_kappa**2)
    t_eta, t_kappa = scfg.direction * t_eta / norm, scfg.direction * t_kappa / norm

    ds = scfg.initial_step
    while True:
        if len(points) > stop.max_points:
            trace.termination = Termination.MAX_POINTS
            trace.message = f"point budget {stop.max_points} exhausted"
            break
        last = points[-1]
        a_eta = _pack(last.eta.values)
        guess_eta = GridFunction(_unpack(a_eta + ds * t_eta, n), mean_zero=True)
        guess = (guess_eta, last.kappa + ds * t_kappa)
        con = ArclengthConstraint(t_eta, t_kappa, a_eta, last.kappa, ds)
        try:
            pt = newton_correct(guess, con, phi, params, accept, scfg, arclength=last.arclength + ds)
        except CorrectorFailure as exc:
            ds *= scfg.shrink
            log.info("step failed (%s); step -> %.3e", exc, ds)
            if ds < scfg.min_step:
                trace.termination = Termination.STEP_FAILURE
                trace.message = f"step underflow below {scfg.min_step:.1e}: {exc}"
                break
            continue

        if _upper_energy_fraction(pt.eta) > scfg.refine_threshold and 2 * n <= scfg.max_n:
            n *= 2
            log.info("refining grid to N=%d at kappa=%.6g", n, pt.kappa)
            phi = project_mean_zero(interpolate(phi, n))
            points[:] = [_resample_point(p, n) for p in points]
            t_eta = _resample_packed(t_eta, n)
            trace.grid_sizes.append(n)
            continue

        # secant tangent from the two most recent points
        d_eta = _pack(pt.eta.values) - a_eta
        d_kappa = pt.kappa - last.kappa
        dn = math.sqrt(_ETA_WEIGHT * float(d_eta @ d_eta) + d_kappa**2)
        if dn > 0:
            t_eta, t_kappa = d_eta / dn, d_kappa / dn
        points.append(pt)
        if progress is not None:
            progress(pt)
        if last.kappa != 0 and pt.kappa != 0 and (last.kappa > 0) != (pt.kappa > 0):
            _check_crossing(trace, last, pt, phi, params, scfg)
        if pt.newton_iterations <= scfg.fast_newton:
            ds = min(ds * scfg.grow, scfg.max_step)

        d = pt.diagnostics
        if d.c1_norm >= stop.c1_max:
            trace.termination = Termination.NORM_GROWTH
            trace.message = f"C1 norm {d.c1_norm:.4g} >= {stop.c1_max:g}"
            break
        if isinstance(params.depth, Finite) and d.bottom_clearance <= stop.clearance_fraction * params.depth.b:
            trace.termination = Termination.BOTTOM_APPROACH
            trace.message = f"clearance {d.bottom_clearance:.4g} <= {stop.clearance_fraction * params.depth.b:.4g}"
            break
        if abs(pt.kappa) > stop.kappa_max:
            trace.termination = Termination.KAPPA_RANGE_EXHAUSTED
            trace.message = f"|kappa| = {abs(pt.kappa):.4g} > {stop.kappa_max:g}"
            break
    trace.elapsed = time.perf_counter() - t0
    return trace


def _check_crossing(trace: BranchTrace, a: BranchPoint, b: BranchPoint, phi, params, cfg: StepConfig) -> None:
    """Correct at kappa = 0 between two points of opposite sign; a nontrivial solution there is anomalous."""
    w = a.kappa / (a.kappa - b.kappa)
    guess = project_mean_zero(a.eta + w * (b.eta - a.eta))
    con = ArclengthConstraint.fixed_kappa(0.0, guess.n)
    try:
        pt = newton_correct((guess, 0.0), con, phi, params, cfg.accept_tol, cfg)
        norm = pt.eta.sup()
    except CorrectorFailure as exc:
        trace.anomalies.append(f"kappa=0 crossing could not be corrected: {exc}")
        return
    trace.kappa_crossings.append((a.arclength + w * (b.arclength - a.arclength), norm))
    if norm > 10 * cfg.accept_tol:
        trace.anomalies.append(f"nontrivial solution at kappa=0 with sup norm {norm:.3e}")
