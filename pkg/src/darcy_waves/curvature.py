"""Mean curvature of a periodic graph and the inverse capillary-gravity operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import PreconditionError, SolverError
from .spectral import MEAN_ZERO_TOL, GridFunction, _ik, dealiased_size, fine_to_spec, to_fine

__all__ = [
    "CurvatureConfig",
    "mean_curvature",
    "curvature_remainder",
    "capillary_gravity",
    "invert_capillary_gravity",
    "ellipticity_coefficient",
]


@dataclass(frozen=True)
class CurvatureConfig:
    newton_tol: float = 1e-11
    max_newton: int = 50
    damping: bool = True
    linear_rtol: float = 1e-12

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")


def _values(eta) -> np.ndarray:
    return eta.values if isinstance(eta, GridFunction) else np.asarray(eta, dtype=float)


def _flux_divergence(slope_fn, v: np.ndarray) -> np.ndarray:
    """-d/dx of slope_fn(v') with the nonlinearity evaluated on the 3/2 grid."""
    n = v.size
    ik = _ik(n)
    p = np.fft.irfft(np.fft.rfft(v) * ik, n=n)
    flux = fine_to_spec(slope_fn(to_fine(p, dealiased_size(n))), n)
    return -np.fft.irfft(ik * flux, n=n)


def _h1(p):
    # (1 + p^2)^(-1/2) - 1 without cancellation for small slopes
    s = np.sqrt(1.0 + p * p)
    return -p * p / (s * (1.0 + s))


def mean_curvature(eta) -> GridFunction:
    """H(eta) = -(eta' / sqrt(1 + eta'^2))', twice the mean curvature of the graph."""
    out = _flux_divergence(lambda p: p / np.sqrt(1.0 + p * p), _values(eta))
    return GridFunction(out - out.mean(), mean_zero=True)


def curvature_remainder(eta) -> GridFunction:
    """R_H(eta) = H(eta) + eta'' = -(eta' * H1(eta'))'."""
    out = _flux_divergence(lambda p: p * _h1(p), _values(eta))
    return GridFunction(out - out.mean(), mean_zero=True)


def ellipticity_coefficient(eta) -> np.ndarray:
    """Pointwise coefficient (1 + eta'^2)^(-3/2) of the linearized curvature operator."""
    v = _values(eta)
    n = v.size
    p = np.fft.irfft(np.fft.rfft(v) * _ik(n), n=n)
    return (1.0 + p * p) ** -1.5


def capillary_gravity(f, sigma: float, g: float) -> GridFunction:
    """sigma H(f) + g f."""
    fv = _values(f)
    return GridFunction(sigma * mean_curvature(fv).values + g * fv)


def invert_capillary_gravity(h, sigma: float, g: float, cfg: CurvatureConfig | None = None) -> GridFunction:
    """Solve sigma H(f) + g f = h by damped Newton iteration.

    Each Newton step solves the symmetric linearization
    ``-sigma (a(f') v')' + g v = -r``, ``a(p) = (1 + p^2)^(-3/2)``, with
    preconditioned conjugate gradients; the preconditioner is the
    frozen-coefficient multiplier ``sigma * mean(a) * k^2 + g``.
    For ``g = 0`` the data must have mean zero and the solution is mean-zero.
    """
    cfg = cfg or CurvatureConfig()
    if not sigma > 0:
        raise PreconditionError("sigma must be positive")
    if g < 0:
        raise PreconditionError("g must be non-negative")
    hv = _values(h).astype(float)
    n = hv.size
    hscale = max(1.0, float(np.abs(hv).max()))
    if g == 0 and abs(hv.mean()) > 1e3 * MEAN_ZERO_TOL * hscale:
        raise PreconditionError("with g = 0 the data h must have mean zero")
    if g == 0:
        # the range of sigma*H excludes constants and the Nyquist mode
        spec = np.fft.rfft(hv)
        spec[0] = 0.0
        spec[-1] = 0.0
        hv = np.fft.irfft(spec, n=n)
    m = dealiased_size(n)
    ik = _ik(n)
    k2 = -(ik * ik).real
    tol = cfg.newton_tol * hscale

    def residual(f):
        r = sigma * _flux_divergence(lambda p: p / np.sqrt(1.0 + p * p), f) + g * f - hv
        if g == 0:
            # measure on the same range as the projected data
            rs = np.fft.rfft(r)
            rs[0] = rs[-1] = 0.0
            r = np.fft.irfft(rs, n=n)
        return r

    # linear initial guess (-sigma Laplacian + g) f = h
    lin = sigma * k2 + g
    spec = np.fft.rfft(hv)
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = np.where(lin > 0, spec / np.where(lin > 0, lin, 1.0), 0.0)
    f = np.fft.irfft(guess, n=n)
    r = residual(f)
    rnorm = float(np.abs(r).max())
    for it in range(cfg.max_newton + 1):
        if rnorm <= tol:
            break
        if it == cfg.max_newton:
            raise SolverError(
                f"capillary-gravity Newton did not converge in {cfg.max_newton} steps "
                f"(residual {rnorm:.3e})", residual=rnorm, iterations=it)
        p = np.fft.irfft(np.fft.rfft(f) * ik, n=n)
        a_f = (1.0 + to_fine(p, m) ** 2) ** -1.5
        abar = float(a_f.mean())

        def jac(v, a_f=a_f):
            vp = to_fine(np.fft.irfft(np.fft.rfft(v) * ik, n=n), m)
            flux = fine_to_spec(a_f * vp, n)
            return -sigma * np.fft.irfft(ik * flux, n=n) + g * v

        prec_sym = sigma * abar * k2 + g
        inv_sym = np.where(prec_sym > 0, 1.0 / np.where(prec_sym > 0, prec_sym, 1.0), 0.0)

        def prec(v):
            return np.fft.irfft(np.fft.rfft(v) * inv_sym, n=n)

        jop = LinearOperator((n, n), matvec=jac, dtype=float)
        mop = LinearOperator((n, n), matvec=prec, dtype=float)
        rhs = -r
        if g == 0:
            rhs = rhs - rhs.mean()
        step, _ = cg(jop, rhs, x0=prec(rhs), rtol=cfg.linear_rtol, atol=0.0, maxiter=4 * n, M=mop)
        lam = 1.0
        for _halving in range(11 if cfg.damping else 1):
            trial = f + lam * step
            r_trial = residual(trial)
            t_norm = float(np.abs(r_trial).max())
            if t_norm < rnorm or not cfg.damping:
                break
            lam *= 0.5
        else:
            raise SolverError(
                f"capillary-gravity Newton stalled at residual {rnorm:.3e}", residual=rnorm, iterations=it)
        f, r, rnorm = trial, r_trial, t_norm
    if g == 0:
        f = f - f.mean()
        return GridFunction(f, mean_zero=True)
    return GridFunction(f, mean_zero=abs(f.mean()) <= MEAN_ZERO_TOL * max(1.0, float(np.abs(f).max())))
