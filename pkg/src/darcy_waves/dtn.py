"""Dirichlet-to-Neumann operator of the periodic fluid domain below a graph.

The fluid domain {-b < y < eta(x)} (or {y < eta(x)} for infinite depth) is
flattened onto the strip -H < z < 0 through

    y = rho(x, z) = (z + b)/b * eta(x) + z      (finite depth, H = b)
    y = rho(x, z) = eta(x) + z                  (infinite depth, H = L)

and the harmonic extension v(x, z) = q(x, rho(x, z)) solves the divergence
form problem div(A grad v) = 0 with

    A = [[ rho_z,   -rho_x              ],
         [ -rho_x,  (1 + rho_x^2)/rho_z ]].

Discretization: Fourier in x (products of coefficients and gradients are
formed on a 3/2-padded grid) and Chebyshev collocation in z.  The coupled
system is solved with GMRES, left-preconditioned by the flat-strip Laplacian
whose per-mode Chebyshev blocks are inverted once and cached.  For tall
strips a rational map clusters the Chebyshev nodes near the surface so that
the boundary layers exp(k z) of high modes stay resolved.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import BottomCollisionError, PreconditionError, SolverError
from .spectral import (
    MEAN_ZERO_TOL,
    Depth,
    Finite,
    GridFunction,
    _ik,
    _m_values,
    dealiased_size,
    fine_to_spec,
    grid,
    spec_to_fine,
    to_fine,
)

__all__ = [
    "EllipticWorkspace",
    "BulkField",
    "build_workspace",
    "apply_dtn",
    "dtn_remainder",
    "solve_neumann",
    "reconstruct_bulk",
    "chebyshev",
    "DEFAULT_NZ",
]

DEFAULT_NZ = 48
DEFAULT_MAP_SCALE = 1.5
DIRICHLET_RTOL = 1e-14
# accepted relative (preconditioned) residual of the bulk solve
DIRICHLET_ACCEPT = 1e-10


def chebyshev(n: int):
    """Chebyshev-Gauss-Lobatto nodes s_j = cos(pi j/(n-1)) and differentiation matrix."""
    if n < 3:
        raise ValueError("need at least 3 Chebyshev points")
    j = np.arange(n)
    s = np.cos(np.pi * j / (n - 1))
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    ds = s[:, None] - s[None, :]
    d = np.outer(c, 1.0 / c) / (ds + np.eye(n))
    d -= np.diag(d.sum(axis=1))
    return s, d


@lru_cache(maxsize=64)
def _vertical_grid(nz: int, height: float, map_scale: float | None):
    s, ds = chebyshev(nz)
    if map_scale is None or height <= 2.0 * map_scale:
        z = (s - 1.0) * height / 2.0
        dzds = np.full(nz, height / 2.0)
    else:
        delta = 2.0 * map_scale / height
        z = -map_scale * (1.0 - s) / (1.0 + s + delta)
        dzds = map_scale * (2.0 + delta) / (1.0 + s + delta) ** 2
    z[0] = 0.0
    z[-1] = -height
    dz = ds / dzds[:, None]
    z.setflags(write=False)
    dz.setflags(write=False)
    return z, dz


@lru_cache(maxsize=64)
def _flat_inverses(n: int, nz: int, height: float, map_scale: float | None):
    """Inverses of the per-mode flat operator (Dz^2 - k^2 with boundary rows)."""
    _, dz = _vertical_grid(nz, height, map_scale)
    d2 = dz @ dz
    eye = np.eye(nz)
    invs = np.empty((n // 2 + 1, nz, nz))
    for k in range(n // 2 + 1):
        if k == n // 2:
            invs[k] = eye
            continue
        mat = d2 - k * k * eye
        mat[0] = 0.0
        mat[0, 0] = 1.0
        mat[-1] = dz[-1]
        invs[k] = np.linalg.inv(mat)
    invs.setflags(write=False)
    return invs


class EllipticWorkspace:
    """Discretized flattened problem for one surface profile.

    Instances are immutable after construction and safe to share between
    threads; every solve works on local arrays.
    """

    def __init__(self, eta: GridFunction, depth: Depth, nz: int = DEFAULT_NZ,
                 clearance_floor: float | None = None, map_scale: float | None = DEFAULT_MAP_SCALE):
        n = eta.n
        self.eta = eta
        self.depth = depth
        self.n = n
        self.nz = int(nz)
        self.m = dealiased_size(n)
        self.height = depth.height
        self.map_scale = map_scale
        self.z, self.dz = _vertical_grid(self.nz, self.height, map_scale)
        self._invs = _flat_inverses(n, self.nz, self.height, map_scale)
        self._ik = _ik(n)[:, None]

        ev = eta.values
        ev_f = to_fine(ev, self.m)
        dev_f = to_fine(_dx(ev), self.m)
        if isinstance(depth, Finite):
            b = depth.b
            self.clearance = float((ev + b).min())
            self.clearance_floor = 1e-3 * b if clearance_floor is None else float(clearance_floor)
            if self.clearance <= 0:
                raise BottomCollisionError(
                    f"surface intersects the bottom: min(eta + b) = {self.clearance:.3e}", self.clearance)
            if self.clearance < self.clearance_floor:
                raise BottomCollisionError(
                    f"bottom clearance {self.clearance:.3e} below floor {self.clearance_floor:.3e}",
                    self.clearance)
            stretch = (self.z + b) / b
            rz_f = np.repeat((1.0 + ev_f / b)[:, None], self.nz, axis=1)
            rx_f = np.outer(dev_f, stretch)
            self.rho_z = np.repeat((1.0 + ev / b)[:, None], self.nz, axis=1)
            self.rho_x = np.outer(_dx(ev), stretch)
        else:
            self.clearance = float("inf")
            self.clearance_floor = 0.0
            rz_f = np.ones((self.m, self.nz))
            rx_f = np.repeat(dev_f[:, None], self.nz, axis=1)
            self.rho_z = np.ones((n, self.nz))
            self.rho_x = np.repeat(_dx(ev)[:, None], self.nz, axis=1)
        self._a11 = rz_f
        self._a12 = -rx_f
        self._a22 = (1.0 + rx_f**2) / rz_f
        for arr in (self._a11, self._a12, self._a22, self.rho_z, self.rho_x):
            arr.setflags(write=False)
        self._stats_lock = threading.Lock()
        self.solves = 0
        self.iterations = 0

    # -- geometry ---------------------------------------------------------
    @property
    def x(self) -> np.ndarray:
        return grid(self.n)

    def rho(self) -> np.ndarray:
        """Physical height y = rho(x, z) on the (N, Nz) collocation grid."""
        ev = self.eta.values[:, None]
        if isinstance(self.depth, Finite):
            b = self.depth.b
            return (self.z[None, :] + b) / b * ev + self.z[None, :]
        return ev + self.z[None, :]

    def coefficients(self):
        """Entries (a11, a12, a22) of the coefficient matrix on the (N, Nz) grid."""
        rz, rx = self.rho_z, self.rho_x
        return rz, -rx, (1.0 + rx**2) / rz

    # -- discrete operator ------------------------------------------------
    def _fluxes(self, vh: np.ndarray):
        """Spectral x-fluxes and z-fluxes (A grad v) for spectral field ``vh``."""
        n, m = self.n, self.m
        vxh = self._ik * vh
        vzh = vh @ self.dz.T
        vx = spec_to_fine(vxh, n, m)
        vz = spec_to_fine(vzh, n, m)
        fx = fine_to_spec(self._a11 * vx + self._a12 * vz, n)
        fz = fine_to_spec(self._a12 * vx + self._a22 * vz, n)
        return fx, fz

    def _divergence(self, vh):
        fx, fz = self._fluxes(vh)
        return self._ik * fx + fz @ self.dz.T, fz

    def _apply(self, v: np.ndarray) -> np.ndarray:
        n = self.n
        vh = np.fft.rfft(v, axis=0)
        out, fz = self._divergence(vh)
        out[:, -1] = fz[:, -1]
        out[n // 2, :] = vh[n // 2, :]
        out[:, 0] = vh[:, 0]
        return np.fft.irfft(out, n=n, axis=0)

    def _precondition(self, r: np.ndarray) -> np.ndarray:
        rh = np.fft.rfft(r, axis=0)
        yh = np.einsum("kij,kj->ki", self._invs, rh)
        return np.fft.irfft(yh, n=self.n, axis=0)

    def solve_dirichlet(self, f: np.ndarray, rtol: float = DIRICHLET_RTOL) -> np.ndarray:
        """Bulk solution v on the (N, Nz) grid with v = f on the surface."""
        n, nz = self.n, self.nz
        f = np.asarray(f, dtype=float)
        if f.shape != (n,):
            raise PreconditionError(f"data has {f.size} points, workspace has N={n}")
        if not np.any(f):
            return np.zeros((n, nz))
        rhs = np.zeros((n, nz))
        rhs[:, 0] = f
        b = self._precondition(rhs).ravel()
        shape = (n, nz)

        def matvec(y):
            return self._precondition(self._apply(y.reshape(shape))).ravel()

        op = LinearOperator((n * nz, n * nz), matvec=matvec, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        y, _info = gmres(op, b, x0=b.copy(), rtol=rtol, atol=0.0, restart=80, maxiter=12,
                         callback=cb, callback_type="pr_norm")
        resid = np.linalg.norm(matvec(y) - b) / np.linalg.norm(b)
        with self._stats_lock:
            self.solves += 1
            self.iterations += count[0]
        if not np.isfinite(resid) or resid > DIRICHLET_ACCEPT:
            raise SolverError(
                f"elliptic solve stalled: relative residual {resid:.2e} after {count[0]} iterations "
                f"(N={n}, Nz={nz}, clearance={self.clearance:.3e})",
                residual=float(resid), iterations=count[0])
        return y.reshape(shape)

    def conormal_trace(self, v: np.ndarray) -> np.ndarray:
        """(A grad v) . e_z at z = 0, i.e. grad q . N on the surface."""
        _, fz = self._fluxes(np.fft.rfft(v, axis=0))
        return np.fft.irfft(fz[:, 0], n=self.n)


def _dx(values: np.ndarray) -> np.ndarray:
    n = values.size
    return np.fft.irfft(np.fft.rfft(values) * _ik(n), n=n)


def _require_mean_zero(f: GridFunction, what: str) -> None:
    scale = max(1.0, f.sup())
    if abs(f.mean()) > 1e3 * MEAN_ZERO_TOL * scale:
        raise PreconditionError(f"{what} must have mean zero (mean = {f.mean():.3e})")


def build_workspace(eta: GridFunction, depth: Depth, nz: int = DEFAULT_NZ,
                    clearance_floor: float | None = None,
                    map_scale: float | None = DEFAULT_MAP_SCALE) -> EllipticWorkspace:
    """Assemble the flattened elliptic problem for the surface ``eta``.

    Raises :class:`BottomCollisionError` when min(eta + b) drops below the
    clearance floor (default 1e-3 b) and :class:`PreconditionError` for a
    profile with nonzero mean.
    """
    if not isinstance(eta, GridFunction):
        eta = GridFunction(eta)
    _require_mean_zero(eta, "eta")
    return EllipticWorkspace(eta, depth, nz, clearance_floor, map_scale)


def _check(ws: EllipticWorkspace, f, what="f") -> GridFunction:
    if not isinstance(f, GridFunction):
        f = GridFunction(f)
    if f.n != ws.n:
        raise PreconditionError(f"{what} has N={f.n}, workspace has N={ws.n}")
    _require_mean_zero(f, what)
    return f


def apply_dtn(ws: EllipticWorkspace, f: GridFunction) -> GridFunction:
    """G[eta] f for mean-zero Dirichlet data ``f``; the output has mean zero."""
    f = _check(ws, f)
    v = ws.solve_dirichlet(f.values - f.mean())
    g = ws.conormal_trace(v)
    return GridFunction(g - g.mean(), mean_zero=True)


def _apply_m(values: np.ndarray, depth: Depth, inverse: bool = False) -> np.ndarray:
    n = values.size
    sym = _m_values(np.arange(n // 2 + 1), depth).astype(float)
    if inverse:
        sym[1:] = 1.0 / sym[1:]
        sym[0] = 0.0
        sym[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(values) * sym, n=n)


def dtn_remainder(ws: EllipticWorkspace, f: GridFunction) -> GridFunction:
    """R[eta] f = G[eta] f - m(D) f."""
    f = _check(ws, f)
    g = apply_dtn(ws, f).values - _apply_m(f.values - f.mean(), ws.depth)
    return GridFunction(g - g.mean(), mean_zero=True)


def _project(values: np.ndarray) -> np.ndarray:
    """Remove the mean and the Nyquist mode."""
    n = values.size
    spec = np.fft.rfft(values)
    spec[0] = 0.0
    spec[-1] = 0.0
    return np.fft.irfft(spec, n=n)


def solve_neumann(ws: EllipticWorkspace, h: GridFunction, rtol: float = 1e-12,
                  maxiter: int = 20) -> GridFunction:
    """Mean-zero ``f`` with G[eta] f = h, by GMRES on G[eta] preconditioned with 1/m(D).

    The Nyquist mode of ``h`` lies outside the range of the discrete operator
    and is discarded.
    """
    h = _check(ws, h, "h")
    n = ws.n
    hv = _project(h.values)
    if not np.any(hv):
        return GridFunction.zeros(n)
    depth = ws.depth

    def matvec(f):
        pf = _project(f)
        g = ws.conormal_trace(ws.solve_dirichlet(pf)) if np.any(pf) else np.zeros(n)
        return _apply_m(_project(g), depth, inverse=True) + (f - pf)

    b = _apply_m(hv, depth, inverse=True)
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    f, _info = gmres(op, b, x0=b.copy(), rtol=rtol, atol=0.0, restart=60, maxiter=maxiter,
                     callback=cb, callback_type="pr_norm")
    resid = np.linalg.norm(matvec(f) - b) / np.linalg.norm(b)
    if not np.isfinite(resid) or resid > 1e3 * rtol:
        raise SolverError(f"Neumann solve did not converge: relative residual {resid:.2e}",
                          residual=float(resid), iterations=count[0])
    f = _project(f)
    return GridFunction(f - f.mean(), mean_zero=True)


@dataclass(frozen=True)
class BulkField:
    """Potential, velocity and pressure on the mapped collocation grid.

    Arrays have shape (N, Nz); column 0 is the free surface and column -1 the
    bottom (or the truncation depth).  ``divergence`` holds div u on interior
    rows (zero on the boundary rows, where the equation is not imposed).
    """

    x: np.ndarray
    y: np.ndarray
    q: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    p: np.ndarray
    divergence: np.ndarray

    def max_divergence(self) -> float:
        return float(np.abs(self.divergence).max())

    def velocity_scale(self) -> float:
        return float(np.sqrt(self.u_x**2 + self.u_y**2).max())

    def bottom_vertical_velocity(self) -> float:
        return float(np.abs(self.u_y[:, -1]).max())

    def columns(self):
        """Flattened (x, y, q, u_x, u_y, p) columns for export."""
        return {name: getattr(self, name).ravel() for name in ("x", "y", "q", "u_x", "u_y", "p")}


def reconstruct_bulk(ws: EllipticWorkspace, f: GridFunction, gravity: float = 0.0) -> BulkField:
    """Darcy flow in the fluid: u = -grad q and p = q - g y for surface data ``f`` of q."""
    f = _check(ws, f)
    n = ws.n
    v = ws.solve_dirichlet(f.values - f.mean())
    vh = np.fft.rfft(v, axis=0)
    vx = np.fft.irfft(ws._ik * vh, n=n, axis=0)
    vz = v @ ws.dz.T
    rz, rx = ws.rho_z, ws.rho_x
    q_y = vz / rz
    q_x = vx - rx * q_y
    div_h, _ = ws._divergence(vh)
    div = np.fft.irfft(div_h, n=n, axis=0) / rz
    div[:, 0] = 0.0
    div[:, -1] = 0.0
    y = ws.rho()
    xx = np.repeat(ws.x[:, None], ws.nz, axis=1)
    return BulkField(x=xx, y=y, q=v, u_x=-q_x, u_y=-q_y, p=v - gravity * y, divergence=-div)
