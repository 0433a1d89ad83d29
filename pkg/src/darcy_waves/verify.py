"""Invariant suite run by ``darcy-waves verify``; each check reports value, threshold and verdict."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .continuation import compact_map_F, jacobian_action, residual
from .curvature import capillary_gravity, invert_capillary_gravity
from .dtn import apply_dtn, build_workspace, reconstruct_bulk, solve_neumann
from .dynamics import EvolutionConfig, evolve, linear_rates
from .smallwave import solve_small_wave
from .spectral import (
    Finite,
    FluidParams,
    GridFunction,
    Infinite,
    apply_multiplier,
    discrete_norms,
    inner,
    multiplier_m,
    symbol_linear_operator,
)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float = 0.0


def random_profile(rng: np.random.Generator, n: int, c1: float, kmax: int = 6) -> GridFunction:
    """Random smooth mean-zero profile scaled to the given C^1 norm."""
    spec = np.zeros(n // 2 + 1, complex)
    k = np.arange(1, kmax + 1)
    spec[1:kmax + 1] = (rng.normal(size=kmax) + 1j * rng.normal(size=kmax)) / k**2
    v = np.fft.irfft(spec, n=n)
    f = GridFunction(v - v.mean(), mean_zero=True)
    return f * (c1 / discrete_norms(f).c1_norm)


def _le(name, value, threshold, t0) -> Check:
    return Check(name, float(value), threshold, bool(value <= threshold), time.perf_counter() - t0)


def check_flat_dtn(rng, n=64, nz=48) -> List[Check]:
    out = []
    for depth in (Finite(1.0), Infinite(10.0)):
        t0 = time.perf_counter()
        ws = build_workspace(GridFunction.zeros(n), depth, nz)
        err = 0.0
        for k in range(1, 9):
            g = apply_dtn(ws, GridFunction.from_callable(lambda x: np.cos(k * x), n))
            exact = multiplier_m(k, depth) * np.cos(k * g.x)
            err = max(err, np.abs(g.values - exact).max() / np.abs(exact).max())
        out.append(_le(f"flat DtN oracle ({type(depth).__name__})", err, 1e-8, t0))
    return out


def check_operator_algebra(rng, pairs=5, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    sym = pos = mean = 0.0
    for _ in range(pairs):
        eta = random_profile(rng, n, 0.5)
        f, h = random_profile(rng, n, 1.0), random_profile(rng, n, 1.0)
        ws = build_workspace(eta, Finite(1.0), nz)
        gf, gh = apply_dtn(ws, f), apply_dtn(ws, h)
        sym = max(sym, abs(inner(f.values, gh.values) - inner(gf.values, h.values)))
        pos = max(pos, -inner(f.values, gf.values) / inner(f.values, f.values))
        mean = max(mean, abs(gf.mean()))
    return [_le("DtN symmetry defect", sym, 1e-8, t0), _le("DtN positivity (negated)", pos, 1e-10, t0),
            _le("DtN output mean", mean, 1e-10, t0)]


def check_round_trips(rng, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    eta = random_profile(rng, n, 0.4)
    f = random_profile(rng, n, 1.0)
    ws = build_workspace(eta, Infinite(), nz)
    back = solve_neumann(ws, apply_dtn(ws, f))
    e1 = (back - f).sup() / f.sup()
    t1 = time.perf_counter()
    back2 = invert_capillary_gravity(capillary_gravity(f, 1.0, 1.0), 1.0, 1.0)
    e2 = (back2 - f).sup() / f.sup()
    return [_le("Neumann round trip", e1, 1e-8, t0), _le("capillary-gravity round trip", e2, 1e-8, t1)]


def check_perfect_derivative(rng, n=64) -> List[Check]:
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        eta = random_profile(rng, n, 1.0)
        w = capillary_gravity(eta, 1.0, 1.0)
        d = np.fft.irfft(1j * np.arange(n // 2 + 1) * np.fft.rfft(eta.values), n=n)
        worst = max(worst, abs(inner(d, w.values)) / (1 + eta.sup() ** 3))
    return [_le("perfect-derivative identity", worst, 1e-10, t0)]


def check_jacobian_anchor(rng, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    params = FluidParams(1.0, 1.0, 1.0, Infinite())
    phi = GridFunction.from_callable(np.cos, n)
    worst = 0.0
    for _ in range(4):
        v = random_profile(rng, n, 1.0)
        fd = jacobian_action(GridFunction.zeros(n), 0.0, phi, params, v, nz=nz)
        exact = apply_multiplier(v, symbol_linear_operator(params))
        worst = max(worst, (fd - exact).sup() / exact.sup())
    return [_le("Jacobian anchor at origin", worst, 1e-6, t0)]


def check_small_wave(rng, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    params = FluidParams(1.0, 1.0, 1.0, Infinite())
    phi = GridFunction.from_callable(np.cos, n)
    rep = solve_small_wave(0.01 * phi, params, tol=1e-12, nz=nz)
    t1 = time.perf_counter()
    eq = (rep.solution + compact_map_F(rep.solution, 0.01, phi, params, nz=nz)).sup()
    t2 = time.perf_counter()
    eta0 = random_profile(rng, n, 1e-2)
    rig = solve_small_wave(GridFunction.zeros(n), params, tol=1e-13, max_iter=100, eta0=eta0, nz=nz)
    return [_le("small-wave residual", rep.final_residual, 1e-9, t0),
            _le("small-wave terminal contraction ratio", rep.terminal_ratio, 0.5, t0),
            _le("compact-map equivalence", eq, 1e-10, t1),
            _le("rigidity at zero forcing", rig.solution.sup(), 1e-10, t2)]


def check_dynamics(rng, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    params = FluidParams(1.0, 1.0, 1.0, Infinite())
    eta0 = random_profile(rng, n, 1e-5, kmax=4)
    cfg = EvolutionConfig(dt=1e-3, T=0.05, sample_every=10, nz=nz)
    traj = evolve(eta0, cfg, params)
    mass = max(abs(s.mean()) / (1 + s.sup()) for s in traj.states)
    lam = linear_rates(n, params)
    c0 = np.fft.rfft(eta0.values)
    c1 = np.fft.rfft(traj.final.values)
    k = np.arange(1, 5)
    rel = np.abs(c1[k] / (c0[k] * np.exp(lam[k] * traj.times[-1])) - 1).max()
    return [_le("mass conservation", mass, 1e-12, t0), _le("linear decay rates", rel, cfg.dt, t0)]


def check_bulk(rng, n=64, nz=32) -> List[Check]:
    t0 = time.perf_counter()
    eta = random_profile(rng, n, 0.3)
    ws = build_workspace(eta, Finite(1.0), nz)
    bulk = reconstruct_bulk(ws, random_profile(rng, n, 1.0), gravity=1.0)
    return [_le("bulk divergence / velocity scale", bulk.max_divergence() / bulk.velocity_scale(), 1e-6, t0),
            _le("bottom vertical velocity", bulk.bottom_vertical_velocity() / bulk.velocity_scale(), 1e-8, t0)]


SUITE: List[Callable] = [check_flat_dtn, check_operator_algebra, check_round_trips, check_perfect_derivative,
                         check_jacobian_anchor, check_small_wave, check_dynamics, check_bulk]


def run_suite(seed: int = 0) -> List[Check]:
    rng = np.random.default_rng(seed)
    results: List[Check] = []
    for fn in SUITE:
        results.extend(fn(rng))
    return results
