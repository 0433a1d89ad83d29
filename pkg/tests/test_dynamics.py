import numpy as np
import pytest

from darcy_waves.dynamics import EvolutionConfig, Forcing, evolve, linear_rates, rhs, traveling_invariance
from darcy_waves.errors import SolverError
from darcy_waves.smallwave import solve_small_wave
from darcy_waves.spectral import Finite, FluidParams, GridFunction, Infinite, multiplier_m, shift
from darcy_waves.verify import random_profile

N = 64
NZ = 32
P = FluidParams(1.0, 1.0, 1.0, Infinite())
PHI = GridFunction.from_callable(np.cos, N)
Z = GridFunction.zeros(N)


def test_rhs_zero_state():
    assert rhs(Z, 0.0, EvolutionConfig(nz=NZ), P).sup() == 0


def test_rhs_at_traveling_wave_is_translation():
    eta = solve_small_wave(0.01 * PHI, P, tol=1e-13, nz=NZ).solution
    cfg = EvolutionConfig(nz=NZ, forcing=Forcing(0.01, PHI))
    slope = np.fft.irfft(1j * np.arange(N // 2 + 1) * np.fft.rfft(eta.values), n=N)
    assert np.abs(rhs(eta, 0.0, cfg, P).values + P.speed * slope).max() <= 1e-10


def test_rhs_linear_regime():
    eps = 1e-6
    eta = eps * PHI
    exact = -multiplier_m(1, P.depth) * 2 * eta
    assert (rhs(eta, 0.0, EvolutionConfig(nz=NZ), P) - exact).sup() <= 1e-8 * exact.sup()


def test_evolve_zero_stays_zero():
    traj = evolve(Z, EvolutionConfig(dt=1e-2, T=0.1, sample_every=2, nz=NZ), P)
    assert len(traj) == 6
    assert all(s.sup() == 0 for s in traj.states)


def test_linear_decay_and_mass():
    eta0 = random_profile(np.random.default_rng(0), N, 1e-5, kmax=5)
    cfg = EvolutionConfig(dt=1e-3, T=0.1, sample_every=20, nz=NZ)
    traj = evolve(eta0, cfg, P)
    lam = linear_rates(N, P)
    c0 = np.fft.rfft(eta0.values)
    k = np.arange(1, 6)
    for t, s in traj:
        assert abs(s.mean()) <= 1e-12 * (1 + s.sup())
        ck = np.fft.rfft(s.values)[k]
        assert np.abs(ck / (c0[k] * np.exp(lam[k] * t)) - 1).max() <= cfg.dt


def test_bottom_collision_keeps_last_valid_state():
    deep = P.replace(depth=Finite(0.5))
    traj = evolve(Z, EvolutionConfig(dt=0.01, T=5.0, forcing=Forcing(3.0, PHI), nz=NZ, sample_every=50), deep)
    assert traj.stopped is not None and "bottom" in traj.stopped
    assert traj.times[-1] < 5.0
    assert traj.final.values.min() + 0.5 > 0


def test_blowup_detection():
    cfg = EvolutionConfig(dt=0.01, T=1.0, forcing=Forcing(1.0, PHI), nz=NZ, blowup=1e-3)
    with pytest.raises(SolverError, match="reduce dt"):
        evolve(Z, cfg, P)


def test_invariance_trivial():
    cfg = EvolutionConfig(dt=0.1, nz=NZ)
    assert traveling_invariance(Z, 0.0, P, cfg) == 0


def test_invariance_first_order_in_dt():
    eta = solve_small_wave(0.01 * PHI, P, tol=1e-13, nz=NZ).solution
    d1 = traveling_invariance(eta, 0.01, P, EvolutionConfig(dt=0.02, nz=NZ), phi=PHI)
    d2 = traveling_invariance(eta, 0.01, P, EvolutionConfig(dt=0.01, nz=NZ), phi=PHI)
    assert d2 <= 0.5 * d1 * 1.05


def test_relaxation_of_perturbed_wave():
    eta = solve_small_wave(0.01 * PHI, P, tol=1e-13, nz=NZ).solution
    noisy = eta + random_profile(np.random.default_rng(1), N, 1e-3)
    cfg = EvolutionConfig(dt=0.01, T=2.0, scheme="if-rk2", forcing=Forcing(0.01, PHI), nz=NZ, sample_every=50)
    traj = evolve(noisy, cfg, P)
    drift = [(shift(s, -P.speed * t) - eta).sup() for t, s in traj]
    assert all(b < a for a, b in zip(drift, drift[1:]))
    # slowest mode decays like exp(-m(1)(sigma + g) t) = exp(-4) at t = 2
    assert drift[-1] < 3 * np.exp(-4.0) * drift[0]


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=1.0, T=0.5)
    with pytest.raises(ValueError):
        EvolutionConfig(scheme="rk4")
