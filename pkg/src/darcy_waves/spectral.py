"""Periodic grid functions, Fourier multipliers and discrete norms on [0, 2*pi).

Every field in the package lives on the uniform grid ``x_j = 2*pi*j/N`` with
``N`` a power of two.  Spectra use the normalization

    f(x) = sum_k c_k exp(i k x),      c_k = fft(f)[k] / N,

with wavenumbers ordered as in :func:`numpy.fft.fftfreq` (``k = -N/2`` is the
Nyquist mode).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np

__all__ = [
    "GridFunction",
    "Finite",
    "Infinite",
    "Depth",
    "FluidParams",
    "MultiplierSymbol",
    "Norms",
    "grid",
    "wavenumbers",
    "multiplier_m",
    "multiplier_m1",
    "symbol_m",
    "symbol_m1",
    "symbol_dx",
    "symbol_neg_laplacian",
    "symbol_linear_operator",
    "apply_multiplier",
    "project_mean_zero",
    "discrete_norms",
    "derivative",
    "interpolate",
    "shift",
    "to_fine",
    "from_fine",
    "inner",
    "MEAN_ZERO_TOL",
]

MEAN_ZERO_TOL = 1e-12


def _check_size(n: int) -> None:
    if n < 4 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 4, got {n}")


def grid(n: int) -> np.ndarray:
    _check_size(n)
    return 2.0 * np.pi * np.arange(n) / n


def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in FFT order, ``[0, 1, ..., N/2-1, -N/2, ..., -1]``."""
    return np.fft.fftfreq(n, d=1.0 / n).round().astype(int)


class GridFunction:
    """Real periodic function sampled on the uniform N-point grid.

    The spectrum is computed on first access and cached; concurrent readers
    see a single computation.
    """

    __slots__ = ("_values", "mean_zero", "_spectrum", "_lock")

    def __init__(self, values, mean_zero: bool = False):
        vals = np.array(values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("GridFunction values must be one-dimensional")
        _check_size(vals.size)
        if not np.all(np.isfinite(vals)):
            raise ValueError("GridFunction values must be finite")
        vals.setflags(write=False)
        self._values = vals
        self._spectrum = None
        self._lock = threading.Lock()
        self.mean_zero = bool(mean_zero)
        if self.mean_zero:
            scale = max(1.0, float(np.abs(vals).max()))
            if abs(vals.mean()) > MEAN_ZERO_TOL * scale:
                raise ValueError(
                    f"values flagged mean-zero have mean {vals.mean():.3e}"
                )

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], n: int, mean_zero=False):
        return cls(fn(grid(n)), mean_zero=mean_zero)

    @classmethod
    def from_spectrum(cls, coeffs, mean_zero=False):
        """Inverse of :attr:`spectrum`; the imaginary residue is discarded."""
        coeffs = np.asarray(coeffs, dtype=complex)
        vals = np.fft.ifft(coeffs * coeffs.size).real
        if mean_zero:
            vals = vals - vals.mean()
        return cls(vals, mean_zero=mean_zero)

    @classmethod
    def zeros(cls, n: int):
        return cls(np.zeros(n), mean_zero=True)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.size

    N = n

    @property
    def x(self) -> np.ndarray:
        return grid(self.n)

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            with self._lock:
                if self._spectrum is None:
                    spec = np.fft.fft(self._values) / self.n
                    spec.setflags(write=False)
                    self._spectrum = spec
        return self._spectrum

    def mean(self) -> float:
        return float(self._values.mean())

    def sup(self) -> float:
        return float(np.abs(self._values).max())

    def with_values(self, values, mean_zero=None) -> "GridFunction":
        return GridFunction(values, self.mean_zero if mean_zero is None else mean_zero)

    # arithmetic keeps the mean-zero flag only when it is guaranteed
    def __add__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction(self._values + other._values, self.mean_zero and other.mean_zero)
        return GridFunction(self._values + float(other), self.mean_zero and float(other) == 0.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction(self._values - other._values, self.mean_zero and other.mean_zero)
        return GridFunction(self._values - float(other), self.mean_zero and float(other) == 0.0)

    def __neg__(self):
        return GridFunction(-self._values, self.mean_zero)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction(self._values * other._values)
        return GridFunction(self._values * float(other), self.mean_zero)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self._values / float(other), self.mean_zero)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"GridFunction(N={self.n}, sup={self.sup():.3e}, mean_zero={self.mean_zero})"


def _same_grid(a: GridFunction, b: GridFunction) -> None:
    if a.n != b.n:
        raise ValueError(f"grid size mismatch: {a.n} vs {b.n}")


def _as_grid_function(f) -> GridFunction:
    return f if isinstance(f, GridFunction) else GridFunction(f)


# ---------------------------------------------------------------------------
# Physical parameters


@dataclass(frozen=True)
class Finite:
    """Finite depth with a flat rigid bottom at ``y = -b``."""

    b: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"finite depth requires b > 0, got {self.b}")

    @property
    def height(self) -> float:
        return float(self.b)

    is_finite = True


@dataclass(frozen=True)
class Infinite:
    """Infinite depth, realized numerically by truncating the strip at ``z = -L``."""

    L: float = 10.0

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"truncation depth L must be positive, got {self.L}")

    @property
    def height(self) -> float:
        return float(self.L)

    is_finite = False


Depth = Union[Finite, Infinite]


@dataclass(frozen=True)
class FluidParams:
    sigma: float
    gravity: float
    speed: float
    depth: Depth = field(default_factory=Infinite)

    def __post_init__(self):
        errors = []
        if self.sigma < 0:
            errors.append("sigma must be >= 0")
        if self.gravity < 0:
            errors.append("gravity must be >= 0")
        if not self.sigma + self.gravity > 0:
            errors.append("sigma + gravity must be positive")
        if self.speed == 0:
            errors.append("speed must be nonzero")
        if not isinstance(self.depth, (Finite, Infinite)):
            errors.append("depth must be Finite(b) or Infinite(L)")
        if errors:
            raise ValueError("; ".join(errors))

    def replace(self, **changes) -> "FluidParams":
        kw = dict(sigma=self.sigma, gravity=self.gravity, speed=self.speed, depth=self.depth)
        kw.update(changes)
        return FluidParams(**kw)


# ---------------------------------------------------------------------------
# Multipliers


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier given by a vectorized function of integer wavenumbers.

    ``singular_at_zero`` marks symbols that are only defined on mean-zero
    functions; the zero mode of the output is then set to 0.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    tag: str = ""
    singular_at_zero: bool = False

    def __call__(self, k):
        k = np.asarray(k)
        if self.singular_at_zero and np.any(k == 0):
            kk = np.where(k == 0, 1, k)
            out = np.asarray(self.evaluator(kk), dtype=complex)
            return np.where(k == 0, np.nan + 0j, out)
        return np.asarray(self.evaluator(k), dtype=complex)

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        return MultiplierSymbol(
            lambda k: self(k) * other(k),
            f"({self.tag})*({other.tag})",
            self.singular_at_zero or other.singular_at_zero,
        )

    def __add__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        return MultiplierSymbol(
            lambda k: self(k) + other(k),
            f"({self.tag})+({other.tag})",
            self.singular_at_zero or other.singular_at_zero,
        )


def _m_values(k, depth: Depth) -> np.ndarray:
    ak = np.abs(np.asarray(k, dtype=float))
    if isinstance(depth, Finite):
        return ak * np.tanh(depth.b * ak)
    return ak


def multiplier_m(k, depth: Depth):
    """Symbol of the flat-surface Dirichlet-to-Neumann operator.

    ``|k| tanh(b|k|)`` for finite depth and ``|k|`` for infinite depth.
    """
    out = _m_values(k, depth)
    return float(out) if np.ndim(out) == 0 else out


def _linear_symbol(k, params: FluidParams) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return -1j * params.speed * k + _m_values(k, params.depth) * (params.sigma * k**2 + params.gravity)


def multiplier_m1(k, params: FluidParams):
    """Inverse symbol of ``-speed*d/dx + m(D)(-sigma*Laplacian + g)``; needs ``k != 0``."""
    if np.any(np.asarray(k) == 0):
        raise ValueError("m1 is undefined at k = 0 (acts on mean-zero functions only)")
    out = 1.0 / _linear_symbol(k, params)
    return complex(out) if np.ndim(out) == 0 else out


def symbol_m(depth: Depth) -> MultiplierSymbol:
    return MultiplierSymbol(lambda k: _m_values(k, depth), f"m[{depth}]")


def symbol_m1(params: FluidParams) -> MultiplierSymbol:
    return MultiplierSymbol(lambda k: 1.0 / _linear_symbol(k, params), "m1", singular_at_zero=True)


def symbol_linear_operator(params: FluidParams) -> MultiplierSymbol:
    """``-speed*d/dx + m(D)(-sigma*Laplacian + g)``, the linearization of the wave residual at 0."""
    return MultiplierSymbol(lambda k: _linear_symbol(k, params), "L0")


def symbol_dx() -> MultiplierSymbol:
    return MultiplierSymbol(lambda k: 1j * np.asarray(k, dtype=float), "d/dx")


def symbol_neg_laplacian() -> MultiplierSymbol:
    return MultiplierSymbol(lambda k: np.asarray(k, dtype=float) ** 2, "-Laplacian")


def apply_multiplier(f: GridFunction, sym: MultiplierSymbol) -> GridFunction:
    """Apply ``sym(D)`` to ``f``.

    A symbol that is not real at the Nyquist wavenumber ``-N/2`` is zeroed
    there, which keeps the output real.  Raises ``ValueError`` when ``f`` has a
    nonzero mean and the symbol is singular at zero, or when the symbol lacks
    Hermitian symmetry and the output would be complex.
    """
    f = _as_grid_function(f)
    n = f.n
    k = wavenumbers(n)
    spec = f.spectrum
    scale = max(1.0, f.sup())
    if sym.singular_at_zero and abs(spec[0]) > MEAN_ZERO_TOL * scale:
        raise ValueError(
            f"symbol '{sym.tag}' is singular at k=0 but input has mean {spec[0].real:.3e}"
        )
    vals = sym(k)
    if sym.singular_at_zero:
        vals = vals.copy()
        vals[0] = 0.0
    nyq = n // 2
    if abs(vals[nyq].imag) > 0:
        vals = vals.copy()
        vals[nyq] = 0.0
    coeffs = vals * spec * n
    out = np.fft.ifft(coeffs)
    resid = np.abs(out.imag).max()
    # roundoff in the inverse transform scales with the coefficient mass
    if resid > 1e-12 * max(1.0, np.abs(coeffs).sum() / n):
        raise ValueError(f"symbol '{sym.tag}' produced complex output (residue {resid:.2e})")
    mean_zero = f.mean_zero or sym.singular_at_zero or abs(vals[0]) == 0
    real = out.real
    if mean_zero:
        real = real - real.mean()
    return GridFunction(real, mean_zero=mean_zero)


def project_mean_zero(f: GridFunction) -> GridFunction:
    f = _as_grid_function(f)
    return GridFunction(f.values - f.values.mean(), mean_zero=True)


# ---------------------------------------------------------------------------
# Fast real-FFT helpers used by the solvers


def _ik(n: int) -> np.ndarray:
    ik = 1j * np.arange(n // 2 + 1, dtype=float)
    ik[-1] = 0.0
    return ik


def derivative(values: np.ndarray, order: int = 1, axis: int = 0) -> np.ndarray:
    """Spectral x-derivative of real samples along ``axis`` (Nyquist mode zeroed)."""
    n = values.shape[axis]
    ik = _ik(n) ** order
    shape = [1] * values.ndim
    shape[axis] = ik.size
    return np.fft.irfft(np.fft.rfft(values, axis=axis) * ik.reshape(shape), n=n, axis=axis)


def to_fine(values: np.ndarray, m: int, axis: int = 0) -> np.ndarray:
    """Spectral interpolation of samples from N to M >= N points (Nyquist dropped)."""
    n = values.shape[axis]
    return spec_to_fine(np.fft.rfft(values, axis=axis), n, m, axis)


def spec_to_fine(spec: np.ndarray, n: int, m: int, axis: int = 0) -> np.ndarray:
    spec = np.moveaxis(spec, axis, 0)
    pad = np.zeros((m // 2 + 1,) + spec.shape[1:], dtype=complex)
    pad[: n // 2] = spec[: n // 2]
    out = np.fft.irfft(pad, n=m, axis=0) * (m / n)
    return np.moveaxis(out, 0, axis)


def fine_to_spec(values: np.ndarray, n: int, axis: int = 0) -> np.ndarray:
    """Real-FFT of fine-grid samples truncated to the N-grid modes (Nyquist zeroed)."""
    m = values.shape[axis]
    spec = np.moveaxis(np.fft.rfft(values, axis=axis), axis, 0)[: n // 2 + 1] * (n / m)
    spec = spec.copy()
    spec[n // 2] = 0.0
    return np.moveaxis(spec, 0, axis)


def from_fine(values: np.ndarray, n: int, axis: int = 0) -> np.ndarray:
    return np.fft.irfft(fine_to_spec(values, n, axis), n=n, axis=axis)


def dealiased_size(n: int) -> int:
    return 3 * n // 2


def interpolate(f: GridFunction, n_new: int) -> GridFunction:
    """Resample ``f`` onto an ``n_new``-point grid by zero padding or truncation."""
    f = _as_grid_function(f)
    _check_size(n_new)
    n = f.n
    spec = np.fft.rfft(f.values)
    out = np.zeros(n_new // 2 + 1, dtype=complex)
    keep = min(n, n_new) // 2
    out[:keep] = spec[:keep]
    vals = np.fft.irfft(out, n=n_new) * (n_new / n)
    if f.mean_zero:
        vals -= vals.mean()
    return GridFunction(vals, f.mean_zero)


def shift(f: GridFunction, a: float) -> GridFunction:
    """Return ``x -> f(x - a)`` evaluated spectrally."""
    f = _as_grid_function(f)
    n = f.n
    k = np.arange(n // 2 + 1, dtype=float)
    raw = np.fft.rfft(f.values)
    spec = raw * np.exp(-1j * k * a)
    spec[-1] = raw[-1].real * np.cos(n // 2 * a)
    vals = np.fft.irfft(spec, n=n)
    if f.mean_zero:
        vals -= vals.mean()
    return GridFunction(vals, f.mean_zero)


def inner(f, g) -> float:
    """Trapezoidal quadrature of ``f*g`` over the period (spectrally exact)."""
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f)
    gv = g.values if isinstance(g, GridFunction) else np.asarray(g)
    return float(2.0 * np.pi * np.mean(fv * gv))


# ---------------------------------------------------------------------------
# Norms


class Norms(NamedTuple):
    sup_norm: float
    c1_norm: float
    l2_norm: float
    holder_seminorm: float


def _periodic_holder(dv: np.ndarray, beta: float) -> float:
    n = dv.size
    if n < 2 or not np.any(dv):
        return 0.0
    h = 2.0 * np.pi / n
    best = 0.0
    for lag in range(1, n // 2 + 1):
        dist = lag * h
        diff = np.abs(dv - np.roll(dv, lag)).max()
        best = max(best, diff / dist**beta)
    return float(best)


def discrete_norms(f: GridFunction, beta: float = 0.5) -> Norms:
    """Grid surrogates of the sup, C^1, L^2 norms and the C^{1,beta} seminorm."""
    f = _as_grid_function(f)
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    v = f.values
    dv = derivative(v)
    sup = float(np.abs(v).max())
    c1 = sup + float(np.abs(dv).max())
    l2 = math.sqrt(inner(v, v))
    return Norms(sup, c1, l2, _periodic_holder(dv, beta))
