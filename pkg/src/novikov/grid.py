"""Periodic Fourier grid on [-L, L) and the spectral operators built on it.

All transforms use numpy's FFT convention with the samples indexed from the
left edge x_0 = -L, so the trigonometric interpolant of a field is

    f(x) = (1/n) * sum_m  f_hat[m] * exp(i * xi_m * (x + L)).

Fields are immutable: their sample arrays are flagged read-only on creation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CorruptStateError(FloatingPointError):
    """Raised when a field (or an intermediate term) contains NaN or Inf."""

    def __init__(self, term: str, detail: str = ""):
        self.term = term
        msg = f"non-finite values in {term}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class GridMismatchError(ValueError):
    """Operands live on different grids."""


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    n_modes: int
    half_length: float
    x: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)
    # Fourier multiplier of (1 - d^2/dx^2)^{-1}
    inverse_helmholtz_symbol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_modes
        if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
            raise ValueError(f"n_modes must be an even integer >= 8, got {n!r}")
        if not (self.half_length > 0 and np.isfinite(self.half_length)):
            raise ValueError(f"half_length must be positive, got {self.half_length!r}")
        L = float(self.half_length)
        x = -L + np.arange(n) * (2.0 * L / n)
        xi = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * L / n)
        inv = 1.0 / (1.0 + xi**2)
        for arr in (x, xi, inv):
            arr.flags.writeable = False
        object.__setattr__(self, "n_modes", int(n))
        object.__setattr__(self, "half_length", L)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "wavenumbers", xi)
        object.__setattr__(self, "inverse_helmholtz_symbol", inv)

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_modes

    @property
    def nyquist(self) -> int:
        return self.n_modes // 2

    def same_as(self, other: "SpectralGrid") -> bool:
        return self is other or (
            self.n_modes == other.n_modes and self.half_length == other.half_length
        )

    def field(self, values) -> "SpectralField":
        return SpectralField(np.asarray(values, dtype=float), self)

    def sample(self, func) -> "SpectralField":
        """Field holding ``func(x)`` on the grid points."""
        return self.field(np.broadcast_to(func(self.x), self.x.shape).copy())

    def zeros(self) -> "SpectralField":
        return self.field(np.zeros(self.n_modes))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values)

    def inverse_transform(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs).real

    def multiplier(self, f: "SpectralField", symbol: np.ndarray, zero_nyquist=False):
        check_finite(f.values, "operand")
        c = self.transform(f.values) * symbol
        if zero_nyquist:
            c[self.nyquist] = 0.0
        return self.field(self.inverse_transform(c))

    def interpolate(self, f: "SpectralField", points) -> np.ndarray:
        """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

        Points outside [-L, L) are wrapped periodically. The Nyquist mode is
        taken as a cosine so the result is real for real data.
        """
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        c = self.transform(f.values)
        c[self.nyquist] *= 0.5
        c = np.concatenate([c, [c[self.nyquist]]])
        xi = np.concatenate([self.wavenumbers, [-self.wavenumbers[self.nyquist]]])
        phase = np.exp(1j * np.outer(pts + self.half_length, xi))
        out = (phase @ c).real / self.n_modes
        return out

    # Zero-padded representations: dealiased products and subgrid extrema.

    def refine(self, values: np.ndarray, factor: int = 2) -> np.ndarray:
        """Samples of the trigonometric interpolant on a grid ``factor`` times finer."""
        n, h = self.n_modes, self.nyquist
        c = self.transform(values)
        big = np.zeros(factor * n, dtype=complex)
        big[:h] = c[:h]
        big[-h + 1:] = c[h + 1:]
        big[h] = 0.5 * c[h]
        big[-h] = 0.5 * c[h]
        return np.fft.ifft(big).real * factor

    def pad(self, values: np.ndarray) -> np.ndarray:
        return self.refine(values, 2)

    def unpad(self, padded: np.ndarray) -> np.ndarray:
        n, h = self.n_modes, self.nyquist
        big = np.fft.fft(padded) * 0.5
        c = np.zeros(n, dtype=complex)
        c[:h] = big[:h]
        c[h + 1:] = big[-h + 1:]
        c[h] = big[h] + big[-h]
        return self.inverse_transform(c)


@dataclass(frozen=True, eq=False)
class SpectralField:
    values: np.ndarray
    grid: SpectralGrid

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_modes,):
            raise ValueError(
                f"field has shape {v.shape}, grid expects ({self.grid.n_modes},)"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def coefficients(self) -> np.ndarray:
        return self.grid.transform(self.values)

    def _coerce(self, other):
        if isinstance(other, SpectralField):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return SpectralField(self.values + self._coerce(other), self.grid)

    __radd__ = __add__

    def __sub__(self, other):
        return SpectralField(self.values - self._coerce(other), self.grid)

    def __rsub__(self, other):
        return SpectralField(self._coerce(other) - self.values, self.grid)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            raise TypeError("use dealiased_product for field-field products")
        return SpectralField(self.values * scalar, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.values, self.grid)


def check_finite(values: np.ndarray, term: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise CorruptStateError(term, f"first bad index {bad}")


def _check_same_grid(*fields: SpectralField) -> None:
    g0 = fields[0].grid
    for f in fields[1:]:
        if not g0.same_as(f.grid):
            raise GridMismatchError(
                f"grid ({f.grid.n_modes}, {f.grid.half_length}) differs from "
                f"({g0.n_modes}, {g0.half_length})"
            )


def derivative(f: SpectralField) -> SpectralField:
    """Spectral x-derivative; the Nyquist coefficient of the result is zeroed."""
    g = f.grid
    return g.multiplier(f, 1j * g.wavenumbers, zero_nyquist=True)


def second_derivative(f: SpectralField) -> SpectralField:
    g = f.grid
    return g.multiplier(f, -(g.wavenumbers**2))


def helmholtz_inverse(f: SpectralField) -> SpectralField:
    """Solve (1 - d^2/dx^2) g = f exactly on the trigonometric space."""
    g = f.grid
    return g.multiplier(f, g.inverse_helmholtz_symbol)


def helmholtz(f: SpectralField) -> SpectralField:
    g = f.grid
    return g.multiplier(f, 1.0 + g.wavenumbers**2)


def green_convolve(f: SpectralField) -> SpectralField:
    """Convolution with the periodized kernel P(x) = exp(-|x|)/2.

    P is the Green's function of 1 - d^2/dx^2, so this is the same operator as
    :func:`helmholtz_inverse`; the separate name keeps the convolution form of
    the equations readable.
    """
    return helmholtz_inverse(f)


def green_convolve_dx(f: SpectralField) -> SpectralField:
    """Convolution with dP/dx, i.e. ``derivative(helmholtz_inverse(f))``."""
    g = f.grid
    return g.multiplier(f, 1j * g.wavenumbers * g.inverse_helmholtz_symbol, zero_nyquist=True)


def analyticity_strip(f: SpectralField, floor: float = 1e-13) -> float:
    """Width delta of the analyticity strip, fitted from |f_hat(xi)| ~ exp(-delta xi).

    The fit uses the upper two thirds of the band of coefficients that sit
    above ``floor`` relative to the largest one. Returns inf when fewer than
    four such coefficients exist (the field is resolved down to roundoff).
    """
    g = f.grid
    h = g.nyquist
    c = np.abs(g.transform(f.values))[:h]
    if not c.max() > 0:
        return np.inf
    xi = g.wavenumbers[:h]
    live = c > floor * c.max()
    band = live & (xi >= xi[live].max() / 3)
    if band.sum() < 4:
        return np.inf
    slope = np.polyfit(xi[band], np.log(c[band]), 1)[0]
    return float(-slope) if slope < 0 else 0.0


def dealiased_product(fs) -> SpectralField:
    """Pointwise product of two or three fields without aliasing.

    The operands are interpolated onto a 2n grid, multiplied there and the
    result is truncated back to the n retained modes. Quadratic and cubic
    products of band-limited fields are therefore exact projections.
    """
    fs = list(fs)
    if not 2 <= len(fs) <= 3:
        raise ValueError(f"dealiased_product takes 2 or 3 fields, got {len(fs)}")
    _check_same_grid(*fs)
    g = fs[0].grid
    for i, f in enumerate(fs):
        check_finite(f.values, f"factor {i}")
    prod = g.pad(fs[0].values)
    for f in fs[1:]:
        prod = prod * g.pad(f.values)
    return g.field(g.unpad(prod))
