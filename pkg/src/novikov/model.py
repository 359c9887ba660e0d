"""Model parameters, state container and the nonlocal right-hand side.

The evolved system is

    u_t + k u^2 u_x = -Lam^{-2} A - d_x Lam^{-2} B - lambda u,
    rho_t + k u^2 rho_x = -k rho u u_x,

with Lam^{-2} = (1 - d_x^2)^{-1},
    A = (k/2) (u_x^3 - u_x rho^2),
    B = g(u) + (3k/2) u u_x^2 - (k/3) u^3 - (k/2) u rho^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import (
    CorruptStateError,
    SpectralField,
    SpectralGrid,
    check_finite,
    dealiased_product,
    derivative,
    green_convolve,
    green_convolve_dx,
    helmholtz,
    helmholtz_inverse,
)

NOVIKOV_G = (0.0, 0.0, 4.0 / 3.0)


@dataclass(frozen=True)
class ModelParams:
    """One instance of the weakly dissipative two-component system.

    ``g_coeffs[m]`` multiplies ``u**(m + 1)``; the constant term is excluded by
    construction so g(0) = 0 always holds. ``g_func`` is an optional hook for
    a non-polynomial g (evaluated pointwise, not dealiased).
    """

    k: float
    lam: float
    g_coeffs: tuple = ()
    g_func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k == 0:
            raise ValueError("k must be a nonzero real number")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be a nonnegative real number")
        coeffs = tuple(float(c) for c in np.atleast_1d(self.g_coeffs))
        if not all(np.isfinite(coeffs)):
            raise ValueError("g coefficients must be finite")
        object.__setattr__(self, "g_coeffs", coeffs)
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def g_degree(self) -> int:
        return len(self.g_coeffs)


@dataclass(frozen=True)
class FieldPair:
    u: SpectralField
    rho: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if not self.u.grid.same_as(self.rho.grid):
            raise ValueError("u and rho must share a grid")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def is_finite(self) -> bool:
        return self.u.is_finite and self.rho.is_finite

    @classmethod
    def from_arrays(cls, grid: SpectralGrid, u, rho, time: float = 0.0) -> "FieldPair":
        return cls(grid.field(u), grid.field(rho), float(time))

    def replace(self, u=None, rho=None, time=None) -> "FieldPair":
        return FieldPair(
            self.u if u is None else u,
            self.rho if rho is None else rho,
            self.time if time is None else time,
        )


@dataclass(frozen=True)
class Nonlinearity:
    A: SpectralField
    B: SpectralField


def _poly(coeffs, u: np.ndarray) -> np.ndarray:
    # Horner on g(u) = sum_m c_m u^(m+1)
    acc = np.zeros_like(u)
    for c in reversed(coeffs):
        acc = (acc + c) * u
    return acc


def eval_g(params: ModelParams, u: SpectralField) -> SpectralField:
    """Pointwise g(u) on the grid samples."""
    if params.g_func is not None:
        vals = np.asarray(params.g_func(u.values), dtype=float)
    else:
        vals = _poly(params.g_coeffs, u.values)
    return u.grid.field(vals)


def _g_dealiased(params: ModelParams, u: SpectralField) -> SpectralField:
    # Polynomial g evaluated on the padded grid; exact projection up to degree 3.
    if params.g_func is not None:
        return eval_g(params, u)
    g = u.grid
    return g.field(g.unpad(_poly(params.g_coeffs, g.pad(u.values))))


def nonlinearity(params: ModelParams, state: FieldPair) -> Nonlinearity:
    k = params.k
    u, rho = state.u, state.rho
    ux = derivative(u)
    A = (k / 2) * (dealiased_product([ux, ux, ux]) - dealiased_product([ux, rho, rho]))
    B = (
        _g_dealiased(params, u)
        + (1.5 * k) * dealiased_product([u, ux, ux])
        - (k / 3) * dealiased_product([u, u, u])
        - (k / 2) * dealiased_product([u, rho, rho])
    )
    return Nonlinearity(A, B)


def _checked(term: str, f: SpectralField) -> SpectralField:
    check_finite(f.values, term)
    return f


def _transport(params: ModelParams, state: FieldPair):
    u, rho = state.u, state.rho
    ux = _checked("u_x", derivative(u))
    rhox = _checked("rho_x", derivative(rho))
    k = params.k
    adv_u = _checked("k u^2 u_x", k * dealiased_product([u, u, ux]))
    adv_rho = _checked("k u^2 rho_x", k * dealiased_product([u, u, rhox]))
    src_rho = _checked("k rho u u_x", k * dealiased_product([rho, u, ux]))
    return ux, adv_u, adv_rho, src_rho


def rhs(params: ModelParams, state: FieldPair, grouping: str = "nonlocal"):
    """Time derivatives (du/dt, drho/dt) of the nonlocal system.

    ``grouping="nonlocal"`` applies Lam^{-2} to A and d_x Lam^{-2} to B as
    written above. ``grouping="split"`` separates the rho-free part from the
    rho coupling, (k/2) Lam^{-2}(u_x rho^2) + (k/2) d_x Lam^{-2}(u rho^2);
    the two are algebraically identical.
    """
    for name, f in (("u", state.u), ("rho", state.rho)):
        check_finite(f.values, name)
    k = params.k
    ux, adv_u, adv_rho, src_rho = _transport(params, state)
    if grouping == "nonlocal":
        nl = nonlinearity(params, state)
        A = _checked("A", nl.A)
        B = _checked("B", nl.B)
        nonlocal_u = helmholtz_inverse(A) + green_convolve_dx(B)
    elif grouping == "split":
        u, rho = state.u, state.rho
        a0 = (k / 2) * dealiased_product([ux, ux, ux])
        b0 = (
            _g_dealiased(params, u)
            + (1.5 * k) * dealiased_product([u, ux, ux])
            - (k / 3) * dealiased_product([u, u, u])
        )
        f1 = helmholtz_inverse(a0) + green_convolve_dx(b0)
        f2 = (k / 2) * (
            helmholtz_inverse(dealiased_product([ux, rho, rho]))
            + green_convolve_dx(dealiased_product([u, rho, rho]))
        )
        nonlocal_u = _checked("f1", f1) - _checked("f2", f2)
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    du = -adv_u - nonlocal_u - params.lam * state.u
    drho = -adv_rho - src_rho
    return _checked("du_dt", du), _checked("drho_dt", drho)


def rhs_convolution_form(params: ModelParams, state: FieldPair):
    """Same right-hand side written with the kernel P = exp(-|x|)/2:

    u_t + k u^2 u_x = -P*A - (d_x P)*B - lambda u.
    """
    for name, f in (("u", state.u), ("rho", state.rho)):
        check_finite(f.values, name)
    _, adv_u, adv_rho, src_rho = _transport(params, state)
    nl = nonlinearity(params, state)
    pa = _checked("P*A", green_convolve(nl.A))
    pb = _checked("P_x*B", green_convolve_dx(nl.B))
    du = -adv_u - pa - pb - params.lam * state.u
    drho = -adv_rho - src_rho
    return _checked("du_dt", du), _checked("drho_dt", drho)


def momentum_density(state: FieldPair) -> SpectralField:
    """y = u - u_xx."""
    return helmholtz(state.u)


__all__ = [
    "CorruptStateError",
    "FieldPair",
    "ModelParams",
    "NOVIKOV_G",
    "Nonlinearity",
    "eval_g",
    "momentum_density",
    "nonlinearity",
    "rhs",
    "rhs_convolution_form",
]
