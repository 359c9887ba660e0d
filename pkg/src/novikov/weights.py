"""Weight functions psi(x) = exp(a|x|^b) (1 + |x|^c) log(e + |x|)^d and
sampled checks of the sub-multiplicative / moderate / admissible properties.

The checks are falsifiers over seeded finite samples: a failing report is a
counterexample, a passing one only says none was found.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

LOG_MAX = np.log(np.finfo(float).max)
C_NEG_FLOOR = 1e-12


class WeightOverflowError(OverflowError):
    def __init__(self, x: float, name: str = ""):
        self.x = float(x)
        super().__init__(f"weight {name or '<anon>'} overflows at x = {self.x:.6g}")


@dataclass(frozen=True)
class WeightSpec:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    theta: float | None = None
    truncation_level: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"need a >= 0, got {self.a}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"need 0 <= b <= 1, got {self.b}")
        if self.a * self.b >= 1:
            raise ValueError(f"need a*b < 1, got a*b = {self.a * self.b}")
        if self.theta is not None and not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.truncation_level is not None and not self.truncation_level > 0:
            raise ValueError("truncation level must be positive")

    def untruncated(self) -> "WeightSpec":
        return WeightSpec(self.a, self.b, self.c, self.d, self.theta, None, self.name)

    def truncated(self, level: float) -> "WeightSpec":
        return WeightSpec(self.a, self.b, self.c, self.d, self.theta, level, self.name)

    def log_eval(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        if self.c < 0:
            ax_c = np.maximum(ax, C_NEG_FLOOR)
        else:
            ax_c = ax
        with np.errstate(divide="ignore"):
            out = (
                self.a * ax**self.b
                + np.log1p(ax_c**self.c)
                + self.d * np.log(np.log(np.e + ax))
            )
        if self.truncation_level is not None:
            out = np.minimum(out, np.log(self.truncation_level))
        return out

    def __call__(self, x):
        return eval_weight(self, x)


@dataclass(frozen=True)
class CustomWeight:
    """A weight outside the family, given by its logarithm."""

    log_func: Callable
    name: str = "custom"
    truncation_level: float | None = None

    def log_eval(self, x):
        out = np.asarray(self.log_func(np.asarray(x, dtype=float)), dtype=float)
        if self.truncation_level is not None:
            out = np.minimum(out, np.log(self.truncation_level))
        return out

    def __call__(self, x):
        return eval_weight(self, x)


def eval_weight(w, x):
    """psi(x), or min(psi(x), N) when a truncation level N is set."""
    lv = np.asarray(w.log_eval(x))
    if np.any(lv > LOG_MAX):
        bad = np.atleast_1d(np.asarray(x, dtype=float))[np.argmax(np.atleast_1d(lv))]
        raise WeightOverflowError(bad, getattr(w, "name", ""))
    out = np.exp(lv)
    return float(out) if out.ndim == 0 else out


def _pairs(samples: int, span, seed: int):
    rng = np.random.default_rng(seed)
    lo, hi = span
    return rng.uniform(lo, hi, samples), rng.uniform(lo, hi, samples)


@dataclass(frozen=True)
class SubmultiplicativeReport:
    passed: bool
    worst_ratio: float
    worst_pair: tuple
    samples: int


def check_submultiplicative(
    f, samples: int = 100_000, span=(-50.0, 50.0), seed: int = 0, rtol: float = 1e-12
) -> SubmultiplicativeReport:
    """Largest f(x+y) / (f(x) f(y)) over random pairs plus a coarse lattice."""
    x, y = _pairs(samples, span, seed)
    lat = np.linspace(span[0], span[1], 201)
    lx, ly = np.meshgrid(lat, lat)
    x = np.concatenate([x, lx.ravel()])
    y = np.concatenate([y, ly.ravel()])
    log_ratio = f.log_eval(x + y) - f.log_eval(x) - f.log_eval(y)
    i = int(np.argmax(log_ratio))
    with np.errstate(over="ignore"):  # an infinite ratio is a valid counterexample
        worst = float(np.exp(log_ratio[i]))
    return SubmultiplicativeReport(worst <= 1 + rtol, worst, (float(x[i]), float(y[i])), len(x))


def fitted_moderate_constant(psi, f, samples: int, span, seed: int) -> float:
    """Largest psi(x+y) / (f(x) psi(y)) over the sampled pairs."""
    x, y = _pairs(samples, span, seed)
    with np.errstate(over="ignore"):
        return float(np.exp(np.max(psi.log_eval(x + y) - f.log_eval(x) - psi.log_eval(y))))


@dataclass(frozen=True)
class ModerateReport:
    passed: bool
    c0: float
    c0_doubled_samples: float
    c0_doubled_range: float
    rel_change_samples: float
    rel_change_range: float


def check_moderate(
    psi, f, samples: int = 100_000, span=(-50.0, 50.0), seed: int = 0, tol: float = 0.1
) -> ModerateReport:
    """Fit C0 in psi(x+y) <= C0 f(x) psi(y) and test its stability.

    C0 is refitted with twice the samples on the same range, and with twice
    the samples on a doubled range. A genuine moderate pair gives a C0 that
    settles; a non-moderate one keeps growing with the range.
    """
    c0 = fitted_moderate_constant(psi, f, samples, span, seed)
    c0_s = fitted_moderate_constant(psi, f, 2 * samples, span, seed)
    wide = (2 * span[0], 2 * span[1])
    c0_r = fitted_moderate_constant(psi, f, 2 * samples, wide, seed)
    rs = abs(c0_s - c0) / c0
    rr = abs(c0_r - c0) / c0
    ok = bool(np.isfinite(c0_r) and rs <= tol and rr <= tol)
    return ModerateReport(ok, c0, c0_s, c0_r, rs, rr)


def min_theta(w, span=(-50.0, 50.0), step: float = 1e-3) -> float:
    """Smallest theta with |psi'| <= theta |psi| on a dense lattice.

    Uses the cell-averaged logarithmic derivative, which is exact for
    piecewise-smooth psi away from kinks and never straddles one by more
    than a cell.
    """
    xs = np.arange(span[0], span[1] + step / 2, step)
    lv = w.log_eval(xs)
    return float(np.max(np.abs(np.diff(lv)) / step))


def weighted_exp_integral(f, x_max: float = 1e4, tail_tol: float = 1e-15):
    """int_R f(x) exp(-|x|) dx for even f; returns (value, X) or (inf, X).

    The cutoff X doubles until f(X) exp(-X) (1 + X) < tail_tol.
    """
    X = 8.0
    while True:
        tail = np.exp(float(f.log_eval(X)) - X) * (1 + X)
        if tail < tail_tol:
            break
        X *= 2
        if X > x_max:
            return float("inf"), X
    val, _ = integrate.quad(lambda s: np.exp(float(f.log_eval(s)) - s), 0, X, limit=500)
    return 2 * val, X


@dataclass(frozen=True)
class AdmissibleReport:
    passed: bool
    theta_min: float
    theta_ok: bool
    f_submultiplicative: bool
    inf_f: float
    integral: float
    moderate_c0: float
    moderate_ok: bool
    notes: tuple = field(default_factory=tuple)


def check_admissible(w: WeightSpec, span=(-50.0, 50.0), samples: int = 20_000, seed: int = 0) -> AdmissibleReport:
    """Sampled admissibility check: derivative bound plus f-moderateness.

    f is taken as the untruncated member of the family with the same
    parameters, which is sub-multiplicative when a, d >= 0 and 0 <= c <= 1.
    For c > 1 the factor 1 + |x|^c is not (x = y = 1, c = 2 gives 5 > 4),
    and the sampled check reports the counterexample.
    """
    notes = []
    th = min_theta(w, span)
    theta_ok = w.theta is None or th <= w.theta * (1 + 1e-9)
    if w.theta is None:
        notes.append("no theta declared; reporting the minimal feasible value")
    f = w.untruncated()
    sub = check_submultiplicative(f, samples, span, seed)
    inf_f = float(np.exp(np.min(f.log_eval(np.linspace(span[0], span[1], 20001)))))
    integral, _ = weighted_exp_integral(f)
    mod = check_moderate(w, f, samples, span, seed)
    ok = bool(theta_ok and sub.passed and inf_f > 0 and np.isfinite(integral) and mod.passed)
    return AdmissibleReport(ok, th, theta_ok, sub.passed, inf_f, integral, mod.c0, mod.passed, tuple(notes))


@dataclass(frozen=True)
class TruncationReport:
    passed: bool
    c1: float
    worst_ratio: float


def check_truncation(psi: WeightSpec, f, level: float, c0: float, inf_f: float,
                     samples: int = 100_000, span=(-50.0, 50.0), seed: int = 0) -> TruncationReport:
    """psi_N(x+y) <= C1 f(x) psi_N(y) with C1 = max(C0, 1/inf f)."""
    psi_n = psi.truncated(level)
    c1 = max(c0, 1.0 / inf_f)
    x, y = _pairs(samples, span, seed)
    log_ratio = psi_n.log_eval(x + y) - f.log_eval(x) - psi_n.log_eval(y)
    with np.errstate(over="ignore"):
        worst = float(np.exp(np.max(log_ratio)))
    return TruncationReport(worst <= c1 * (1 + 1e-12), c1, worst)
