"""Pointwise nonlinearities ``f``, their potentials ``F`` and ``G = Re(conj(u) f - F)``.

Two families are supported::

    power        f = lam |u|^p u                       F = 2 lam/(p+2) |u|^(p+2)
    exponential  f = lam (e^x - 1 - x) u,  x = k0|u|^2  F = lam/k0 (e^x - 1 - x - x^2/2)

with ``F(0) = 0`` and ``dF/d(conj u) = f``.  For the exponential family

    G = lam/k0 (e^x (x - 1) + 1 - x^2/2) = lam/k0 sum_{n>=3} (n-1) x^n / n!

All three exponential expressions lose digits to cancellation for small ``x``;
below ``SERIES_SWITCH`` they are summed as Taylor series, above it they are
evaluated in extended precision so the two branches agree to ~1e-14.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NonlinearityOverflow

SERIES_SWITCH = 1e-2
EXP_ARG_LIMIT = 700.0
_SERIES_RTOL = 1e-16


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    lam: int
    p: float | None = None
    kappa0: float | None = None

    def __post_init__(self):
        if self.lam not in (1, -1):
            raise InvalidArgument(f"lam must be +1 or -1, got {self.lam}")
        if self.kind == "power":
            if self.p is None or not self.p > 2:
                raise InvalidArgument(f"power nonlinearity needs p > 2, got p={self.p}")
        elif self.kind == "exponential":
            if self.kappa0 is None or not self.kappa0 > 0:
                raise InvalidArgument(f"exponential nonlinearity needs kappa0 > 0, got {self.kappa0}")
        else:
            raise InvalidArgument(f"unknown nonlinearity kind {self.kind!r}")

    @classmethod
    def power(cls, p: float, lam: int = 1) -> "Nonlinearity":
        return cls("power", int(lam), p=float(p))

    @classmethod
    def exponential(cls, kappa0: float, lam: int = 1) -> "Nonlinearity":
        return cls("exponential", int(lam), kappa0=float(kappa0))

    @property
    def focusing(self) -> bool:
        return self.lam == 1

    def describe(self) -> dict:
        out = {"kind": self.kind, "lam": self.lam}
        if self.kind == "power":
            out["p"] = self.p
        else:
            out["kappa0"] = self.kappa0
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        if d["kind"] == "power":
            return cls.power(d["p"], d.get("lam", 1))
        return cls.exponential(d["kappa0"], d.get("lam", 1))

    # ``rate(s)``: the real factor g with f(u) = lam * g(|u|^2) * u
    def rate(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return s ** (self.p / 2)
        return _exp_tail(self.kappa0 * s, order=2)

    def f(self, z):
        z = np.asarray(z)
        return self.lam * self.rate(np.abs(z) ** 2) * z

    def F(self, z):
        s = np.abs(np.asarray(z)) ** 2
        if self.kind == "power":
            return 2.0 * self.lam / (self.p + 2) * s ** (self.p / 2 + 1)
        return self.lam / self.kappa0 * _exp_tail(self.kappa0 * s, order=3)

    def G(self, z):
        s = np.abs(np.asarray(z)) ** 2
        if self.kind == "power":
            return self.lam * self.p / (self.p + 2) * s ** (self.p / 2 + 1)
        return self.lam / self.kappa0 * _exp_g(self.kappa0 * s)

    def density(self, z):
        """``Re(conj(z) f(z)) = lam g(|z|^2) |z|^2``."""
        s = np.abs(np.asarray(z)) ** 2
        return self.lam * self.rate(s) * s


def _check_overflow(x):
    if np.any(x > EXP_ARG_LIMIT):
        raise NonlinearityOverflow(
            f"exponential argument kappa0*|u|^2 = {float(np.max(x)):.6g} exceeds {EXP_ARG_LIMIT}"
        )


def _series(x, first_power, coeff):
    """sum_{n >= first_power} coeff(n) x^n, stopped once terms drop below 1e-16 of the sum."""
    n = first_power
    term_pow = x**n
    total = coeff(n) * term_pow
    while True:
        n += 1
        term_pow = term_pow * x
        term = coeff(n) * term_pow
        total = total + term
        if np.all(np.abs(term) <= _SERIES_RTOL * np.abs(total)) or n > 60:
            return total


def _factorial(n):
    return float(np.prod(np.arange(1, n + 1, dtype=float)))


def _exp_tail(x, order):
    """e^x - sum_{n < order} x^n/n!  (order 2: e^x-1-x, order 3: also minus x^2/2)."""
    x = np.asarray(x, dtype=float)
    _check_overflow(x)
    out = np.empty_like(x)
    small = x < SERIES_SWITCH
    if np.any(small):
        out[small] = _series(x[small], order, lambda n: 1.0 / _factorial(n))
    if np.any(~small):
        xl = x[~small].astype(np.longdouble)
        val = np.expm1(xl) - xl
        if order == 3:
            val = val - xl * xl / 2
        out[~small] = val.astype(float)
    return out


def _exp_g(x):
    """e^x (x - 1) + 1 - x^2/2."""
    x = np.asarray(x, dtype=float)
    _check_overflow(x)
    out = np.empty_like(x)
    small = x < SERIES_SWITCH
    if np.any(small):
        out[small] = _series(x[small], 3, lambda n: (n - 1) / _factorial(n))
    if np.any(~small):
        xl = x[~small].astype(np.longdouble)
        e2 = np.expm1(xl) - xl
        e3 = e2 - xl * xl / 2
        out[~small] = (xl * e2 - e3).astype(float)
    return out


def eval_f(z, nl: Nonlinearity):
    return nl.f(z)


def eval_F(z, nl: Nonlinearity):
    return nl.F(z)


def eval_G(z, nl: Nonlinearity):
    return nl.G(z)


def nonlinear_phase_step(u, dt: float, nl: Nonlinearity):
    """Exact flow of ``i u_t = f(u)`` over ``dt``: ``u -> exp(-i lam g(|u|^2) dt) u``.

    The modulus is untouched node by node.  Accepts a :class:`RadialField`
    or a bare array.
    """
    values = getattr(u, "values", u)
    phase = np.exp(-1j * nl.lam * nl.rate(np.abs(values) ** 2) * dt)
    out = phase * values
    if hasattr(u, "with_values"):
        return u.with_values(out)
    return out
