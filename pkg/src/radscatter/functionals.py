"""Conserved quantities and variational functionals (planar, radial).

With ``c >= 0`` the static energy is

    J^(c)(u) = 1/2 ||grad u||^2 + c/2 ||u||^2 - 1/2 int F(u)

and for a scaling pair ``(a, b)`` its derivative along
``s -> e^{a s} u(e^{-b s} x)`` at ``s = 0`` is

    K^(c)_{a,b}(u) = a ||grad u||^2 + (a + b) c ||u||^2 - int (a Re(conj(u) f) + b F).

``virial_K`` is the pair ``(1, -1)``: ``||grad u||^2 - int G(u)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgument
from .grid import RadialField, grad_sq, h1_norms
from .nonlinearity import Nonlinearity

EQUATIONS = ("NLS", "NLKG")


@dataclass(frozen=True)
class ScalingPair:
    alpha: float
    beta: float

    @property
    def admissible(self) -> bool:
        a, b = self.alpha, self.beta
        return a >= 0 and 2 * a + 2 * b >= 0 and 2 * a >= 0 and (a, b) != (0, 0)

    def require_admissible(self):
        if not self.admissible:
            raise InvalidArgument(
                f"scaling pair ({self.alpha}, {self.beta}) is not admissible: need alpha >= 0, "
                "alpha + beta >= 0 and (alpha, beta) != (0, 0)"
            )


VIRIAL_PAIR = ScalingPair(1.0, -1.0)


@dataclass(frozen=True)
class EvolutionState:
    equation: str
    u: RadialField
    u_t: RadialField | None = None
    t: float = 0.0

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise InvalidArgument(f"equation must be one of {EQUATIONS}, got {self.equation!r}")
        if self.equation == "NLKG":
            if self.u_t is None:
                raise InvalidArgument("NLKG states need u_t")
            if self.u_t.grid is not self.u.grid:
                raise InvalidArgument("u and u_t must live on the same grid")
        elif self.u_t is not None:
            raise InvalidArgument("NLS states carry no u_t")

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def nls(cls, u: RadialField, t: float = 0.0) -> "EvolutionState":
        return cls("NLS", u, None, t)

    @classmethod
    def nlkg(cls, u: RadialField, u_t: RadialField | None = None, t: float = 0.0) -> "EvolutionState":
        if u_t is None:
            u_t = u.with_values(np.zeros_like(u.values))
        return cls("NLKG", u, u_t, t)


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    energy: float
    j: float
    k_virial: float
    grad_sq: float
    g_integral: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _quad(u: RadialField, density) -> float:
    return u.grid.integrate(np.real(density))


def _check_c(c):
    if c < 0:
        raise InvalidArgument(f"mass coefficient c must be >= 0, got {c}")


def mass(state) -> float:
    """``int |u|^2 dx`` for a state or a bare field."""
    u = getattr(state, "u", state)
    return _quad(u, u.abs2())


def energy(state: EvolutionState, nl: Nonlinearity) -> float:
    """E_S for NLS states, E_K (adds ``|u|^2/2`` and ``|u_t|^2/2``) for NLKG states."""
    u = state.u
    m, g = h1_norms(u)
    e = 0.5 * g - 0.5 * _quad(u, nl.F(u.values))
    if state.equation == "NLKG":
        e += 0.5 * m + 0.5 * mass(state.u_t)
    return e


def static_energy_J(u: RadialField, nl: Nonlinearity, c: float = 1.0) -> float:
    _check_c(c)
    m, g = h1_norms(u)
    return 0.5 * g + 0.5 * c * m - 0.5 * _quad(u, nl.F(u.values))


def functional_K(
    u: RadialField,
    pair: ScalingPair,
    nl: Nonlinearity,
    c: float = 1.0,
    quadratic_only: bool = False,
) -> float:
    """``K^(c)_{a,b}(u)``; with ``quadratic_only`` the quadratic part ``K^Q``."""
    pair.require_admissible()
    _check_c(c)
    a, b = pair.alpha, pair.beta
    m, g = h1_norms(u)
    quad = a * g + (a + b) * c * m
    if quadratic_only:
        return quad
    dens = a * nl.density(u.values) + b * nl.F(u.values)
    return quad - _quad(u, dens)


def virial_K(u: RadialField, nl: Nonlinearity) -> float:
    return grad_sq(u) - _quad(u, nl.G(u.values))


@dataclass(frozen=True)
class Sandwich:
    J: float
    half_h1: float
    upper: float
    holds: bool


def free_energy_sandwich(u: RadialField, nl: Nonlinearity) -> Sandwich:
    """Check ``J <= ||u||_{H1}^2 / 2 <= 2 J``.

    A necessary condition for membership of the region below the threshold
    with ``K >= 0``; on its own it does not certify membership.
    """
    m, g = h1_norms(u)
    j = static_energy_J(u, nl)
    half = 0.5 * (m + g)
    upper = 2.0 * j
    tol = 1e-12 * max(1.0, abs(half))
    return Sandwich(j, half, upper, bool(j <= half + tol and half <= upper + tol))


def g_integral(u: RadialField, nl: Nonlinearity) -> float:
    """``int |G(u)| dx``."""
    return _quad(u, np.abs(nl.G(u.values)))


def f_l1(u: RadialField, nl: Nonlinearity) -> float:
    """``int |f(u)| dx``."""
    return _quad(u, np.abs(nl.f(u.values)))


def functional_report(state, nl: Nonlinearity) -> FunctionalReport:
    if not isinstance(state, EvolutionState):
        state = EvolutionState.nls(state)
    u = state.u
    return FunctionalReport(
        mass=mass(u),
        energy=energy(state, nl),
        j=static_energy_J(u, nl),
        k_virial=virial_K(u, nl),
        grad_sq=grad_sq(u),
        g_integral=_quad(u, nl.G(u.values)),
    )
