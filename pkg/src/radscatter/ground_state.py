"""Positive radial ground states of ``-Q'' - Q'/r + c Q = f(Q)`` by shooting.

The central value ``b = Q(0)`` is bisected.  A trial profile *overshoots* when
it reaches zero with ``Q' < 0`` and *undershoots* when ``Q'`` turns positive
while ``Q > 0``; the ground state sits on the boundary between the two.  Once
the bracket is as tight as floating point allows, the two bracketing profiles
agree up to a separation radius, beyond which the profile is continued by the
decaying solution ``A K0(sqrt(c) r)`` of the linearised equation.

Norms are integrated together with the profile (extra ODE components) plus the
tail integrals, so they do not depend on any grid.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.special as sp
from scipy.integrate import quad, solve_ivp

from .errors import InvalidArgument, NoGroundState, NonlinearityOverflow, ValidationFailure
from .functionals import ScalingPair, functional_K
from .grid import RadialField, RadialGrid, h1_norms, laplacian, make_grid, sample
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

RESIDUAL_LIMIT = 1e-4


@dataclass(frozen=True)
class ShootingConfig:
    b_cap: float = 2.0**16
    r_end: float = 80.0  # in units of 1/sqrt(c)
    rtol: float = 1e-12
    atol: float = 1e-15
    r_start: float = 1e-5
    separation_tol: float = 1e-8
    grid_kind: str = "gauss-bessel"
    grid_r_max: float = 26.0  # in units of 1/sqrt(c); Q(26)/Q(0) ~ 1e-12
    grid_n: int = 256
    grid_n_max: int = 2048
    grid_rtol: float = 1e-8  # grid norms vs. ODE norms before n stops doubling
    pde_rtol: float = 1e-7  # sup of the sampled PDE residual relative to Q(0)


@dataclass(frozen=True, eq=False)
class GroundState:
    profile: RadialField
    c: float
    nl: Nonlinearity
    q0: float
    mass_sq: float
    grad_sq: float
    density_integral: float  # int Q f(Q) dx
    F_integral: float
    G_integral: float
    J_value: float
    pohozaev_residuals: tuple[float, float]
    residual_kind: str
    r_match: float
    tail_amplitude: float
    bracket: tuple[float, float]
    _function: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    @property
    def lp_norm(self) -> float | None:
        """``||Q||_{p+2}^{p+2}`` (power nonlinearity only)."""
        if self.nl.kind != "power":
            return None
        return self.density_integral

    def __call__(self, r) -> np.ndarray:
        return self._function(np.asarray(r, dtype=float))

    def sample(self, grid: RadialGrid) -> RadialField:
        return sample(grid, self._function)

    @property
    def threshold(self) -> float:
        return threshold_from(self)

    def summary(self) -> dict:
        out = {
            "nonlinearity": self.nl.describe(),
            "c": self.c,
            "q0": self.q0,
            "mass_sq": self.mass_sq,
            "grad_sq": self.grad_sq,
            "lp_norm": self.lp_norm,
            "density_integral": self.density_integral,
            "F_integral": self.F_integral,
            "G_integral": self.G_integral,
            "J_value": self.J_value,
            "m": self.threshold,
            "residual_kind": self.residual_kind,
            "energy_identity_residual": self.pohozaev_residuals[0],
            "pohozaev_residual": self.pohozaev_residuals[1],
            "grad_mass_ratio": self.grad_sq / self.mass_sq,
            "r_match": self.r_match,
            "tail_amplitude": self.tail_amplitude,
            "bracket": list(self.bracket),
            "grid": self.profile.grid.describe(),
        }
        if self.nl.kind == "exponential":
            out["threshold_candidates"] = threshold_candidates(self)
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def _residuals(nl: Nonlinearity, c, mass_sq, grad_sq, dens, Fint, Gint) -> tuple[tuple[float, float], str]:
    if nl.kind == "power":
        p = nl.p
        energy_id = abs(grad_sq + c * mass_sq - dens) / abs(dens)
        target = 2.0 * dens / (p + 2)
        pohozaev = abs(c * mass_sq - target) / abs(target)
        return (energy_id, pohozaev), "power-identities"
    # K_{1,-1}(Q) = 0 and K^(c)_{0,1}(Q) = 0 stand in for the power-law identities
    virial = abs(grad_sq - Gint) / abs(grad_sq)
    scaling = abs(c * mass_sq - Fint) / abs(c * mass_sq)
    return (virial, scaling), "k-functional-zeros"


def identity_residuals(u: RadialField, nl: Nonlinearity, c: float = 1.0) -> dict:
    """Relative residuals of the ground-state identities for an arbitrary profile.

    Power: ``|grad|^2 + c|u|^2 = int |u|^(p+2)`` and ``c|u|^2 = 2/(p+2) int |u|^(p+2)``.
    Exponential: ``K_{1,-1}(u) = 0`` and ``K^(c)_{0,1}(u) = 0``.
    """
    m, g = h1_norms(u)
    grid = u.grid
    dens = grid.integrate(nl.density(u.values))
    Fint = grid.integrate(nl.F(u.values))
    Gint = grid.integrate(nl.G(u.values))
    (a, b), kind = _residuals(nl, c, m, g, dens, Fint, Gint)
    return {"energy_identity_residual": a, "pohozaev_residual": b, "kind": kind}


def _pde_residual(u: RadialField, nl: Nonlinearity, c: float) -> float:
    """``sup |Q'' + Q'/r - cQ + f(Q)|`` on the grid nodes."""
    return float(np.max(np.abs(laplacian(u).values - c * u.values + nl.f(u.values))))


def pohozaev_report(Q: GroundState) -> dict:
    a, b = Q.pohozaev_residuals
    return {"energy_identity_residual": a, "pohozaev_residual": b, "kind": Q.residual_kind}


class _Shooter:
    def __init__(self, nl: Nonlinearity, c: float, cfg: ShootingConfig):
        self.nl = nl
        self.c = c
        self.cfg = cfg
        self.r_end = cfg.r_end / math.sqrt(c)

    def force(self, q):
        return self.c * q - self.nl.lam * self._rate(q * q) * q

    def _rate(self, s):
        # scalar fast path of Nonlinearity.rate; the shooting loop calls this ~1e5 times
        nl = self.nl
        if nl.kind == "power":
            return s ** (nl.p / 2)
        x = nl.kappa0 * s
        if x < 1e-2:
            term, total, n = x * x / 2, 0.0, 2
            while abs(term) > 1e-17 * abs(total) or total == 0.0:
                total += term
                n += 1
                term *= x / n
                if term == 0.0:
                    break
            return total
        if x > 700:
            raise NonlinearityOverflow(f"exponential argument {x:.6g} exceeds 700")
        return math.expm1(x) - x

    def rhs(self, r, y):
        q, dq = y[0], y[1]
        return [dq, self.force(q) - dq / r]

    def rhs_aug(self, r, y):
        q, dq = y[0], y[1]
        nl = self.nl
        w = 2.0 * math.pi * r
        return [
            dq,
            self.force(q) - dq / r,
            w * q * q,
            w * dq * dq,
            w * float(nl.density(q)),
            w * float(nl.F(q)),
            w * float(nl.G(q)),
        ]

    def start(self, b):
        r0 = self.cfg.r_start / math.sqrt(self.c)
        s0 = self.force(b)
        return r0, s0, [b + s0 * r0 * r0 / 4, s0 * r0 / 2]

    def shoot(self, b, dense=False):
        """Return ('over'|'under', solution)."""
        r0, s0, y0 = self.start(b)
        if s0 >= 0:
            return "under", None

        def hits_zero(r, y):
            return y[0]

        hits_zero.terminal = True
        hits_zero.direction = -1

        def turns(r, y):
            return y[1]

        turns.terminal = True
        turns.direction = 1

        try:
            sol = solve_ivp(
                self.rhs,
                (r0, self.r_end),
                y0,
                method="DOP853",
                rtol=self.cfg.rtol,
                atol=self.cfg.atol,
                events=(hits_zero, turns),
                dense_output=dense,
            )
        except NonlinearityOverflow as exc:
            raise NoGroundState(f"overflow while shooting from Q(0)={b}: {exc}") from exc
        if sol.t_events[0].size:
            return "over", sol
        if sol.t_events[1].size:
            return "under", sol
        # ran out of domain while decaying: treat by the sign of the slope at the end
        return ("under" if sol.y[1, -1] >= 0 or sol.y[0, -1] > 0 else "over"), sol


def solve_ground_state(nl: Nonlinearity, c: float = 1.0, cfg: ShootingConfig | None = None) -> GroundState:
    """Shoot for the positive radial ground state and validate it.

    Raises
    ------
    NoGroundState
        defocusing nonlinearity, or no overshooting central value up to ``cfg.b_cap``.
    ValidationFailure
        an identity residual exceeds ``1e-4``.
    """
    cfg = cfg or ShootingConfig()
    if not c > 0:
        raise InvalidArgument(f"c must be positive, got {c}")
    if not nl.focusing:
        raise NoGroundState("defocusing nonlinearity: no positive decaying solution exists")
    sh = _Shooter(nl, c, cfg)

    lo = math.sqrt(c)
    for _ in range(60):
        if sh.shoot(lo)[0] == "under":
            break
        lo *= 0.5
    else:
        raise NoGroundState("could not find an undershooting central value")
    hi = 2.0 * lo
    while sh.shoot(hi)[0] != "over":
        lo = hi
        hi *= 2.0
        if hi > cfg.b_cap:
            raise NoGroundState(f"no overshoot for Q(0) up to {cfg.b_cap}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sh.shoot(mid)[0] == "over":
            hi = mid
        else:
            lo = mid

    _, sol_lo = sh.shoot(lo, dense=True)
    _, sol_hi = sh.shoot(hi, dense=True)
    r0 = sol_lo.t[0]
    r_stop = min(sol_lo.t[-1], sol_hi.t[-1])
    rr = np.linspace(r0, r_stop, 20001)
    q_lo = sol_lo.sol(rr)[0]
    q_hi = sol_hi.sol(rr)[0]
    apart = np.abs(q_lo - q_hi) > cfg.separation_tol * 0.5 * np.abs(q_lo + q_hi)
    idx = int(np.argmax(apart)) if apart.any() else rr.size - 1
    # back off to where the bracketing profiles still agree to a few more digits
    r_match = rr[max(1, int(0.9 * idx))]
    b = 0.5 * (lo + hi)

    r_start, _, y0 = sh.start(b)
    aug = solve_ivp(
        sh.rhs_aug,
        (r_start, r_match),
        y0 + [0.0] * 5,
        method="DOP853",
        rtol=cfg.rtol,
        atol=cfg.atol,
        dense_output=True,
    )
    q_m = aug.y[0, -1]
    if not q_m > 0:
        raise NoGroundState("shooting did not produce a positive profile")
    a = math.sqrt(c)
    amp = q_m / (sp.k0e(a * r_match) * math.exp(-a * r_match))

    def tail(r):
        return amp * sp.k0e(a * r) * np.exp(-a * r)

    def tail_int(fn):
        return quad(lambda r: 2 * math.pi * r * fn(r), r_match, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]

    mass_sq = aug.y[2, -1] + tail_int(lambda r: tail(r) ** 2)
    grad_sq = aug.y[3, -1] + tail_int(lambda r: (a * amp * sp.k1e(a * r) * math.exp(-a * r)) ** 2)
    dens = aug.y[4, -1] + tail_int(lambda r: float(nl.density(tail(r))))
    Fint = aug.y[5, -1] + tail_int(lambda r: float(nl.F(tail(r))))
    Gint = aug.y[6, -1] + tail_int(lambda r: float(nl.G(tail(r))))
    residuals, kind = _residuals(nl, c, mass_sq, grad_sq, dens, Fint, Gint)
    J_value = 0.5 * grad_sq + 0.5 * c * mass_sq - 0.5 * Fint

    s0 = sh.force(b)
    dense = aug.sol

    def profile(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        near = r < r_start
        mid = (r >= r_start) & (r <= r_match)
        far = r > r_match
        out[near] = b + s0 * r[near] ** 2 / 4
        if mid.any():
            out[mid] = dense(r[mid])[0]
        out[far] = tail(r[far])
        return out

    n = cfg.grid_n
    while True:
        grid = make_grid(cfg.grid_r_max / a, n, cfg.grid_kind)
        field_ = sample(grid, profile)
        gm, gg = h1_norms(field_)
        err = max(abs(gm - mass_sq) / mass_sq, abs(gg - grad_sq) / grad_sq)
        pde = _pde_residual(field_, nl, c) / b
        if (err < cfg.grid_rtol and pde < cfg.pde_rtol) or 2 * n > cfg.grid_n_max:
            break
        n *= 2
    gs = GroundState(
        profile=field_,
        c=float(c),
        nl=nl,
        q0=b,
        mass_sq=mass_sq,
        grad_sq=grad_sq,
        density_integral=dens,
        F_integral=Fint,
        G_integral=Gint,
        J_value=J_value,
        pohozaev_residuals=residuals,
        residual_kind=kind,
        r_match=float(r_match),
        tail_amplitude=float(amp),
        bracket=(lo, hi),
        _function=profile,
    )
    _validate(gs)
    log.debug("ground state %s c=%g: Q(0)=%.15g residuals=%s", nl.describe(), c, b, residuals)
    return gs


def _validate(gs: GroundState):
    worst = max(gs.pohozaev_residuals)
    if not worst < RESIDUAL_LIMIT:
        raise ValidationFailure(f"ground-state identity residual {worst:.3g} exceeds {RESIDUAL_LIMIT}")
    vals = gs.profile.values
    if np.any(vals <= 0):
        raise ValidationFailure("ground-state profile is not strictly positive on the grid")
    if np.any(np.diff(vals) >= 0):
        raise ValidationFailure("ground-state profile is not strictly decreasing on the grid")
    if gs(gs.profile.grid.r_max) > 1e-10 * gs.q0:
        raise ValidationFailure("ground-state profile has not decayed below 1e-10 at r_max")


def threshold_candidates(gs: GroundState) -> dict:
    out = {"J_c_of_Q": gs.J_value}
    if gs.nl.kind == "exponential":
        out["two_pi_over_kappa0"] = 2 * math.pi / gs.nl.kappa0
        out["m"] = min(gs.J_value, out["two_pi_over_kappa0"])
    else:
        out["m"] = gs.J_value
    return out


def threshold_from(gs: GroundState) -> float:
    return threshold_candidates(gs)["m"]


def threshold_m(nl: Nonlinearity, c: float = 1.0, cfg: ShootingConfig | None = None) -> float:
    """Scattering threshold: ``J(Q)`` (power) or ``min(J^(c)(Q), 2 pi / kappa0)`` (exponential)."""
    return threshold_from(solve_ground_state(nl, c, cfg))


def k_functional_zeros(gs: GroundState, pairs: Sequence[ScalingPair]) -> list[float]:
    """``K^(c)_{pair}(Q)`` on the stored profile, for each pair (all vanish at a ground state)."""
    return [functional_K(gs.profile, pair, gs.nl, gs.c) for pair in pairs]


def gn_sharp_constant(p: float, Q: GroundState) -> float:
    """Sharp planar Gagliardo-Nirenberg constant ``(p+2)/2 (p/2)^(-p/2) ||Q0||_2^(-p)``.

    With it, ``||g||_{p+2}^{p+2} <= C ||g||_2^2 ||grad g||_2^p`` for every ``g``,
    with equality at ``Q0``.
    """
    if Q.nl.kind != "power" or not math.isclose(Q.nl.p, p, rel_tol=0, abs_tol=1e-12):
        raise InvalidArgument(f"ground state was computed for {Q.nl.describe()}, not power p={p}")
    if not math.isclose(Q.c, 1.0):
        raise InvalidArgument("the sharp constant uses the c = 1 ground state")
    return (p + 2) / 2 * (p / 2) ** (-p / 2) * Q.mass_sq ** (-p / 2)


def gn_ratio(u: RadialField, p: float, constant: float) -> float:
    m, g = h1_norms(u)
    lhs = u.grid.integrate(np.abs(u.values) ** (p + 2))
    return lhs / (constant * m * g ** (p / 2))


# -- Trudinger-Moser constant: lower bounds by family search ------------------------------------


@dataclass(frozen=True)
class TMCandidate:
    family: str
    parameter: float
    level: float  # kappa0 ||grad phi||^2 / (4 pi)
    quotient: float


@dataclass(frozen=True)
class TMLowerBound:
    value: float
    best: TMCandidate
    candidates: tuple[TMCandidate, ...]


def _gaussian_quotient(kappa0, level, mu=1.0):
    # phi = A exp(-mu r^2), ||grad phi||^2 = pi A^2 regardless of mu
    amp2 = 4 * math.pi * level / (kappa0 * math.pi)
    F = Nonlinearity.exponential(kappa0, 1).F
    num = quad(lambda r: 2 * math.pi * r * float(F(math.sqrt(amp2) * math.exp(-mu * r * r))), 0, np.inf,
               epsabs=0, epsrel=1e-11, limit=200)[0]
    den = amp2 * math.pi / (2 * mu)
    return 2 * num / den


def _moser_quotient(kappa0, level, log_n):
    # Moser profile m_n with ||grad m_n||^2 = 1: sqrt(log n / 2pi) on r < 1/n,
    # log(1/r) / sqrt(2 pi log n) on 1/n < r < 1, zero outside
    scale2 = 4 * math.pi * level / kappa0
    F = Nonlinearity.exponential(kappa0, 1).F
    inner_val2 = scale2 * log_n / (2 * math.pi)
    r_in = math.exp(-log_n)
    num = float(F(math.sqrt(inner_val2))) * math.pi * r_in**2
    den = inner_val2 * math.pi * r_in**2

    def phi2(t):  # t = log(1/r)
        return scale2 * t * t / (2 * math.pi * log_n)

    # dx = 2 pi r dr = 2 pi e^{-2t} dt
    num += quad(lambda t: 2 * math.pi * math.exp(-2 * t) * float(F(math.sqrt(phi2(t)))), 0, log_n,
                epsabs=0, epsrel=1e-11, limit=200)[0]
    den += quad(lambda t: 2 * math.pi * math.exp(-2 * t) * phi2(t), 0, log_n, epsabs=0, epsrel=1e-11, limit=200)[0]
    return 2 * num / den


DEFAULT_TM_FAMILY = {
    "gaussian": {"levels": (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)},
    "moser": {"levels": (0.5, 0.9, 0.99), "log_n": (1.0, 2.0, 4.0, 8.0)},
}


def tm_constant_lower_bound(kappa0: float, family: dict | None = None) -> TMLowerBound:
    """Best value of ``2 int F(phi) / ||phi||^2`` over a parametric family.

    Every member satisfies ``kappa0 ||grad phi||^2 = 4 pi level`` with
    ``level < 1``, so the result is a lower bound on the supremum over the
    admissible set, nothing more.
    """
    if not kappa0 > 0:
        raise InvalidArgument(f"kappa0 must be positive, got {kappa0}")
    family = DEFAULT_TM_FAMILY if family is None else family
    cands = []
    for name, params in family.items():
        levels = params.get("levels", ())
        for level in levels:
            if not 0 < level < 1:
                raise InvalidArgument(f"family level must lie in (0, 1), got {level}")
        if name == "gaussian":
            for level in levels:
                cands.append(TMCandidate("gaussian", 1.0, level, _gaussian_quotient(kappa0, level)))
        elif name == "moser":
            for log_n in params.get("log_n", ()):
                for level in levels:
                    cands.append(TMCandidate("moser", float(log_n), level, _moser_quotient(kappa0, level, log_n)))
        else:
            raise InvalidArgument(f"unknown profile family {name!r}")
    if not cands:
        raise InvalidArgument("empty profile family")
    best = max(cands, key=lambda cnd: cnd.quotient)
    return TMLowerBound(best.quotient, best, tuple(cands))
