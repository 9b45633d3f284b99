"""Initial-data classification, a scattering observable and inequality audits."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import HypothesisViolation, InvalidArgument, MissingGroundState, UnsupportedGrid, ValidationFailure
from .evolve import linear_propagate
from .functionals import EvolutionState, energy, static_energy_J, virial_K
from .grid import RadialField, evaluate, h1_norms
from .ground_state import GroundState, gn_sharp_constant, threshold_from

REGIMES = (
    "defocusing-global",
    "focusing-below-threshold-K-positive",
    "focusing-below-threshold-K-negative",
    "above-threshold-unknown",
    "exponential-subcritical",
    "exponential-supercritical-unknown",
)


def _jsonable(obj):
    """Plain JSON types; non-finite floats become null to keep the output strict."""
    if hasattr(obj, "__dataclass_fields__"):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


@dataclass
class ClassificationVerdict:
    regime: str
    J: float | None = None
    m: float | None = None
    K: float | None = None
    energy_gap: float | None = None
    norm_product: dict | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        return to_json(self)


def norm_product_test(u: RadialField, Q: GroundState) -> dict:
    """``||u||^2 ||grad u||^(p-2)`` against the same product at the ground state."""
    p = Q.nl.p
    m, g = h1_norms(u)
    val = m * g ** ((p - 2) / 2)
    ref = Q.mass_sq * Q.grad_sq ** ((p - 2) / 2)
    return {"value": val, "ground_state_value": ref, "below": bool(val < ref)}


def classify_initial_data(state, nl, Q: GroundState | None = None) -> ClassificationVerdict:
    """Place initial data relative to the scattering thresholds.

    Focusing data compare ``J = E_S + c M/2`` (NLS) or ``E_K`` (NLKG) with ``m``
    and read the sign of the virial functional.  Defocusing exponential data
    compare the energy with ``2 pi / kappa0``.
    """
    if not isinstance(state, EvolutionState):
        state = EvolutionState.nls(state)
    u = state.u
    if not nl.focusing:
        if nl.kind == "power":
            return ClassificationVerdict("defocusing-global", notes=["defocusing power: global for all H1 data"])
        e = energy(state, nl)
        cap = 2 * math.pi / nl.kappa0
        regime = "exponential-subcritical" if e < cap else "exponential-supercritical-unknown"
        return ClassificationVerdict(regime, J=e, m=cap, energy_gap=cap - e, notes=["compares energy with 2 pi / kappa0"])
    if Q is None:
        raise MissingGroundState("focusing classification needs the ground state")
    if Q.nl != nl:
        raise InvalidArgument(f"ground state solved for {Q.nl.describe()}, data use {nl.describe()}")
    m = threshold_from(Q)
    if state.equation == "NLS":
        j = static_energy_J(u, nl, Q.c)
    else:
        j = energy(state, nl)
    k = virial_K(u, nl)
    notes = []
    if nl.kind == "exponential":
        notes.append("m = min(J^(c)(Q), 2 pi / kappa0); both candidates are reported with the ground state")
    if j < m:
        regime = "focusing-below-threshold-K-positive" if k > 0 else "focusing-below-threshold-K-negative"
    else:
        regime = "above-threshold-unknown"
    verdict = ClassificationVerdict(regime, J=j, m=m, K=k, energy_gap=m - j, notes=notes)
    if nl.kind == "power" and state.equation == "NLS" and math.isclose(Q.c, 1.0):
        npt = norm_product_test(u, Q)
        if j < m:
            npt["agrees"] = bool(npt["below"] == (k > 0))
            if not npt["agrees"]:
                raise ValidationFailure(
                    f"K-sign and norm-product tests disagree below threshold (K={k:.6g}, "
                    f"product={npt['value']:.6g} vs {npt['ground_state_value']:.6g})"
                )
        verdict.norm_product = npt
    return verdict


# -- scattering observable ----------------------------------------------------------------------


@dataclass
class CauchyReport:
    T: list
    delta: list
    pairs: list
    scattering_consistent: bool
    horizon: float
    note: str = "scattering-consistent at the horizon is a finite-time observation, not a proof"

    def to_json(self) -> str:
        return to_json(self)


def _pulled_back_modes(state: EvolutionState):
    grid = state.grid
    back = linear_propagate(state, -state.t)
    a = grid.to_modes(back.u.values)
    if state.equation == "NLS":
        return a, None
    return a, grid.to_modes(back.u_t.values)


def scattering_profile_cauchy(traj, T_list) -> CauchyReport:
    """``delta(T) = max ||w(t) - w(t')||`` over snapshots in ``[T, 2T]``, ``w(t) = S(-t) u(t)``.

    The norm is H1 for NLS and the energy norm ``H1 x L2`` for NLKG, both read
    off the Hankel coefficients.
    """
    grid = traj.states[0].grid
    if grid.kind != "gauss-bessel":
        raise UnsupportedGrid("the scattering observable needs a gauss-bessel grid")
    T_list = [float(T) for T in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise InvalidArgument("T-list must be increasing")
    weight = 1.0 + grid.mode_ksq
    cache = {}
    deltas, counts = [], []
    for T in T_list:
        snaps = traj.snapshots_between(T, 2 * T)
        if len(snaps) < 2:
            raise InvalidArgument(f"fewer than two snapshots in [{T}, {2 * T}]")
        coeffs = []
        for s in snaps:
            key = round(s.t, 12)
            if key not in cache:
                cache[key] = _pulled_back_modes(s)
            coeffs.append(cache[key])
        best = 0.0
        for i in range(len(coeffs)):
            for j in range(i + 1, len(coeffs)):
                a1, b1 = coeffs[i]
                a2, b2 = coeffs[j]
                d = float(np.dot(weight, np.abs(a1 - a2) ** 2))
                if b1 is not None:
                    d += float(np.sum(np.abs(b1 - b2) ** 2))
                best = max(best, math.sqrt(d))
        deltas.append(best)
        counts.append(len(snaps))
    consistent = all(b < a for a, b in zip(deltas, deltas[1:]))
    return CauchyReport(T_list, deltas, counts, bool(consistent), float(traj.times[-1]))


# -- inequality audits --------------------------------------------------------------------------


@dataclass
class GNAudit:
    ratios: list
    ground_state_ratio: float
    max_ratio: float
    max_normalized: float
    constant: float
    skipped: list

    def to_json(self) -> str:
        return to_json(self)


def gn_quotient(u: RadialField, p: float) -> float:
    """``||u||_{p+2}^{p+2} / (||u||^2 ||grad u||^p)``; scale invariant."""
    m, g = h1_norms(u)
    return u.grid.integrate(np.abs(u.values) ** (p + 2)) / (m * g ** (p / 2))


def gn_audit(fields, p: float, Q: GroundState) -> GNAudit:
    """Sharp planar Gagliardo-Nirenberg ratio for each field (1 at the optimizer)."""
    C = gn_sharp_constant(p, Q)
    q_ratio = gn_quotient(Q.profile, p) / C
    ratios, skipped = [], []
    for i, u in enumerate(fields):
        if not np.any(u.values):
            skipped.append({"index": i, "note": "zero field"})
            ratios.append(None)
            continue
        ratios.append(gn_quotient(u, p) / C)
    vals = [r for r in ratios if r is not None]
    top = max(vals) if vals else 0.0
    return GNAudit(ratios, q_ratio, top, top / q_ratio, C, skipped)


@dataclass
class TMAudit:
    a: float
    kappa0: float
    lhs: list
    rhs: list
    ratios: list
    constant: float
    refined_constant: float | None
    passed: bool
    rejected: list
    skipped: list

    def to_json(self) -> str:
        return to_json(self)


def tm_sides(u: RadialField, a: float, kappa0: float = 1.0) -> tuple[float, float]:
    """``int (e^{k0|u|^2} - 1)^a dx`` and ``k0 ||u||^2 / (4 pi / a - k0 ||grad u||^2)``.

    Raises HypothesisViolation unless ``k0 ||grad u||^2 < 4 pi / a``.
    """
    if a < 1:
        raise InvalidArgument(f"a must be >= 1, got {a}")
    m, g = h1_norms(u)
    room = 4 * math.pi / a - kappa0 * g
    if not room > 0:
        raise HypothesisViolation(f"kappa0 ||grad u||^2 = {kappa0 * g:.6g} is not below 4 pi / a = {4 * math.pi / a:.6g}")
    x = kappa0 * u.abs2()
    if np.any(x > 700):
        raise HypothesisViolation("exponential argument beyond double range")
    lhs = u.grid.integrate(np.expm1(x) ** a)
    return lhs, kappa0 * m / room


def tm_audit(fields, a: float, kappa0: float = 1.0, stability: float = 2.0) -> TMAudit:
    """LHS/RHS of the Trudinger-Moser bound over a family.

    Fields breaking the gradient constraint are rejected without evaluation.
    The fitted constant is the largest ratio; it must be finite and at most
    ``stability`` times the constant of the every-other-member subfamily.
    """
    lhs, rhs, ratios, rejected, skipped = [], [], [], [], []
    for i, u in enumerate(fields):
        if not np.any(u.values):
            skipped.append({"index": i, "note": "zero field: both sides vanish"})
            lhs.append(0.0)
            rhs.append(0.0)
            ratios.append(None)
            continue
        try:
            l, r = tm_sides(u, a, kappa0)
        except HypothesisViolation as exc:
            rejected.append({"index": i, "reason": str(exc)})
            lhs.append(None)
            rhs.append(None)
            ratios.append(None)
            continue
        lhs.append(l)
        rhs.append(r)
        ratios.append(l / r)
    idx = [i for i, r in enumerate(ratios) if r is not None]
    if not idx:
        return TMAudit(a, kappa0, lhs, rhs, ratios, float("nan"), None, False, rejected, skipped)
    const = max(ratios[i] for i in idx)
    sub = [ratios[i] for i in idx[::2]]
    refined = max(sub) if len(idx) > 1 else None
    ok = bool(np.isfinite(const) and all(np.isfinite(l) for l in lhs if l is not None))
    if refined is not None:
        ok = ok and const <= stability * refined
    return TMAudit(a, kappa0, lhs, rhs, ratios, const, refined, ok, rejected, skipped)


@dataclass
class SobolevAudit:
    quotients: list
    constant: float
    r0: float
    skipped: list

    def to_json(self) -> str:
        return to_json(self)


def radial_sobolev_audit(fields, r0: float = 0.0, samples: int = 2000) -> SobolevAudit:
    """``max_{r >= r0} |u(r)| r^(1/2) / (||u||^(1/2) ||grad u||^(1/2))`` per field."""
    quotients, skipped = [], []
    for i, u in enumerate(fields):
        if not np.any(u.values):
            skipped.append({"index": i, "note": "zero field"})
            quotients.append(None)
            continue
        m, g = h1_norms(u)
        r = np.linspace(max(r0, 0.0), u.grid.r_max, samples)
        r = np.unique(np.concatenate([r, u.grid.nodes[u.grid.nodes >= r0]]))
        vals = np.abs(evaluate(u, r)) * np.sqrt(r)
        i = int(np.argmax(vals))
        best = float(vals[i])
        lo, hi = r[max(i - 1, 0)], r[min(i + 1, r.size - 1)]
        if hi > lo:
            # polish the sampled maximum between its neighbours
            res = minimize_scalar(lambda x: -abs(evaluate(u, np.array([x]))[0]) * math.sqrt(x),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(hi, 1.0)})
            best = max(best, -float(res.fun))
        quotients.append(best / (m * g) ** 0.25)
    vals = [q for q in quotients if q is not None]
    return SobolevAudit(quotients, max(vals) if vals else 0.0, r0, skipped)
