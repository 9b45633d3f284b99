"""Localized virial (Morawetz) machinery for radial solutions in the plane.

The weight is ``h(x) = phi(|x|) x/|x|`` with ``phi(r) = int_0^r chi_R(s)^2 ds``
and ``chi_R(r) = chi(r/R)`` a smooth step: 1 on ``[0, 1]``, 0 on ``[2, inf)``.
With ``q = div(h)/2 = (phi' + phi/r)/2`` the Morawetz quantities are

    NLS   M(t) =  1/2 Im int u phi d_r conj(u) dx
    NLKG  M(t) = -Re int u_t (phi d_r conj(u) + q conj(u)) dx

and both satisfy

    dM/dt = int phi' (|d_r u|^2 - G(u)) dx                    main term
          - 1/4 int (phi''' + 2 phi''/r) |u|^2 dx              Laplacian of div h
          + int (|grad u|^2 - |d_r u|^2)(phi/r)                radial-null term, = 0
          + int (phi/r - phi') (-|u|^2/(4 r^2) - G(u)/2) dx    exterior term

with ``i u_t = Laplacian(u) + f(u)`` and ``u_tt = Laplacian(u) - u + f(u)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DomainTooSmall, HypothesisViolation, InvalidArgument, Unsupported
from .functionals import EvolutionState, energy, mass, static_energy_J, virial_K
from .grid import RadialField, RadialGrid, grad_sq, radial_derivative
from .nonlinearity import Nonlinearity

DEFAULT_DELTA = 0.05
CUTOFF_PROFILE = "logistic-smooth-step"
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


# -- cutoff ------------------------------------------------------------------------------------


def _chi_parts(s):
    """``chi, chi', chi''`` of the smooth step in the scaled variable ``s = r/R``.

    On ``(1, 2)``: ``chi = 1/(1 + e^g)`` with ``g = 1/(1-s) + 1/(2-s)``, which
    runs from ``-inf`` to ``+inf`` and makes every derivative vanish at both ends.
    """
    s = np.asarray(s, dtype=float)
    chi = np.where(s <= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    mid = (s > 1.0) & (s < 2.0)
    if np.any(mid):
        x = s[mid]
        a, b = x - 1.0, 2.0 - x
        g = -1.0 / a + 1.0 / b
        g1 = 1.0 / a**2 + 1.0 / b**2
        g2 = -2.0 / a**3 + 2.0 / b**3
        c = expit(-g)
        one_minus = expit(g)
        c1 = -c * one_minus * g1
        c2 = -c1 * (1.0 - 2.0 * c) * g1 - c * one_minus * g2
        chi[mid], d1[mid], d2[mid] = c, c1, c2
    return chi, d1, d2


def chi(s):
    return _chi_parts(s)[0]


def _phi(r, R):
    """``phi(r) = int_0^r chi(s/R)^2 ds``, by Gauss-Legendre on the transition part."""
    r = np.asarray(r, dtype=float)
    top = np.clip(r, R, 2 * R)
    half = 0.5 * (top - R)
    s = R + half[..., None] * (_GL_X + 1.0)
    tail = half * np.sum(_GL_W * chi(s / R) ** 2, axis=-1)
    return np.minimum(r, R) + tail


@dataclass(frozen=True, eq=False)
class CutoffWeights:
    R: float
    profile: str
    grid: RadialGrid
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    d3phi: np.ndarray
    phi_over_r: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return 0.5 * (self.dphi + self.phi_over_r)

    def chi_R(self, r=None):
        r = self.grid.nodes if r is None else np.asarray(r, dtype=float)
        return chi(r / self.R)

    def phi_at(self, r):
        return _phi(r, self.R)


def build_cutoff(R: float, grid: RadialGrid) -> CutoffWeights:
    """Tabulate ``phi`` and its derivatives for cutoff radius ``R`` on ``grid``."""
    if not R > 0:
        raise InvalidArgument(f"R must be positive, got {R}")
    if not 2 * R < grid.r_max:
        raise DomainTooSmall(f"2R = {2 * R} must be below r_max = {grid.r_max}")
    r = grid.nodes
    c, c1, c2 = _chi_parts(r / R)
    c1, c2 = c1 / R, c2 / R**2
    phi = _phi(r, R)
    return CutoffWeights(
        R=float(R),
        profile=CUTOFF_PROFILE,
        grid=grid,
        phi=phi,
        dphi=c * c,
        d2phi=2 * c * c1,
        d3phi=2 * (c1 * c1 + c * c2),
        phi_over_r=np.where(r <= R, 1.0, phi / r),
    )


# -- Morawetz quantity and identity ---------------------------------------------------------------


def _check_grid(state: EvolutionState, cw: CutoffWeights):
    if state.grid is not cw.grid:
        raise InvalidArgument("state and cutoff weights live on different grids")


def morawetz_quantity(state: EvolutionState, cw: CutoffWeights) -> float:
    _check_grid(state, cw)
    u = state.u.values
    du = radial_derivative(state.u).values
    w = cw.grid.weights
    if state.equation == "NLS":
        return 0.5 * float(np.dot(w, np.imag(u * cw.phi * np.conj(du))))
    ut = state.u_t.values
    return -float(np.dot(w, np.real(ut * (cw.phi * np.conj(du) + cw.q * np.conj(u)))))


def identity_terms(state: EvolutionState, cw: CutoffWeights, nl: Nonlinearity | None) -> dict:
    """The four right-hand-side terms of the identity at one instant."""
    _check_grid(state, cw)
    grid = cw.grid
    w = grid.weights
    r = grid.nodes
    u = state.u.values
    du2 = np.abs(radial_derivative(state.u).values) ** 2
    u2 = np.abs(u) ** 2
    G = np.zeros_like(u2) if nl is None else nl.G(u)
    excess = cw.phi_over_r - cw.dphi
    return {
        "main": float(np.dot(w, cw.dphi * (du2 - G))),
        "div_h": float(-0.25 * np.dot(w, (cw.d3phi + 2 * cw.d2phi / r) * u2)),
        "radial_null": 0.0,  # |grad u| = |d_r u| for radial u
        "exterior": float(np.dot(w, excess * (-u2 / (4 * r * r) - 0.5 * G))),
    }


def identity_rhs(state: EvolutionState, cw: CutoffWeights, nl: Nonlinearity | None) -> float:
    return sum(identity_terms(state, cw, nl).values())


@dataclass
class MorawetzReport:
    R: float
    t: np.ndarray
    M: np.ndarray
    dMdt: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    terms: dict = field(default_factory=dict)
    window_G: float | None = None
    m_over_R_constant: float | None = None

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0

    @property
    def relative_residual(self) -> float:
        scale = float(np.max(np.abs(self.rhs))) if self.rhs.size else 0.0
        return self.max_residual / scale if scale > 0 else self.max_residual

    def summary(self) -> dict:
        return {
            "R": self.R,
            "max_residual": self.max_residual,
            "relative_residual": self.relative_residual,
            "max_abs_M": float(np.max(np.abs(self.M))) if self.M.size else 0.0,
            "window_G": self.window_G,
            "m_over_R_constant": self.m_over_R_constant,
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "M", "dMdt", "rhs", "residual"])
            for row in zip(self.t, self.M, self.dMdt, self.rhs, self.residual):
                w.writerow([repr(float(x)) for x in row])


def _window(traj, window):
    times = traj.times
    if window is None:
        return times[0], times[-1]
    t0, t1 = window
    if not (t0 < t1 and t0 >= times[0] - 1e-12 and t1 <= times[-1] + 1e-12):
        raise InvalidArgument(f"window {window} outside the trajectory span [{times[0]}, {times[-1]}]")
    return t0, t1


def identity_residual(traj, cw: CutoffWeights, window=None) -> MorawetzReport:
    """Compare a centered difference of ``M`` over the snapshots with the identity.

    Residuals are reported at each interior snapshot inside ``window``; the
    snapshot stride sets the differencing step.
    """
    t0, t1 = _window(traj, window)
    states = list(traj.states)
    t = np.array([s.t for s in states])
    M = np.array([morawetz_quantity(s, cw) for s in states])
    keep = [i for i in range(1, len(states) - 1) if t0 - 1e-12 <= t[i] <= t1 + 1e-12]
    if not keep:
        raise InvalidArgument("window holds no interior snapshot")
    dM = np.array([(M[i + 1] - M[i - 1]) / (t[i + 1] - t[i - 1]) for i in keep])
    terms = [identity_terms(states[i], cw, traj.nl) for i in keep]
    rhs = np.array([sum(tm.values()) for tm in terms])
    by_name = {k: np.array([tm[k] for tm in terms]) for k in terms[0]}
    h1 = np.array([mass(s.u) + grad_sq(s.u) for s in states])
    with np.errstate(divide="ignore", invalid="ignore"):
        c_fit = np.max(np.where(h1 > 0, np.abs(M) / (cw.R * h1), 0.0))
    return MorawetzReport(
        R=cw.R,
        t=t[keep],
        M=M[keep],
        dMdt=dM,
        rhs=rhs,
        residual=np.abs(dM - rhs),
        terms=by_name,
        window_G=spacetime_G(traj, t0, t1) if t1 > t0 else 0.0,
        m_over_R_constant=float(c_fit),
    )


# -- space-time integrals -----------------------------------------------------------------------


def _cumulative(t, y, x):
    """Integral from ``t[0]`` to ``x`` of the piecewise-linear interpolant of ``y``."""
    x = float(x)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))])
    i = int(np.searchsorted(t, x, side="right")) - 1
    i = min(max(i, 0), len(t) - 2)
    h = x - t[i]
    slope = (y[i + 1] - y[i]) / (t[i + 1] - t[i])
    return cum[i] + h * (y[i] + 0.5 * slope * h)


def _series_integral(traj, column, T1, T2, weight=None):
    t = traj.monitor.column("t")
    y = traj.monitor.column(column)
    if not (T1 < T2):
        raise InvalidArgument(f"need T1 < T2, got {T1}, {T2}")
    if T1 < t[0] - 1e-12 or T2 > t[-1] + 1e-12:
        raise InvalidArgument(f"window [{T1}, {T2}] outside monitored span [{t[0]}, {t[-1]}]")
    if len(t) < 2:
        raise InvalidArgument("monitor series too short")
    if weight is None:
        return _cumulative(t, y, T2) - _cumulative(t, y, T1)
    inside = (t > T1) & (t < T2)
    tt = np.concatenate([[T1], t[inside], [T2]])
    yy = np.interp(tt, t, y) * weight(tt)
    return float(np.sum(0.5 * np.diff(tt) * (yy[1:] + yy[:-1])))


def spacetime_G(traj, T1: float, T2: float) -> float:
    """``int_{T1}^{T2} int |G(u)| dx dt`` by the trapezoid rule on the monitor series."""
    return _series_integral(traj, "g_integral", T1, T2)


# -- exponents ---------------------------------------------------------------------------------


def gamma_exponent(nl: Nonlinearity) -> float:
    """Decay exponent of the ``R + dT R^-gamma`` bound: ``min(p/2, 2)`` or 2."""
    if nl.kind == "power":
        return min(nl.p / 2, 2.0)
    return 2.0


def alpha_exponent(nl: Nonlinearity, delta: float = DEFAULT_DELTA) -> float:
    """Time-weight exponent: ``max(2/(2+p), 1/3) + delta`` (power) or ``1/3 + delta``."""
    if nl.kind == "power":
        return max(2.0 / (2.0 + nl.p), 1.0 / 3.0) + delta
    return 1.0 / 3.0 + delta


def beta_exponent(delta: float = DEFAULT_DELTA) -> float:
    return 0.5 + delta


def window_width(T0: float, alpha: float) -> float:
    return T0 ** (1.0 - alpha) / (2.0 * alpha)


# -- audits ------------------------------------------------------------------------------------


def check_hypotheses(traj, nl: Nonlinearity, threshold: float | None) -> dict:
    """Defocusing, or focusing with ``J(u0) < m`` and ``K(u0) > 0``.

    ``J(u0)`` means ``E_S + M/2`` for NLS and ``E_K`` for NLKG.
    """
    s0 = traj.states[0]
    if not nl.focusing:
        return {"regime": "defocusing"}
    if threshold is None:
        raise HypothesisViolation("focusing trajectory: pass the threshold m to certify the hypotheses")
    if s0.equation == "NLS":
        j = static_energy_J(s0.u, nl)
    else:
        j = energy(s0, nl)
    k = virial_K(s0.u, nl)
    if not (j < threshold and k > 0):
        raise HypothesisViolation(f"initial data outside the hypotheses: J={j:.6g} (m={threshold:.6g}), K={k:.6g}")
    return {"regime": "focusing-below-threshold", "J": j, "K": k, "m": threshold}


@dataclass
class AuditRow:
    T1: float
    T2: float
    R: float
    G_integral: float
    bound_shape: float
    ratio: float


@dataclass
class AuditReport:
    gamma: float
    rows: list
    window_constants: list
    C_star: float
    passed: bool
    hypotheses: dict

    def summary(self) -> dict:
        return {
            "gamma": self.gamma,
            "C_star": self.C_star,
            "window_constants": self.window_constants,
            "passed": self.passed,
            "hypotheses": self.hypotheses,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def virial_morawetz_audit(traj, R_list, windows, nl: Nonlinearity, threshold: float | None = None,
                          stability: float = 2.0) -> AuditReport:
    """Fit ``int int |G| <= C (R + (T2 - T1) R^-gamma)`` over a grid of radii and windows.

    ``C_w`` is the smallest constant that works for window ``w`` over all radii,
    ``C*`` the largest ``C_w``.  The audit passes when translating the window
    never needs more than ``stability`` times the constant of the first window.
    """
    hyp = check_hypotheses(traj, nl, threshold)
    if not R_list or not windows:
        raise InvalidArgument("need at least one radius and one window")
    gamma = gamma_exponent(nl)
    rows, consts = [], []
    for T1, T2 in windows:
        S = spacetime_G(traj, T1, T2)
        best = 0.0
        for R in R_list:
            shape = R + (T2 - T1) * R ** (-gamma)
            ratio = S / shape
            best = max(best, ratio)
            rows.append(AuditRow(float(T1), float(T2), float(R), S, shape, ratio))
        consts.append(best)
    c_star = max(consts)
    passed = bool(np.isfinite(c_star) and c_star <= stability * consts[0])
    return AuditReport(gamma, rows, consts, c_star, passed, hyp)


@dataclass(frozen=True)
class DecayIntegral:
    value: float
    ratio: float  # value / T^-delta
    exponent: float
    T: float
    horizon: float  # integral truncated here


def weighted_decay_integral(traj, T: float, delta: float = DEFAULT_DELTA, nl: Nonlinearity | None = None) -> DecayIntegral:
    """``int_T^horizon t^-alpha int |G(u)| dx dt``, truncated at the end of the run."""
    nl = nl or traj.nl
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    if T < 1:
        raise InvalidArgument(f"T must be >= 1, got {T}")
    horizon = float(traj.monitor.column("t")[-1])
    if T >= horizon:
        raise InvalidArgument(f"T={T} is beyond the trajectory end {horizon}")
    a = alpha_exponent(nl, delta)
    val = _series_integral(traj, "g_integral", T, horizon, weight=lambda t: t ** (-a))
    return DecayIntegral(val, val / T ** (-delta), a, float(T), horizon)


def weighted_f_L1(traj, T: float, delta: float = DEFAULT_DELTA, nl: Nonlinearity | None = None) -> DecayIntegral:
    """``int_T^horizon t^-beta int |f(u)| dx dt`` with ``beta = 1/2 + delta`` (exponential only)."""
    nl = nl or traj.nl
    if nl.kind != "exponential":
        raise Unsupported("the weighted f-bound is only defined for the exponential nonlinearity")
    if T < 1:
        raise InvalidArgument(f"T must be >= 1, got {T}")
    horizon = float(traj.monitor.column("t")[-1])
    if T >= horizon:
        raise InvalidArgument(f"T={T} is beyond the trajectory end {horizon}")
    b = beta_exponent(delta)
    val = _series_integral(traj, "f_l1", T, horizon, weight=lambda t: t ** (-b))
    return DecayIntegral(val, val / T ** (-delta), b, float(T), horizon)


@dataclass(frozen=True)
class SmallnessResult:
    found: bool
    T0: float | None
    width: float | None
    value: float | None
    alpha: float
    horizon: float


def window_smallness_search(traj, eps: float, T: float, delta: float = DEFAULT_DELTA,
                            nl: Nonlinearity | None = None) -> SmallnessResult:
    """First monitored ``T0 > T`` with ``int over [T0 - width, T0] of int |G| < eps``.

    ``width = T0^(1-alpha) / (2 alpha)``.  Returns ``found=False`` when the run
    ends first; nothing is extrapolated.
    """
    nl = nl or traj.nl
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if T < 1:
        raise InvalidArgument(f"T must be >= 1, got {T}")
    a = alpha_exponent(nl, delta)
    t = traj.monitor.column("t")
    start, horizon = float(t[0]), float(t[-1])
    for T0 in t[t > T]:
        width = window_width(T0, a)
        if T0 - width < start:
            continue
        val = spacetime_G(traj, T0 - width, T0)
        if val < eps:
            return SmallnessResult(True, float(T0), width, val, a, horizon)
    return SmallnessResult(False, None, None, None, a, horizon)


def exterior_term(u: RadialField, R: float, nl: Nonlinearity) -> float:
    """``int (G(u) - G(chi_R u)) dx``: the part of the potential outside radius ``R``."""
    c = chi(u.grid.nodes / R)
    return u.grid.integrate(nl.G(u.values) - nl.G(c * u.values))


def geometric_mean_inequality(a, b) -> tuple[float, float]:
    """Both sides of ``sum a_k^((2k-1)/2k) b_k^(1/2k) <= sum (2k-1)/(2k) a_k + sum b_k/(2k)``, k = 1, 2, ..."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or np.any(a < 0) or np.any(b < 0):
        raise InvalidArgument("a and b must be non-negative sequences of equal length")
    k = np.arange(1, a.size + 1)
    lhs = float(np.sum(a ** ((2 * k - 1) / (2 * k)) * b ** (1 / (2 * k))))
    rhs = float(np.sum((2 * k - 1) / (2 * k) * a) + np.sum(b / (2 * k)))
    return lhs, rhs
