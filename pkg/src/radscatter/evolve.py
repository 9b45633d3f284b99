"""Time stepping for the radial NLS and NLKG, with conservation monitors.

Conventions (the equations exactly as integrated)::

    NLS    i u_t = Laplacian(u) + f(u)       linear symbol exp(+i k^2 t) on Hankel modes
    NLKG   u_tt = Laplacian(u) - u + f(u)    linear flow cos/sin(t <k>), <k> = sqrt(1 + k^2)

NLS uses Strang splitting (half nonlinear phase, exact linear flow, half
phase).  NLKG uses the impulse form of the trigonometric integrator: half
kick ``u_t += dt/2 f(u)``, exact linear Klein-Gordon flow, half kick.  Both are
symmetric, hence time reversible and second order.

Passing ``nl=None`` to the steppers switches the nonlinearity off.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import BlowupSuspected, BoundaryContamination, InvalidArgument, UnsupportedGrid
from .functionals import EvolutionState, energy, f_l1, g_integral, mass
from .grid import RadialGrid, boundary_mass_fraction, grad_sq, sup_norm
from .nonlinearity import Nonlinearity, nonlinear_phase_step

log = logging.getLogger(__name__)

NLS_CONVENTION = "i u_t = Laplacian(u) + f(u); free flow multiplies Hankel modes by exp(+i k^2 t)"
NLKG_CONVENTION = "u_tt = Laplacian(u) - u + f(u); free flow cos/sin(t sqrt(1 + k^2)) on modes"
MONITOR_COLUMNS = ("t", "mass", "energy", "grad_sq", "g_integral", "sup_norm", "f_l1")


def _kg_rotation(grid: RadialGrid, t: float):
    omega = np.sqrt(1.0 + grid.mode_ksq)
    return omega, np.cos(omega * t), np.sin(omega * t)


def _kg_flow(grid, u, ut, t):
    omega, c, s = _kg_rotation(grid, t)
    a = grid.to_modes(u)
    b = grid.to_modes(ut)
    a_new = c * a + (s / omega) * b
    b_new = -omega * s * a + c * b
    return grid.from_modes(a_new), grid.from_modes(b_new)


def linear_propagate(state: EvolutionState, t: float) -> EvolutionState:
    """Free evolution by time ``t`` (negative ``t`` runs backwards).

    Needs a gauss-bessel grid; the modes are then exact Hankel coefficients.
    """
    grid = state.grid
    if grid.kind != "gauss-bessel":
        raise UnsupportedGrid("linear_propagate needs a gauss-bessel grid")
    if state.equation == "NLS":
        modes = grid.to_modes(state.u.values) * np.exp(1j * grid.mode_ksq * t)
        return EvolutionState.nls(state.u.with_values(grid.from_modes(modes)), state.t + t)
    u, ut = _kg_flow(grid, state.u.values, state.u_t.values, t)
    return EvolutionState.nlkg(state.u.with_values(u), state.u_t.with_values(ut), state.t + t)


class _Stepper:
    """Precomputed propagators for one (grid, dt) pair."""

    def __init__(self, equation: str, grid: RadialGrid, dt: float, nl: Nonlinearity | None):
        self.equation = equation
        self.grid = grid
        self.dt = dt
        self.nl = nl
        if equation == "NLS":
            if grid.kind != "gauss-bessel":
                raise UnsupportedGrid("NLS stepping needs a gauss-bessel grid")
            self.phase = np.exp(1j * grid.mode_ksq * dt)
        else:
            self.omega, self.cos, self.sin = _kg_rotation(grid, dt)

    def __call__(self, u: np.ndarray, ut: np.ndarray | None):
        grid, dt, nl = self.grid, self.dt, self.nl
        if self.equation == "NLS":
            if nl is not None:
                u = nonlinear_phase_step(u, 0.5 * dt, nl)
            u = grid.from_modes(grid.to_modes(u) * self.phase)
            if nl is not None:
                u = nonlinear_phase_step(u, 0.5 * dt, nl)
            return u, None
        if nl is not None:
            ut = ut + 0.5 * dt * nl.f(u)
        a = grid.to_modes(u)
        b = grid.to_modes(ut)
        u = grid.from_modes(self.cos * a + (self.sin / self.omega) * b)
        ut = grid.from_modes(-self.omega * self.sin * a + self.cos * b)
        if nl is not None:
            ut = ut + 0.5 * dt * nl.f(u)
        return u, ut


def step_nls(state: EvolutionState, dt: float, nl: Nonlinearity | None) -> EvolutionState:
    if state.equation != "NLS":
        raise InvalidArgument("step_nls needs an NLS state")
    u, _ = _Stepper("NLS", state.grid, dt, nl)(state.u.values, None)
    return EvolutionState.nls(state.u.with_values(u), state.t + dt)


def step_nlkg(state: EvolutionState, dt: float, nl: Nonlinearity | None) -> EvolutionState:
    if state.equation != "NLKG":
        raise InvalidArgument("step_nlkg needs an NLKG state")
    u, ut = _Stepper("NLKG", state.grid, dt, nl)(state.u.values, state.u_t.values)
    return EvolutionState.nlkg(state.u.with_values(u), state.u_t.with_values(ut), state.t + dt)


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 1e-3
    snapshot_stride: int = 100
    monitor_stride: int = 1
    max_sup: float = 1e3
    max_grad_sq: float = 1e8
    boundary_fraction: float = 0.1
    boundary_tol: float = 1e-6
    check_boundary: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if self.snapshot_stride < 1 or self.monitor_stride < 1:
            raise InvalidArgument("strides must be >= 1")
        if self.monitor_stride > self.snapshot_stride:
            raise InvalidArgument("monitor stride must not exceed the snapshot stride")


@dataclass
class Monitor:
    rows: list = field(default_factory=list)

    def append(self, row: tuple):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        i = MONITOR_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def __getattr__(self, name):
        if name in MONITOR_COLUMNS:
            return self.column(name)
        raise AttributeError(name)

    def __len__(self):
        return len(self.rows)

    def relative_drift(self, name: str) -> float:
        v = self.column(name)
        ref = abs(v[0]) if v[0] != 0 else 1.0
        return float(np.max(np.abs(v - v[0])) / ref)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(MONITOR_COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def read_csv(cls, path) -> "Monitor":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if tuple(header[: len(MONITOR_COLUMNS)]) != MONITOR_COLUMNS:
                raise InvalidArgument(f"{path}: unexpected monitor header {header}")
            return cls([tuple(float(x) for x in row) for row in rd])


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    monitor: Monitor
    nl: Nonlinearity | None
    step_params: dict
    completed: bool = True

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> EvolutionState:
        return self.states[-1]

    @property
    def equation(self) -> str:
        return self.states[0].equation

    def __iter__(self) -> Iterator[EvolutionState]:
        return iter(self.states)

    def snapshots_between(self, t0: float, t1: float) -> list:
        return [s for s in self.states if t0 - 1e-12 <= s.t <= t1 + 1e-12]


def _monitor_row(state: EvolutionState, nl: Nonlinearity | None) -> tuple:
    u = state.u
    if nl is None:
        g = grad_sq(u)
        e = 0.5 * g
        if state.equation == "NLKG":
            e += 0.5 * mass(u) + 0.5 * mass(state.u_t)
        gi = fl = 0.0
    else:
        g = grad_sq(u)
        e = energy(state, nl)
        gi = g_integral(u, nl)
        fl = f_l1(u, nl)
    return (state.t, mass(u), e, g, gi, sup_norm(u), fl)


def step_params(initial: EvolutionState, dt: float, nl: Nonlinearity | None) -> dict:
    nls = initial.equation == "NLS"
    return {
        "equation": initial.equation,
        "dt": dt,
        "scheme": "strang-splitting" if nls else "impulse-trigonometric",
        "grid": initial.grid.describe(),
        "convention": NLS_CONVENTION if nls else NLKG_CONVENTION,
        "nonlinearity": None if nl is None else nl.describe(),
    }


def evolve(initial: EvolutionState, nl: Nonlinearity | None, T: float, cfg: EvolveConfig | None = None) -> Trajectory:
    """Integrate from ``initial.t`` to ``initial.t + T``.

    ``T`` is split into a whole number of steps no longer than ``cfg.dt``.

    Raises
    ------
    BlowupSuspected
        sup norm or ``||grad u||^2`` beyond the configured limits, or non-finite values.
    BoundaryContamination
        more than ``cfg.boundary_tol`` of the mass sits in the outer
        ``cfg.boundary_fraction`` of the domain.
    The partial trajectory rides on the exception as ``.trajectory``.
    """
    cfg = cfg or EvolveConfig()
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    nsteps = max(1, math.ceil(T / cfg.dt - 1e-9))
    dt = T / nsteps
    stepper = _Stepper(initial.equation, initial.grid, dt, nl)
    params = step_params(initial, dt, nl)
    params.update(steps=nsteps, T=T, snapshot_stride=cfg.snapshot_stride, monitor_stride=cfg.monitor_stride)

    states = [initial]
    monitor = Monitor()
    monitor.append(_monitor_row(initial, nl))
    u = initial.u.values
    ut = None if initial.u_t is None else initial.u_t.values
    t0 = initial.t
    base = initial.u

    def make_state(step, u, ut):
        t = t0 + step * dt
        if initial.equation == "NLS":
            return EvolutionState.nls(base.with_values(u), t)
        return EvolutionState.nlkg(base.with_values(u), base.with_values(ut), t)

    def abort(exc_type, msg, state):
        if states[-1] is not state:
            states.append(state)
        traj = Trajectory(tuple(states), monitor, nl, params, completed=False)
        return exc_type(msg, trajectory=traj)

    for step in range(1, nsteps + 1):
        u, ut = stepper(u, ut)
        last = step == nsteps
        if step % cfg.monitor_stride and step % cfg.snapshot_stride and not last:
            continue
        state = make_state(step, u, ut)
        if not np.all(np.isfinite(u)):
            raise abort(BlowupSuspected, f"non-finite values at t={state.t:.6g}", state)
        row = _monitor_row(state, nl)
        monitor.append(row)
        if row[5] > cfg.max_sup or row[3] > cfg.max_grad_sq:
            raise abort(
                BlowupSuspected,
                f"t={state.t:.6g}: sup norm {row[5]:.4g} or grad_sq {row[3]:.4g} beyond limits",
                state,
            )
        if cfg.check_boundary:
            frac = boundary_mass_fraction(state.u, cfg.boundary_fraction)
            if frac > cfg.boundary_tol:
                raise abort(
                    BoundaryContamination,
                    f"t={state.t:.6g}: {frac:.3g} of the mass lies in the outer "
                    f"{cfg.boundary_fraction:.0%} of the domain",
                    state,
                )
        if step % cfg.snapshot_stride == 0 or last:
            states.append(state)
    return Trajectory(tuple(states), monitor, nl, params)
