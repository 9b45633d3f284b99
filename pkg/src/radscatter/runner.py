"""Config-driven runs: ground state, classification, evolution, audits and sweeps.

Every run directory holds ``manifest.json`` (resolved config, version,
convention, run id, status) plus whatever the stages produce:
``monitor.csv``, ``snapshots/*.field``, ``reports/*.json``.  Nothing
time-dependent is written, so identical configs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import INEQUALITY_AUDITS, MORAWETZ_AUDITS, AUDIT_DEFAULTS, resolve, run_id, set_path
from .diagnostics import (
    _jsonable,
    classify_initial_data,
    gn_audit,
    radial_sobolev_audit,
    scattering_profile_cauchy,
    tm_audit,
)
from .errors import RadScatterError, TrajectoryAbort
from .evolve import NLKG_CONVENTION, NLS_CONVENTION, EvolveConfig, evolve
from .fieldio import read_state, write_ground_state, write_state
from .functionals import EvolutionState
from .grid import make_grid, resample, sample
from .ground_state import ShootingConfig, solve_ground_state
from .morawetz import (
    build_cutoff,
    identity_residual,
    virial_morawetz_audit,
    weighted_decay_integral,
    weighted_f_L1,
    window_smallness_search,
)
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

COMMANDS = ("ground-state", "classify", "evolve", "audit-morawetz", "audit-inequalities", "scatter-check")
OUT_ENV = "RADSCATTER_OUT"


def _dump(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def default_out_dir(cfg: dict, command: str) -> Path:
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    root = Path(os.environ.get(OUT_ENV, "runs"))
    return root / f"{command}-{run_id(cfg, command)}"


@dataclass
class RunResult:
    out_dir: Path
    exit_code: int
    status: str
    skipped: bool = False


class _Run:
    def __init__(self, cfg: dict, command: str, out: Path):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.nl = Nonlinearity.from_dict(cfg["nonlinearity"])
        g = cfg["grid"]
        self.grid = make_grid(g["r_max"], g["n"], g["kind"])
        self._gs = None
        self.summary = {}

    # -- stages -------------------------------------------------------------------------------

    def ground_state(self, nl=None):
        nl = nl or self.nl
        if self._gs is None or self._gs.nl != nl:
            gcfg = self.cfg["ground_state"]
            c = gcfg["c"]
            shoot = ShootingConfig(grid_r_max=gcfg["r_max"] * math.sqrt(c), grid_n=gcfg["n"])
            self._gs = solve_ground_state(nl, c, shoot)
            (self.out / "reports").mkdir(parents=True, exist_ok=True)
            write_ground_state(self.out / "reports" / "ground_state", self._gs)
        return self._gs

    def initial_state(self) -> EvolutionState:
        ini = self.cfg["initial"]
        eq = self.cfg["equation"]
        if ini["family"] == "file":
            st = read_state(ini["path"], eq)
            u = st.u if st.grid is self.grid else resample(st.u, self.grid)
            ut = None
            if eq == "NLKG" and st.u_t is not None:
                ut = st.u_t if st.grid is self.grid else resample(st.u_t, self.grid)
        else:
            if ini["family"] == "gaussian":
                A, mu = ini["A"], ini["mu"]
                u = sample(self.grid, lambda r: A * np.exp(-mu * r * r))
            else:
                focusing = Nonlinearity(self.nl.kind, 1, self.nl.p, self.nl.kappa0)
                gs = self.ground_state(focusing)
                u = gs.sample(self.grid).scaled(ini["eps"])
            ut = None
        if eq == "NLS":
            return EvolutionState.nls(u.with_values(u.values.astype(complex)))
        vel = ini["velocity"]
        if ut is None and vel["family"] == "gaussian":
            A, mu = vel["A"], vel["mu"]
            ut = sample(self.grid, lambda r: A * np.exp(-mu * r * r))
        return EvolutionState.nlkg(u, ut)

    def classify(self, state):
        Q = self.ground_state() if self.nl.focusing else None
        verdict = classify_initial_data(state, self.nl, Q)
        _dump(self.out / "reports" / "classification.json", verdict)
        self.summary["regime"] = verdict.regime
        return verdict

    def evolve(self, state):
        ic = self.cfg["integrator"]
        ecfg = EvolveConfig(
            dt=ic["dt"],
            snapshot_stride=ic["snapshot_stride"],
            monitor_stride=ic["monitor_stride"],
            max_sup=ic["max_sup"],
            max_grad_sq=ic["max_grad_sq"],
            boundary_fraction=ic["boundary_fraction"],
            boundary_tol=ic["boundary_tol"],
        )
        try:
            traj = evolve(state, self.nl, ic["T"], ecfg)
        except TrajectoryAbort as exc:
            if exc.trajectory is not None:
                self._write_trajectory(exc.trajectory)
            raise
        self._write_trajectory(traj)
        self.summary["mass_drift"] = traj.monitor.relative_drift("mass")
        self.summary["energy_drift"] = traj.monitor.relative_drift("energy")
        return traj

    def _write_trajectory(self, traj):
        traj.monitor.write_csv(self.out / "monitor.csv")
        snaps = self.out / "snapshots"
        snaps.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(traj.states):
            write_state(snaps / f"snap_{i:05d}.field", s)
        _dump(self.out / "reports" / "step_params.json", {**traj.step_params, "completed": traj.completed})

    def audits(self, traj, names):
        audits = self.cfg["audits"]
        rep = self.out / "reports"
        for name in names:
            params = audits.get(name, AUDIT_DEFAULTS[name])
            if name == "morawetz-identity":
                cw = build_cutoff(params["R"], self.grid)
                r = identity_residual(traj, cw, params["window"])
                r.write_csv(rep / "morawetz_identity.csv")
                _dump(rep / "morawetz_identity.json", r.summary())
                self.summary["morawetz_relative_residual"] = r.relative_residual
            elif name == "virial-morawetz":
                windows = params["windows"] or [
                    (params["start"] + i * params["step"], params["start"] + i * params["step"] + params["width"])
                    for i in range(params["translations"])
                ]
                thr = params["threshold"]
                if self.nl.focusing and thr is None:
                    thr = self.ground_state().threshold
                a = virial_morawetz_audit(traj, params["R_list"], windows, self.nl, threshold=thr)
                _dump(rep / "virial_morawetz.json", a.summary())
                self.summary["C_star"] = a.C_star
                self.summary["virial_morawetz_passed"] = a.passed
            elif name == "weighted-decay":
                rows = [weighted_decay_integral(traj, T, params["delta"], self.nl) for T in params["T_list"]]
                _dump(rep / "weighted_decay.json", [r for r in rows])
            elif name == "weighted-f-l1":
                rows = [weighted_f_L1(traj, T, params["delta"], self.nl) for T in params["T_list"]]
                _dump(rep / "weighted_f_l1.json", [r for r in rows])
            elif name == "window-smallness":
                r = window_smallness_search(traj, params["eps"], params["T"], params["delta"], self.nl)
                _dump(rep / "window_smallness.json", r)
                self.summary["T0"] = r.T0
            elif name == "scatter-check":
                r = scattering_profile_cauchy(traj, params["T_list"])
                _dump(rep / "scatter_check.json", r)
                self.summary["scattering_consistent"] = r.scattering_consistent

    def inequality_audits(self, names):
        audits = self.cfg["audits"]
        rep = self.out / "reports"
        rng = np.random.default_rng(self.cfg["seed"])
        for name in names:
            params = audits.get(name, AUDIT_DEFAULTS[name])
            if name == "gn":
                if self.nl.kind != "power":
                    continue
                focusing = Nonlinearity.power(self.nl.p, 1)
                Q = self.ground_state(focusing)
                fields = [Q.profile] + random_fields(Q.profile.grid, params["count"], rng)
                a = gn_audit(fields, self.nl.p, Q)
                _dump(rep / "gn_audit.json", a)
                self.summary["gn_max_normalized"] = a.max_normalized
            elif name == "tm":
                out = []
                for a_exp in params["a"]:
                    fields = tm_family(a_exp, params["kappa0"], params["count"])
                    out.append(tm_audit(fields, a_exp, params["kappa0"]))
                _dump(rep / "tm_audit.json", out)
                self.summary["tm_passed"] = all(r.passed for r in out)
            elif name == "radial-sobolev":
                g = make_grid(40.0, 512, "gauss-bessel")
                fields = [sample(g, lambda r, m=m: np.exp(-m * r * r)) for m in params["mu"]]
                a = radial_sobolev_audit(fields, params["r0"])
                _dump(rep / "radial_sobolev.json", a)
                self.summary["sobolev_constant"] = a.constant

    # -- pipeline -----------------------------------------------------------------------------

    def execute(self):
        cmd = self.command
        if cmd == "ground-state":
            gs = self.ground_state(Nonlinearity(self.nl.kind, 1, self.nl.p, self.nl.kappa0))
            self.summary.update(
                q0=gs.q0,
                grad_mass_ratio=gs.grad_sq / gs.mass_sq,
                m=gs.threshold,
                energy_identity_residual=gs.pohozaev_residuals[0],
                pohozaev_residual=gs.pohozaev_residuals[1],
            )
            if gs.lp_norm is not None:
                self.summary["lp_mass_ratio"] = gs.lp_norm / gs.mass_sq
            return
        if cmd == "audit-inequalities":
            self.inequality_audits([n for n in INEQUALITY_AUDITS if n in self.cfg["audits"]] or INEQUALITY_AUDITS)
            return
        state = self.initial_state()
        self.classify(state)
        if cmd == "classify":
            return
        traj = self.evolve(state)
        configured = list(self.cfg["audits"])
        if cmd == "evolve":
            names = [n for n in configured if n not in INEQUALITY_AUDITS]
        elif cmd == "audit-morawetz":
            names = [n for n in configured if n in MORAWETZ_AUDITS] or ["morawetz-identity", "virial-morawetz"]
        else:
            names = ["scatter-check"]
        self.audits(traj, names)
        extra = [n for n in configured if n in INEQUALITY_AUDITS]
        if cmd == "evolve" and extra:
            self.inequality_audits(extra)


def random_fields(grid, count: int, rng) -> list:
    """Sums of one to three Gaussians with random amplitudes and widths."""
    out = []
    for _ in range(count):
        k = int(rng.integers(1, 4))
        amps = rng.uniform(-1.0, 1.0, k)
        amps[0] = abs(amps[0]) + 0.1
        mus = rng.uniform(0.2, 4.0, k)
        centers = rng.uniform(0.0, 3.0, k) * (rng.random(k) < 0.5)
        out.append(sample(grid, lambda r, a=amps, m=mus, c=centers: np.sum(
            a[:, None] * np.exp(-m[:, None] * (r[None, :] - c[:, None]) ** 2), axis=0)))
    return out


def tm_family(a: float, kappa0: float, count: int = 20) -> list:
    """Half Gaussians, half Moser profiles, each scaled to a fraction of the gradient budget."""
    levels = np.linspace(0.1, 0.95, max(1, count // 2))
    out = []
    gg = make_grid(12.0, 512, "gauss-bessel")
    for i, s in enumerate(levels):
        mu = 0.5 + i % 4
        amp = math.sqrt(4 * math.pi * s / (a * kappa0 * math.pi))
        out.append(sample(gg, lambda r, A=amp, m=mu: A * np.exp(-m * r * r)))
    gu = make_grid(2.0, 8000, "uniform")
    for i, s in enumerate(levels[: count - len(levels)]):
        log_n = 1.0 + 0.5 * i
        scale = math.sqrt(4 * math.pi * s / (a * kappa0))
        out.append(sample(gu, lambda r, c=scale, L=log_n: c * moser_profile(r, L)))
    return out


def moser_profile(r, log_n: float):
    """Moser function with unit Dirichlet energy and inner radius ``e^-log_n``."""
    r = np.asarray(r, dtype=float)
    r_in = math.exp(-log_n)
    val = np.where(r <= r_in, log_n, np.log(1.0 / np.maximum(r, 1e-300)))
    val = np.where(r >= 1.0, 0.0, val)
    return val / math.sqrt(2 * math.pi * log_n)


def _manifest(cfg, command, rid, status, exit_code=0, error=None, summary=None):
    eq = cfg["equation"]
    return {
        "command": command,
        "config": cfg,
        "convention": NLS_CONVENTION if eq == "NLS" else NLKG_CONVENTION,
        "error": error,
        "exit_code": exit_code,
        "run_id": rid,
        "status": status,
        "summary": summary or {},
        "version": __version__,
    }


def run(config: dict, command: str = "evolve", out_dir: str | Path | None = None, force: bool = False) -> RunResult:
    """Execute one command for a config; returns the exit code instead of raising."""
    cfg = resolve(config)
    out = Path(out_dir) if out_dir is not None else default_out_dir(cfg, command)
    rid = run_id(cfg, command)
    mpath = out / "manifest.json"
    if mpath.exists() and not force:
        try:
            old = json.loads(mpath.read_text())
        except json.JSONDecodeError:
            old = {}
        if old.get("run_id") == rid and old.get("status") in ("complete", "failed"):
            log.info("%s already holds run %s; use --force to redo it", out, rid)
            return RunResult(out, int(old.get("exit_code", 0)), old["status"], skipped=True)
    if out.exists() and force:
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(mpath, _manifest(cfg, command, rid, "running"))
    job = _Run(cfg, command, out)
    try:
        job.execute()
    except RadScatterError as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        _dump(mpath, _manifest(cfg, command, rid, "failed", exc.exit_code, err, job.summary))
        return RunResult(out, exc.exit_code, "failed")
    _dump(mpath, _manifest(cfg, command, rid, "complete", 0, None, job.summary))
    return RunResult(out, 0, "complete")


def _sweep_member(args):
    cfg, command, out, force, axis, value = args
    row = {"axis": axis, "value": value}
    try:
        member = set_path(cfg, axis, value)
    except RadScatterError as exc:
        row.update(status="failed", exit_code=exc.exit_code, error=str(exc))
        return row
    res = run(member, command, out, force)
    manifest = json.loads((res.out_dir / "manifest.json").read_text())
    row.update(status=res.status, exit_code=res.exit_code, error=(manifest.get("error") or {}).get("message", ""))
    row.update(manifest.get("summary", {}))
    return row


def sweep(base: dict, axis: str, values, command: str = "evolve", out_dir: str | Path | None = None,
          jobs: int = 1, force: bool = False) -> list:
    """Run ``command`` once per value of the dotted config path ``axis``.

    Members run in parallel up to ``jobs``; a failing member is recorded in
    its row and the sweep carries on.  Writes ``sweep.csv`` keyed by value.
    """
    cfg = resolve(base)
    out = Path(out_dir) if out_dir is not None else default_out_dir(cfg, f"sweep-{command}")
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, command, out / f"{i:03d}", force, axis, v) for i, v in enumerate(values)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_member, tasks))
    else:
        rows = [_sweep_member(t) for t in tasks]
    base_cols = ["axis", "value", "status", "exit_code", "error"]
    extra = sorted({k for r in rows for k in r} - set(base_cols))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(base_cols + extra)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in base_cols + extra])
    return rows


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return v
