"""Plain-text radial-field files and ground-state sidecars.

A field file starts with one header line::

    # radial-field v1 kind=gauss-bessel r_max=40.0 n=256 t=0.0 components=u

followed by ``n`` rows ``r re(u) im(u)``; NLKG states add ``re(u_t) im(u_t)``
(``components=u,u_t``).  Numbers are written with ``repr`` so a round trip is
bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidField
from .functionals import EvolutionState
from .grid import RadialField, make_grid

MAGIC = "# radial-field v1"


def _header(grid, t, components):
    return f"{MAGIC} kind={grid.kind} r_max={float(grid.r_max)!r} n={grid.n} t={float(t)!r} components={components}"


def _rows(columns):
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in zip(*columns))


def write_field(path, u: RadialField, t: float = 0.0):
    v = np.asarray(u.values)
    cols = [u.grid.nodes, v.real, np.imag(v)]
    Path(path).write_text(_header(u.grid, t, "u") + "\n" + _rows(cols) + "\n")


def write_state(path, state: EvolutionState):
    grid = state.grid
    u = np.asarray(state.u.values)
    cols = [grid.nodes, u.real, np.imag(u)]
    comps = "u"
    if state.u_t is not None:
        ut = np.asarray(state.u_t.values)
        cols += [ut.real, np.imag(ut)]
        comps = "u,u_t"
    Path(path).write_text(_header(grid, state.t, comps) + "\n" + _rows(cols) + "\n")


def _parse(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(MAGIC):
        raise InvalidField(f"{path}: missing '{MAGIC}' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][len(MAGIC):].split())
    try:
        grid = make_grid(float(meta["r_max"]), int(meta["n"]), meta["kind"])
        data = np.array([[float(x) for x in ln.split()] for ln in lines[1:] if ln.strip()])
    except (KeyError, ValueError) as exc:
        raise InvalidField(f"{path}: malformed field file ({exc})") from exc
    comps = meta.get("components", "u").split(",")
    if data.shape != (grid.n, 1 + 2 * len(comps)):
        raise InvalidField(f"{path}: expected {grid.n} rows of {1 + 2 * len(comps)} columns, got {data.shape}")
    if not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=0):
        raise InvalidField(f"{path}: node column does not match a {grid.kind} grid")
    return grid, float(meta.get("t", 0.0)), comps, data


def _values(data, col):
    re, im = data[:, col], data[:, col + 1]
    return re + 1j * im if np.any(im) else re.copy()


def read_field(path) -> RadialField:
    grid, _, _, data = _parse(path)
    return RadialField(grid, _values(data, 1))


def read_state(path, equation: str | None = None) -> EvolutionState:
    grid, t, comps, data = _parse(path)
    u = RadialField(grid, _values(data, 1))
    if "u_t" in comps:
        return EvolutionState.nlkg(u, RadialField(grid, _values(data, 3)), t)
    if equation == "NLKG":
        return EvolutionState.nlkg(u, None, t)
    return EvolutionState.nls(u, t)


def write_ground_state(stem, gs) -> tuple[Path, Path]:
    """``<stem>.field`` with the profile and ``<stem>.json`` with norms, residuals, c, nl and m."""
    stem = Path(stem)
    fpath = stem.with_suffix(".field")
    jpath = stem.with_suffix(".json")
    write_field(fpath, gs.profile)
    jpath.write_text(gs.to_json() + "\n")
    return fpath, jpath


def read_ground_state_sidecar(stem) -> tuple[RadialField, dict]:
    stem = Path(stem)
    return read_field(stem.with_suffix(".field")), json.loads(stem.with_suffix(".json").read_text())
