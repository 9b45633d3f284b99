import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from radscatter.cli import main
from radscatter.config import AUDIT_DEFAULTS, DEFAULTS, load_config, resolve, run_id, set_path
from radscatter.errors import ConfigInvalid, InvalidField
from radscatter.fieldio import read_field, read_state, write_field, write_state
from radscatter.functionals import EvolutionState
from radscatter.grid import make_grid, sample
from radscatter.runner import OUT_ENV, run, sweep

MINIMAL = {
    "nonlinearity": {"kind": "power", "p": 4, "lam": -1},
    "grid": {"r_max": 30.0, "n": 128},
    "integrator": {"dt": 0.01, "T": 0.2, "snapshot_stride": 10, "monitor_stride": 5},
}


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# -- config --------------------------------------------------------------------------------------


def test_defaults_resolve():
    cfg = resolve({})
    assert cfg["equation"] == "NLS" and cfg["nonlinearity"] == DEFAULTS["nonlinearity"]
    assert cfg["audits"] == {}
    cfg = resolve({"audits": {"gn": None}})
    assert cfg["audits"]["gn"] == AUDIT_DEFAULTS["gn"]


@pytest.mark.parametrize("raw,path", [
    ({"grid": {"nn": 3}}, "grid.nn"),
    ({"nonlinearity": {"p": 2}}, "nonlinearity.p"),
    ({"nonlinearity": {"kind": "exponential", "kappa0": -1.0}}, "nonlinearity.kappa0"),
    ({"integrator": {"dt": 0}}, "integrator.dt"),
    ({"integrator": {"snapshot_stride": 2, "monitor_stride": 5}}, "integrator.monitor_stride"),
    ({"audits": {"gnn": {}}}, "audits.gnn"),
    ({"audits": {"tm": {"a": [0.5]}}}, "audits.tm.a"),
    ({"audits": {"weighted-decay": {"delta": 0.0}}}, "audits.weighted-decay.delta"),
    ({"initial": {"family": "file"}}, "initial.path"),
    ({"grid": 3}, "grid"),
])
def test_config_errors_name_the_field(raw, path):
    with pytest.raises(ConfigInvalid) as info:
        resolve(raw)
    assert str(info.value).startswith(path)


def test_set_path():
    cfg = set_path(resolve({}), "nonlinearity.p", 6.0)
    assert cfg["nonlinearity"]["p"] == 6.0
    with pytest.raises(ConfigInvalid):
        set_path(resolve({}), "nonlinearity.q", 1)
    with pytest.raises(ConfigInvalid):
        set_path(resolve({}), "nonlinearity.p", 1.5)


def test_run_id_ignores_output_dir():
    a = resolve(MINIMAL)
    b = resolve({**MINIMAL, "output_dir": "/somewhere"})
    assert run_id(a, "evolve") == run_id(b, "evolve") != run_id(a, "classify")
    assert run_id(a, "evolve") != run_id(set_path(a, "seed", 1), "evolve")


def test_load_yaml(tmp_path):
    cfg = load_config(write_yaml(tmp_path / "c.yaml", MINIMAL))
    assert cfg["grid"]["n"] == 128 and cfg["grid"]["kind"] == "gauss-bessel"
    (tmp_path / "bad.yaml").write_text("grid: [1, 2\n")
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.yaml")
    assert load_config(None) == resolve({})


# -- field files ----------------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["gauss-bessel", "uniform"])
def test_field_round_trip_is_bit_exact(tmp_path, kind):
    g = make_grid(7.5, 100, kind)
    rng = np.random.default_rng(1)
    u = sample(g, lambda r: np.exp(-r * r) * (1 + 0.1 * rng.normal(size=r.size)) + 1j * np.sin(r) / 3)
    write_field(tmp_path / "u.field", u, t=1.25)
    back = read_field(tmp_path / "u.field")
    assert back.grid is g and np.array_equal(back.values, u.values)
    real = sample(g, lambda r: np.exp(-r))
    write_field(tmp_path / "r.field", real)
    assert np.isrealobj(read_field(tmp_path / "r.field").values)


def test_state_round_trip(tmp_path):
    g = make_grid(10.0, 64, "gauss-bessel")
    s = EvolutionState.nlkg(sample(g, lambda r: np.exp(-r * r)), sample(g, lambda r: r * np.exp(-r)), t=0.5)
    write_state(tmp_path / "s.field", s)
    back = read_state(tmp_path / "s.field")
    assert back.equation == "NLKG" and back.t == 0.5
    assert np.array_equal(back.u_t.values, s.u_t.values)
    write_state(tmp_path / "n.field", EvolutionState.nls(s.u))
    assert read_state(tmp_path / "n.field", "NLKG").equation == "NLKG"
    assert read_state(tmp_path / "n.field").equation == "NLS"


def test_bad_field_files(tmp_path):
    g = make_grid(10.0, 32, "gauss-bessel")
    write_field(tmp_path / "u.field", sample(g, lambda r: np.exp(-r)))
    lines = (tmp_path / "u.field").read_text().splitlines()
    (tmp_path / "nohdr.field").write_text("\n".join(lines[1:]))
    with pytest.raises(InvalidField):
        read_field(tmp_path / "nohdr.field")
    (tmp_path / "short.field").write_text("\n".join(lines[:-1]))
    with pytest.raises(InvalidField):
        read_field(tmp_path / "short.field")
    shifted = [lines[0]] + [" ".join([repr(float(ln.split()[0]) + 1e-3)] + ln.split()[1:]) for ln in lines[1:]]
    (tmp_path / "nodes.field").write_text("\n".join(shifted))
    with pytest.raises(InvalidField):
        read_field(tmp_path / "nodes.field")
    (tmp_path / "junk.field").write_text(lines[0] + "\n1 2 x\n")
    with pytest.raises(InvalidField):
        read_field(tmp_path / "junk.field")


# -- runner and CLI ------------------------------------------------------------------------------


def test_minimal_defocusing_run(tmp_path):
    out = tmp_path / "run"
    assert main(["evolve", "--config", write_yaml(tmp_path / "c.yaml", MINIMAL), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete" and manifest["exit_code"] == 0
    assert manifest["config"] == resolve(MINIMAL) and "version" in manifest and "convention" in manifest
    assert json.loads((out / "reports" / "classification.json").read_text())["regime"] == "defocusing-global"
    with open(out / "monitor.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:6] == ["t", "mass", "energy", "grad_sq", "g_integral", "sup_norm"]
    assert len(rows) == 1 + 5 and float(rows[-1][0]) == pytest.approx(0.2)
    assert sorted(p.name for p in (out / "snapshots").iterdir()) == ["snap_00000.field", "snap_00001.field",
                                                                      "snap_00002.field"]
    assert read_state(out / "snapshots" / "snap_00002.field").t == pytest.approx(0.2)


def test_ground_state_command(tmp_path):
    out = tmp_path / "gs"
    cfg = {"nonlinearity": {"kind": "power", "p": 3, "lam": 1}}
    assert main(["ground-state", "--config", write_yaml(tmp_path / "c.yaml", cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "manifest.json").read_text())["summary"]
    assert summary["grad_mass_ratio"] == pytest.approx(1.5, rel=1e-4)
    assert summary["lp_mass_ratio"] == pytest.approx(2.5, rel=1e-4)
    side = json.loads((out / "reports" / "ground_state.json").read_text())
    assert side["m"] == pytest.approx(summary["m"])
    assert read_field(out / "reports" / "ground_state.field").values[0] > 0


def test_runs_are_deterministic(tmp_path):
    cfg = {**MINIMAL, "audits": {"scatter-check": {"T_list": [0.05]}, "gn": {"count": 5}}}
    cfg["integrator"] = {**MINIMAL["integrator"], "snapshot_stride": 5}
    a, b = run(cfg, "evolve", tmp_path / "a"), run(cfg, "evolve", tmp_path / "b")
    assert a.exit_code == b.exit_code == 0
    ta, tb = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert ta.keys() == tb.keys() and "reports/gn_audit.json" in ta
    assert all(ta[k] == tb[k] for k in ta)


def test_runs_resume(tmp_path):
    out = tmp_path / "run"
    first = run(MINIMAL, "classify", out)
    assert first.status == "complete" and not first.skipped
    (out / "marker").write_text("kept")
    again = run(MINIMAL, "classify", out)
    assert again.skipped and (out / "marker").exists()
    forced = run(MINIMAL, "classify", out, force=True)
    assert not forced.skipped and not (out / "marker").exists()
    # a different config in the same directory is not mistaken for a finished run
    other = run(set_path(resolve(MINIMAL), "seed", 3), "classify", out)
    assert not other.skipped


def test_config_error_exit_code(tmp_path, capsys):
    path = write_yaml(tmp_path / "c.yaml", {"nonlinearity": {"p": 2}})
    assert main(["evolve", "--config", path, "--out", str(tmp_path / "x")]) == 2
    assert "nonlinearity.p" in capsys.readouterr().err


def test_supercritical_ground_state_multiple_fails_cleanly(tmp_path):
    # 1.5 Q lies past the maximum of J along u -> s u, so it is K-negative below m; the
    # focusing flow concentrates or sheds radiation into the wall
    cfg = {
        "nonlinearity": {"kind": "power", "p": 4, "lam": 1},
        "grid": {"r_max": 30.0, "n": 256},
        "initial": {"family": "scaled-ground-state", "eps": 1.5},
        "integrator": {"dt": 1e-3, "T": 2.0, "snapshot_stride": 100, "monitor_stride": 10, "max_sup": 50.0},
    }
    res = run(cfg, "evolve", tmp_path / "run")
    assert res.exit_code in (4, 5)
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["error"]["type"] in ("BlowupSuspected", "BoundaryContamination")
    verdict = json.loads((tmp_path / "run" / "reports" / "classification.json").read_text())
    assert verdict["regime"] == "focusing-below-threshold-K-negative"
    assert (tmp_path / "run" / "monitor.csv").exists()


def test_out_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "root"))
    path = write_yaml(tmp_path / "c.yaml", MINIMAL)
    assert main(["classify", "--config", path]) == 0
    dirs = list((tmp_path / "root").iterdir())
    assert len(dirs) == 1 and dirs[0].name == f"classify-{run_id(resolve(MINIMAL), 'classify')}"


def test_empty_sweep(tmp_path):
    path = write_yaml(tmp_path / "c.yaml", MINIMAL)
    assert main(["sweep", "--config", path, "--axis", "nonlinearity.p", "--values", "", "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "sweep.csv") as fh:
        assert list(csv.reader(fh)) == [["axis", "value", "status", "exit_code", "error"]]


def test_sweep_of_ground_state_ratios(tmp_path):
    path = write_yaml(tmp_path / "c.yaml", {"nonlinearity": {"kind": "power", "p": 4, "lam": 1}})
    code = main(["sweep", "--config", path, "--axis", "nonlinearity.p", "--values", "2.5,3,4,6,1.5",
                 "--stage", "ground-state", "--jobs", "2", "--out", str(tmp_path / "s")])
    assert code == 0
    with open(tmp_path / "s" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["2.5", "3", "4", "6", "1.5"]
    for r in rows[:4]:
        assert r["status"] == "complete"
        assert float(r["grad_mass_ratio"]) == pytest.approx(float(r["value"]) / 2, rel=1e-4)
    assert rows[4]["status"] == "failed" and rows[4]["exit_code"] == "2"


def test_sweep_of_radius_lists_keeps_C_star_stable(tmp_path):
    base = {
        "grid": {"r_max": 120.0, "n": 384},
        "initial": {"mu": 0.5},
        "integrator": {"dt": 0.01, "T": 8.0, "snapshot_stride": 100, "monitor_stride": 5},
        "audits": {"virial-morawetz": {"windows": [[1.0, 3.0], [3.0, 5.0], [5.0, 7.0]]}},
    }
    rows = sweep(base, "audits.virial-morawetz.R_list", [[1.0, 2.0], [2.0, 4.0], [1.0, 2.0, 4.0, 8.0]],
                 "audit-morawetz", tmp_path / "s")
    assert all(r["status"] == "complete" and r["virial_morawetz_passed"] for r in rows)
    cs = [r["C_star"] for r in rows]
    assert max(cs) <= 2 * min(cs)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "radscatter", "--help"], capture_output=True, text=True, check=True)
    for name in ("ground-state", "classify", "evolve", "audit-morawetz", "audit-inequalities", "scatter-check", "sweep"):
        assert name in proc.stdout
