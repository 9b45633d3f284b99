"""Acceptance suite: one test, and one printed pass/fail line, per criterion."""

import math
import time

import numpy as np
import pytest

from radscatter import EvolutionState, EvolveConfig, Nonlinearity, evolve, linear_propagate, make_grid, sample
from radscatter.diagnostics import gn_audit, norm_product_test, scattering_profile_cauchy, tm_audit
from radscatter.functionals import static_energy_J, virial_K
from radscatter.grid import grad_sq, h1_norms, sup_norm
from radscatter.ground_state import solve_ground_state
from radscatter.morawetz import (
    build_cutoff,
    identity_residual,
    virial_morawetz_audit,
    weighted_decay_integral,
    weighted_f_L1,
)
from radscatter.runner import random_fields, tm_family

DEFOCUS_P4 = Nonlinearity.power(4, -1)
DEFOCUS_EXP = Nonlinearity.exponential(1.0, -1)
FOCUS_P4 = Nonlinearity.power(4, 1)

# Long runs: a wide Gaussian on a large domain keeps radiation off the wall until T = 50.
LONG_T = 50.0
WINDOWS = [(5.0 + 5 * i, 15.0 + 5 * i) for i in range(8)]
R_LIST = [2.0, 4.0, 8.0, 16.0]
T_LIST = [1.0, 2.0, 4.0, 8.0]


def _long_run(nl):
    grid = make_grid(400.0, 512, "gauss-bessel")
    u0 = sample(grid, lambda r: np.exp(-0.1 * r * r) + 0j)
    return evolve(EvolutionState.nls(u0), nl, LONG_T, EvolveConfig(dt=1e-2, snapshot_stride=50))


@pytest.fixture(scope="module")
def long_defocusing_power():
    return _long_run(DEFOCUS_P4)


@pytest.fixture(scope="module")
def long_defocusing_exp():
    return _long_run(DEFOCUS_EXP)


@pytest.fixture(scope="module")
def ground_state_p4():
    return solve_ground_state(FOCUS_P4)


def test_c01_ground_state_identities(criterion):
    worst, details = 0.0, []
    ok = True
    for p in (2.5, 3.0, 4.0, 6.0):
        nl = Nonlinearity.power(p, 1)
        t0 = time.perf_counter()
        Q = solve_ground_state(nl)
        elapsed = time.perf_counter() - t0
        e_grad = abs(Q.grad_sq / Q.mass_sq - p / 2) / (p / 2)
        e_lp = abs(Q.lp_norm / Q.mass_sq - (p + 2) / 2) / ((p + 2) / 2)
        k_rel = abs(virial_K(Q.profile, nl)) / Q.grad_sq
        worst = max(worst, e_grad, e_lp, k_rel)
        ok &= e_grad < 1e-4 and e_lp < 1e-4 and k_rel < 1e-4 and elapsed < 5.0
        details.append(f"p={p}: {elapsed:.2f}s")
    criterion(1, "ground-state identities", ok, f"worst relative error {worst:.2e}; " + ", ".join(details))


def test_c02_gn_sharpness(criterion, ground_state_p4):
    Q = ground_state_p4
    rng = np.random.default_rng(2024)
    grid = Q.profile.grid
    fields = random_fields(grid, 100, rng)
    # near-optimizers: small perturbations and dilations of Q0
    for eps in (1e-3, 1e-2, 1e-1):
        fields.append(Q.profile.with_values(Q.profile.values * (1 + eps * np.exp(-grid.nodes ** 2))))
        fields.append(sample(grid, lambda r, s=1 + eps: Q(s * r)))
    audit = gn_audit([Q.profile] + fields, 4.0, Q)
    others = [r for r in audit.ratios[1:] if r is not None]
    ok = abs(audit.ground_state_ratio - 1) < 1e-3 and max(others) <= 1 + 1e-6 and len(others) >= 100
    criterion(2, "Gagliardo-Nirenberg sharpness", ok,
              f"ratio at Q0 {audit.ground_state_ratio:.10f}, max over {len(others)} fields {max(others):.10f}")


def _nls_drifts(dt):
    grid = make_grid(80.0, 384, "gauss-bessel")
    u0 = sample(grid, lambda r: np.exp(-r * r) + 0j)
    tr = evolve(EvolutionState.nls(u0), DEFOCUS_P4, 5.0, EvolveConfig(dt=dt, snapshot_stride=1000))
    return tr.monitor.relative_drift("mass"), tr.monitor.relative_drift("energy")


def _nlkg_drift(dt):
    grid = make_grid(30.0, 256, "gauss-bessel")
    u0 = sample(grid, lambda r: np.exp(-r * r))
    tr = evolve(EvolutionState.nlkg(u0), DEFOCUS_P4, 5.0, EvolveConfig(dt=dt, snapshot_stride=1000))
    return tr.monitor.relative_drift("energy")


def test_c03_conservation(criterion):
    m1, e1 = _nls_drifts(1e-3)
    _, e2 = _nls_drifts(5e-4)
    k1 = _nlkg_drift(1e-3)
    k2 = _nlkg_drift(5e-4)
    ok = m1 < 1e-10 and e1 < 1e-6 and k1 < 1e-5 and e1 / e2 >= 3 and k1 / k2 >= 3
    criterion(3, "conservation", ok,
              f"NLS mass {m1:.1e}, energy {e1:.1e} (halving x{e1 / e2:.2f}); NLKG energy {k1:.1e} (halving x{k1 / k2:.2f})")


def _morawetz_report(dt, n):
    grid = make_grid(40.0, n, "gauss-bessel")
    u0 = sample(grid, lambda r: 1.5 * np.exp(-r * r) + 0j)
    tr = evolve(EvolutionState.nls(u0), DEFOCUS_P4, 2.0, EvolveConfig(dt=dt, snapshot_stride=10))
    return identity_residual(tr, build_cutoff(3.0, grid))


def test_c04_morawetz_identity(criterion):
    prod = _morawetz_report(1e-3, 512)
    fine = _morawetz_report(5e-4, 1024)
    null_exact = all(np.all(rep.terms["radial_null"] == 0.0) for rep in (prod, fine))
    gain = prod.max_residual / fine.max_residual
    ok = prod.relative_residual < 1e-3 and gain >= 3 and null_exact
    criterion(4, "Morawetz identity", ok,
              f"relative residual {prod.relative_residual:.2e}, halving gain x{gain:.2f}, radial-null term zero: {null_exact}")


def test_c05_virial_morawetz(criterion, long_defocusing_power, long_defocusing_exp):
    a = virial_morawetz_audit(long_defocusing_power, R_LIST, WINDOWS, DEFOCUS_P4)
    b = virial_morawetz_audit(long_defocusing_exp, R_LIST, WINDOWS, DEFOCUS_EXP)
    ok = a.passed and b.passed and a.gamma == 2.0 and b.gamma == 2.0
    criterion(5, "virial-Morawetz bound", ok,
              f"power C*={a.C_star:.3g} (first window {a.window_constants[0]:.3g}), "
              f"exponential C*={b.C_star:.3g} (first window {b.window_constants[0]:.3g})")


def _bounded(ratios):
    return all(math.isfinite(r) for r in ratios) and max(ratios) <= 2 * ratios[0]


def test_c06_weighted_decay(criterion, long_defocusing_power, long_defocusing_exp):
    rp = [weighted_decay_integral(long_defocusing_power, T, 0.05).ratio for T in T_LIST]
    re = [weighted_decay_integral(long_defocusing_exp, T, 0.05).ratio for T in T_LIST]
    rf = [weighted_f_L1(long_defocusing_exp, T, 0.05).ratio for T in T_LIST]
    ok = _bounded(rp) and _bounded(re) and _bounded(rf)
    fmt = lambda xs: "/".join(f"{x:.3g}" for x in xs)  # noqa: E731
    criterion(6, "weighted decay", ok, f"G power {fmt(rp)}, G exponential {fmt(re)}, f exponential {fmt(rf)}")


def test_c07_free_dispersive_decay(criterion):
    grid = make_grid(200.0, 1024, "gauss-bessel")
    state = EvolutionState.nls(sample(grid, lambda r: np.exp(-r * r) + 0j))
    worst = 0.0
    for t in np.linspace(0.0, 10.0, 41):
        s = linear_propagate(state, t)
        worst = max(worst, abs(sup_norm(s.u) - 1 / math.sqrt(1 + 16 * t * t)))
    criterion(7, "free dispersive decay", worst < 1e-3, f"max sup-norm error {worst:.2e} for t <= 10")


def test_c08_trudinger_moser(criterion):
    ok, details = True, []
    for a in (1.0, 2.0):
        fields = tm_family(a, 1.0, 20)
        grads = [grad_sq(u) for u in fields]
        admissible = all(g < 4 * math.pi / a for g in grads)
        # one member over the gradient budget must be rejected, not evaluated
        over = sample(fields[0].grid, lambda r, s=math.sqrt(1.2 * 4 / a): s * np.exp(-r * r))
        audit = tm_audit(fields + [over], a, 1.0)
        rejected = [r["index"] for r in audit.rejected] == [len(fields)] and audit.lhs[-1] is None
        finite = all(x is not None and math.isfinite(x) for x in audit.lhs[:-1])
        dominated = all(audit.constant * r >= l for l, r in zip(audit.lhs[:-1], audit.rhs[:-1]))
        ok &= admissible and rejected and finite and dominated and audit.passed and len(fields) == 20
        details.append(f"a={a:g}: C={audit.constant:.3g}, refined {audit.refined_constant:.3g}")
    criterion(8, "Trudinger-Moser", ok, "; ".join(details))


def test_c09_below_threshold_coercivity(criterion, ground_state_p4):
    Q = ground_state_p4
    grid = make_grid(200.0, 1024, "gauss-bessel")
    # the wall conserves mass and energy, so modest leakage leaves the bound intact
    cfg = EvolveConfig(dt=1e-2, snapshot_stride=100, monitor_stride=10, boundary_tol=1e-2)
    u0 = Q.sample(grid)
    tr = evolve(EvolutionState.nls(u0.with_values(0.5 * u0.values + 0j)), FOCUS_P4, 20.0, cfg)
    ratios = [virial_K(s.u, FOCUS_P4) / grad_sq(s.u) for s in tr.states]
    C = min(ratios)

    nl_exp = Nonlinearity.exponential(1.0, 1)
    v0 = sample(grid, lambda r: np.exp(-r * r) + 0j)
    tr_exp = evolve(EvolutionState.nls(v0), nl_exp, 20.0, cfg)
    g_max = float(np.max(tr_exp.monitor.column("grad_sq")))
    ok = C > 0 and all(r >= C for r in ratios) and g_max < 4 * math.pi and len(tr.states) > 10
    criterion(9, "below-threshold coercivity", ok,
              f"C={C:.4f} over {len(tr.states)} snapshots; exponential max grad^2 {g_max:.4f} < 4 pi")


def test_c10_scattering_consistency(criterion, long_defocusing_power):
    rep = scattering_profile_cauchy(long_defocusing_power, [5.0, 10.0, 20.0])
    d5, d10, d20 = rep.delta
    u0 = long_defocusing_power.states[0]
    lin = evolve(u0, None, LONG_T, EvolveConfig(dt=1e-2, snapshot_stride=50))
    lin_delta = max(scattering_profile_cauchy(lin, [5.0, 10.0, 20.0]).delta)
    # 5000 unitary steps accumulate round-off of order steps * eps * ||u0||_H1
    scale = math.sqrt(sum(h1_norms(u0.u)))
    ok = d5 > d10 > d20 and d20 / d5 < 0.5 and lin_delta < 1e-10 * scale
    criterion(10, "scattering consistency", ok,
              f"delta = {d5:.3g}, {d10:.3g}, {d20:.3g}; linear run max delta {lin_delta:.1e} (H1 norm {scale:.3g})")


def test_c11_classification_equivalence(criterion, ground_state_p4):
    Q = ground_state_p4
    m = Q.threshold
    grid = Q.profile.grid
    rng = np.random.default_rng(11)
    agree, total, signs = 0, 0, {True: 0, False: 0}
    while total < 60:
        amp, mu = rng.uniform(0.2, 4.0), rng.uniform(0.1, 8.0)
        extra = rng.uniform(-0.5, 0.5) * amp
        u = sample(grid, lambda r: amp * np.exp(-mu * r * r) + extra * np.exp(-4 * mu * r * r))
        if not static_energy_J(u, FOCUS_P4) < m:
            continue
        k_positive = virial_K(u, FOCUS_P4) > 0
        agree += norm_product_test(u, Q)["below"] == k_positive
        signs[k_positive] += 1
        total += 1
    ok = agree == total and total >= 50
    criterion(11, "classification equivalence", ok,
              f"{agree}/{total} agree (K>0: {signs[True]}, K<0: {signs[False]})")

