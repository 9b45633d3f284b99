import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radscatter.errors import InvalidArgument
from radscatter.functionals import (
    VIRIAL_PAIR,
    EvolutionState,
    ScalingPair,
    energy,
    free_energy_sandwich,
    functional_K,
    functional_report,
    mass,
    static_energy_J,
    virial_K,
)
from radscatter.grid import make_grid, sample
from radscatter.nonlinearity import Nonlinearity

GB = make_grid(12.0, 384, "gauss-bessel")
FOCUS4 = Nonlinearity.power(4, 1)
DEFOCUS4 = Nonlinearity.power(4, -1)
EXP = Nonlinearity.exponential(1.0, 1)


def gaussian(a=1.0, mu=1.0):
    return sample(GB, lambda r: a * np.exp(-mu * r * r))


ZERO = gaussian(0.0)


def test_mass_examples():
    assert mass(gaussian()) == pytest.approx(math.pi / 2, rel=1e-12)
    assert mass(ZERO) == 0.0
    assert mass(EvolutionState.nls(gaussian(2.0))) == pytest.approx(4 * mass(gaussian()), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.2, 3.0))
def test_mass_scaling_law(s, mu):
    u = gaussian(1.0, mu)
    assert mass(u.scaled(s)) == pytest.approx(s * s * mass(u), rel=1e-13)


def test_energy_examples():
    assert energy(EvolutionState.nls(gaussian()), DEFOCUS4) == pytest.approx(math.pi / 2 + math.pi / 36, rel=1e-10)
    assert energy(EvolutionState.nls(ZERO), DEFOCUS4) == 0.0
    kg = EvolutionState.nlkg(ZERO, gaussian())
    assert energy(kg, DEFOCUS4) == pytest.approx(math.pi / 4, rel=1e-12)


def test_static_energy_examples():
    assert static_energy_J(ZERO, FOCUS4, 3.0) == 0.0
    u = gaussian()
    assert static_energy_J(u, FOCUS4) == pytest.approx(math.pi / 2 + math.pi / 4 - math.pi / 36, rel=1e-10)
    assert static_energy_J(u, FOCUS4, 1.0) - static_energy_J(u, FOCUS4, 0.0) == pytest.approx(0.5 * mass(u), rel=1e-12)
    with pytest.raises(InvalidArgument):
        static_energy_J(u, FOCUS4, -0.1)


def test_functional_K_examples():
    u = gaussian()
    assert functional_K(u, ScalingPair(0, 1), FOCUS4, 1.0) == pytest.approx(4 * math.pi / 9, rel=1e-10)
    for pair in (ScalingPair(1, -1), ScalingPair(0, 1), ScalingPair(1, 0), ScalingPair(2, 1)):
        assert functional_K(ZERO, pair, FOCUS4) == 0.0
    with pytest.raises(InvalidArgument):
        functional_K(u, ScalingPair(0, -1), FOCUS4)
    assert functional_K(u, ScalingPair(1, 0), FOCUS4, quadratic_only=True) == pytest.approx(
        math.pi + math.pi / 2, rel=1e-10)


def test_virial_K_examples():
    assert virial_K(gaussian(), FOCUS4) == pytest.approx(8 * math.pi / 9, rel=1e-10)
    assert virial_K(ZERO, FOCUS4) == 0.0


@pytest.mark.parametrize("pair,ok", [((1, -1), True), ((0, 1), True), ((1, 0), True), ((0, 0), False),
                                     ((0, -1), False), ((-1, 2), False), ((1, -1.5), False)])
def test_admissibility(pair, ok):
    assert ScalingPair(*pair).admissible is ok


def test_power_density_matches_G_definition():
    # Re(conj(u) f) - F = G: ties the density used in K to the virial G
    u = gaussian(1.3)
    for nl in (FOCUS4, Nonlinearity.power(3, -1), EXP):
        np.testing.assert_allclose(nl.density(u.values) - nl.F(u.values), nl.G(u.values), rtol=1e-12, atol=1e-300)


fields = st.lists(st.tuples(st.floats(0.1, 1.5), st.floats(0.4, 3.0)), min_size=1, max_size=3)


def _profile(terms):
    return lambda r: sum(a * np.exp(-m * r * r) for a, m in terms)


@settings(max_examples=25, deadline=None)
@given(fields, st.floats(0.0, 5.0), st.sampled_from([FOCUS4, DEFOCUS4, EXP]))
def test_virial_K_is_the_pair_one_minus_one(terms, c, nl):
    u = sample(GB, _profile(terms))
    a, b = virial_K(u, nl), functional_K(u, VIRIAL_PAIR, nl, c)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


@pytest.mark.parametrize("pair", [ScalingPair(1, -1), ScalingPair(0, 1), ScalingPair(1, 0.5)])
def test_K_is_derivative_of_J_along_scaling(pair):
    rng = np.random.default_rng(7)
    c = 0.7
    for _ in range(5):
        terms = list(zip(rng.uniform(0.2, 1.2, 2), rng.uniform(0.5, 2.5, 2)))
        g = _profile(terms)
        nl = [FOCUS4, EXP][rng.integers(2)]

        def J_along(s):
            return static_energy_J(sample(GB, lambda r: math.exp(pair.alpha * s) * g(math.exp(-pair.beta * s) * r)), nl, c)

        eps = 1e-4
        fd = (J_along(eps) - J_along(-eps)) / (2 * eps)
        assert fd == pytest.approx(functional_K(sample(GB, g), pair, nl, c), rel=1e-6, abs=1e-9)


def test_free_energy_sandwich():
    s0 = free_energy_sandwich(ZERO, FOCUS4)
    assert (s0.J, s0.half_h1, s0.upper, s0.holds) == (0.0, 0.0, 0.0, True)
    small = free_energy_sandwich(gaussian(0.2), FOCUS4)
    assert small.holds
    d = free_energy_sandwich(gaussian(1.5), DEFOCUS4)
    assert d.J > d.half_h1


def test_state_invariants():
    with pytest.raises(InvalidArgument):
        EvolutionState("NLKG", gaussian(), None)
    with pytest.raises(InvalidArgument):
        EvolutionState("NLS", gaussian(), gaussian())
    with pytest.raises(InvalidArgument):
        EvolutionState.nlkg(gaussian(), sample(make_grid(5.0, 64, "gauss-bessel"), lambda r: r))
    with pytest.raises(InvalidArgument):
        EvolutionState("Schroedinger", gaussian())
    assert np.all(EvolutionState.nlkg(gaussian()).u_t.values == 0)


def test_functional_report_is_flat_json():
    rep = functional_report(gaussian(), FOCUS4)
    data = json.loads(rep.to_json())
    assert set(data) == {"mass", "energy", "j", "k_virial", "grad_sq", "g_integral"}
    assert all(math.isfinite(v) for v in data.values())
    assert data["k_virial"] == pytest.approx(8 * math.pi / 9, rel=1e-10)
