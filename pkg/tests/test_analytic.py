import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import figure_sets
from reactive_rx import analytic, oracle
from reactive_rx.errors import DegenerateRoots, DomainError, ImaginaryLeak
from reactive_rx.harness import conservation_residual
from reactive_rx.params import baseline

SETS = [p for _, p in figure_sets() if not analytic.is_irreversible_nondegrading(p)]
IDS = [label for label, p in figure_sets() if not analytic.is_irreversible_nondegrading(p)]


def companion_roots(params):
    c2, c1, c0 = analytic.cubic_coefficients(params)
    comp = np.array([[-c2, -c1, -c0], [1, 0, 0], [0, 1, 0]], dtype=float)
    return np.linalg.eigvals(comp)


@pytest.mark.parametrize("params", SETS, ids=IDS)
def test_vieta_identities(params):
    r = analytic.solve_roots(params)
    al, be, ga = r.roots
    scale = math.sqrt(params.D_A) / params.a
    c2 = (1 + params.k_f / params.k_D) * scale
    assert abs(al + be + ga - c2) <= 1e-9 * c2
    pair = al * be + be * ga + ga * al
    assert abs(pair - (params.k_b - params.k_d)) <= 1e-9 * max(abs(params.k_b - params.k_d), c2 * c2)
    prod = al * be * ga
    c0 = params.k_b * scale - params.k_d * c2
    assert abs(prod - c0) <= 1e-9 * max(abs(c0), c2 ** 3)


@pytest.mark.parametrize("params", SETS, ids=IDS)
def test_roots_match_companion_eigenvalues(params):
    ours = sorted((-z for z in analytic.solve_roots(params).roots), key=lambda z: (z.real, z.imag))
    ref = sorted(companion_roots(params), key=lambda z: (z.real, z.imag))
    for x, y in zip(ours, ref):
        assert abs(x - y) <= 1e-8 * abs(y)


@pytest.mark.parametrize("params", SETS, ids=IDS)
def test_polished_roots_have_tiny_residual(params):
    c2, c1, c0 = analytic.cubic_coefficients(params)
    for root in analytic.solve_roots(params).roots:
        assert analytic.cubic_residual(-root, c2, c1, c0) <= 1e-12


@pytest.mark.parametrize("params", SETS, ids=IDS)
def test_complex_roots_come_in_conjugate_pairs(params):
    roots = analytic.solve_roots(params).roots
    for z in roots:
        if z.imag != 0:
            assert any(w == z.conjugate() for w in roots)


def test_irreversible_nondegrading_has_double_zero_root():
    p = baseline()
    with pytest.raises(DegenerateRoots) as info:
        analytic.solve_roots(p)
    roots = sorted(info.value.roots.roots, key=abs)
    assert abs(roots[0]) < 1e-6 and abs(roots[1]) < 1e-6
    assert roots[2].real == pytest.approx(analytic.cubic_coefficients(p)[0], rel=1e-12)


def test_synthetic_degenerate_triple():
    # k_f = k_b = 0: the cubic factors as (u + c2)(u^2 - k_d); k_d = c2^2 makes a double root
    p = baseline(k_f=0.0)
    p = p.replace(k_d=p.D_A / p.a ** 2)
    with pytest.raises(DegenerateRoots):
        analytic.solve_roots(p)
    triple = analytic.solve_roots(p, allow_degenerate=True)
    assert triple.degenerate
    with pytest.raises(DegenerateRoots):
        analytic.green_function(1.5e-6, 1e-5, p, roots=triple)


def test_degenerate_green_function_falls_back_to_oracle():
    p = baseline(k_f=0.0)
    p = p.replace(k_d=p.D_A / p.a ** 2)
    got = analytic.green_function(1.5e-6, 1e-5, p)
    ref = oracle.green_function_via_oracle(1.5e-6, 1e-5, p)
    assert got == pytest.approx(ref, rel=1e-12)


def test_residues_invariant_under_relabeling():
    p = baseline(k_b=4e3)
    r = analytic.solve_roots(p)
    t = 3e-5
    n = (p.r0 - p.a) / math.sqrt(4 * p.D_A * t)

    def pole_sum(roots):
        etas = analytic.residues(*roots)
        return sum(e * analytic.w_paper(n, z * math.sqrt(t)) for z, e in zip(roots, etas))

    ref = pole_sum(r.roots)
    for perm in ((1, 2, 0), (2, 0, 1), (1, 0, 2)):
        assert pole_sum(tuple(r.roots[i] for i in perm)) == pytest.approx(ref, rel=1e-12)


def test_green_function_vanishes_at_short_time_away_from_source():
    assert analytic.green_function(2e-6, 1e-12, baseline(k_b=2e3)) <= 1e-30


def test_green_function_matches_oracle():
    p = baseline(k_b=2e3)
    got = analytic.green_function(1.5e-6, 1e-5, p)
    ref = oracle.green_function_via_oracle(1.5e-6, 1e-5, p)
    assert got == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("r", [0.5e-6, 0.6e-6, 0.9e-6, 1.0e-6, 1.3e-6, 3e-6])
@pytest.mark.parametrize("t", [1e-6, 2e-5, 4e-4])
def test_green_function_matches_oracle_inside_and_outside(r, t):
    p = baseline(k_b=2e5, k_d=1e4)
    got = analytic.green_function(r, t, p)
    ref = oracle.green_function_via_oracle(r, t, p)
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-12 * abs(analytic.green_function(p.r0, t, p)))


def test_green_function_short_time_free_space():
    p = baseline(k_b=2e3)
    t = 1e-9
    free = 1.0 / (8 * math.pi * p.r0 * p.r0 * math.sqrt(math.pi * p.D_A * t))
    assert analytic.green_function(p.r0, t, p) == pytest.approx(free, rel=1e-6)


def test_green_function_rejects_bad_arguments():
    p = baseline(k_b=2e3)
    with pytest.raises(DomainError):
        analytic.green_function(0.4e-6, 1e-5, p)
    with pytest.raises(DomainError):
        analytic.green_function(1e-6, 0.0, p)


def test_corrupted_residues_leak_imaginary_part():
    p = baseline(k_b=4e3)
    r = analytic.solve_roots(p)
    bad = dataclasses.replace(r, eta1=r.eta1 * 1.1)
    complex_first = r.alpha.imag != 0
    assert complex_first
    with pytest.raises(ImaginaryLeak):
        analytic.green_function(1.5e-6, 1e-5, p, roots=bad)


def test_impulse_response_zero_without_forward_reaction():
    t = np.geomspace(1e-7, 1, 20)
    assert np.all(analytic.impulse_response(t, baseline(k_f=0.0, k_b=2e3)) == 0)


def test_irreversible_long_time_limit():
    p = baseline()
    limit = (p.a / p.r0) * p.k_f / (p.k_f + p.k_D)
    # the approach to the limit is O(1/sqrt(t)); at 1e12 s it is below 1e-8
    assert analytic.impulse_response(1e12, p) == pytest.approx(limit, rel=1e-6)


def test_impulse_response_equals_integrated_surface_flux():
    p = baseline(k_b=2e3)
    a, h = p.a, 1e-4 * p.a

    def flux(t):
        f0, f1, f2 = analytic.green_function(np.array([a, a + h, a + 2 * h]), t, p)
        return 4 * math.pi * a * a * p.D_A * (-3 * f0 + 4 * f1 - f2) / (2 * h)

    total, _ = integrate.quad(flux, 0.0, 1e-5, points=[1e-7, 1e-6], limit=200, epsrel=1e-8)
    assert total == pytest.approx(analytic.impulse_response(1e-5, p), rel=1e-3)


def test_expected_received_scaling():
    grid = np.geomspace(1e-6, 5e-4, 50)
    p = baseline(k_b=4e3)
    one = analytic.expected_received(grid, p)
    two = analytic.expected_received(grid, p.replace(N_A=2 * p.N_A))
    assert np.allclose(two.values, 2 * one.values, rtol=1e-15, atol=0)
    zero = analytic.expected_received(grid, p.replace(N_A=0))
    assert np.all(zero.values == 0)


def test_expected_received_asymptote():
    p = baseline()
    s = analytic.expected_received(np.array([1e12]), p)
    assert s.values[0] == pytest.approx(5000 * 0.5 * 3.14e-14 / (3.14e-14 + p.k_D), rel=1e-6)


def test_survival_probability():
    p = baseline(k_b=2e3)
    assert analytic.survival_probability(1e-5, p) == 1 - analytic.impulse_response(1e-5, p)
    assert analytic.survival_probability(1e-12, p) == pytest.approx(1.0, abs=1e-15)
    assert np.all(analytic.survival_probability(np.geomspace(1e-7, 1, 9), baseline(k_f=0.0)) == 1)


@pytest.mark.parametrize("kd", [0.0, 2e3, 4e4])
def test_irreversible_response_nondecreasing(kd):
    t = np.geomspace(1e-8, 1e-1, 400)
    v = analytic.impulse_response(t, baseline(k_d=kd))
    # on the late-time plateau successive values differ only by rounding
    assert np.all(np.diff(v) >= -1e-11 * v.max())


@pytest.mark.parametrize("t", [1e-6, 1e-5, 1e-4, 1e-3])
def test_conservation_without_degradation(t):
    assert conservation_residual(t, baseline(k_b=2e3)) <= 1e-4


def _total_mass(t, p):
    width = math.sqrt(4 * p.D_A * t)
    f = lambda r: 4 * math.pi * r * r * analytic.green_function(r, t, p)
    free = sum(integrate.quad(f, lo, hi, epsrel=1e-10, limit=400)[0]
               for lo, hi in ((p.a, p.r0), (p.r0, p.r0 + 14 * width)))
    return free + analytic.impulse_response(t, p)


def test_degradation_only_removes_mass():
    p = baseline(k_b=2e5, k_d=1e4)
    totals = [_total_mass(t, p) for t in (1e-6, 1e-5, 1e-4, 1e-3)]
    assert all(x <= 1 + 1e-9 for x in totals)
    assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))


@settings(max_examples=40, deadline=None)
@given(kb=st.floats(0, 1e6), kd=st.floats(0, 1e5), kf_ratio=st.floats(0.05, 20))
def test_random_parameters_bounded_and_real(kb, kd, kf_ratio):
    p = baseline(k_b=kb, k_d=kd)
    p = p.replace(k_f=kf_ratio * p.k_D)
    if analytic.is_irreversible_nondegrading(p):
        return
    try:
        roots = analytic.solve_roots(p)
    except DegenerateRoots:
        return
    c2 = (1 + p.k_f / p.k_D) * math.sqrt(p.D_A) / p.a
    assert abs(sum(roots.roots) - c2) <= 1e-9 * c2
    t = np.geomspace(1e-7, 1e-2, 30)
    v = analytic.impulse_response(t, p, roots)
    assert np.all((v >= 0) & (v <= 1))
    assert np.max(analytic.imaginary_leak(t, p, roots)) <= 1e-9
