import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from glauber_lab.census import connected_census
from glauber_lab.dynamics import diagnose
from glauber_lab.errors import ParameterError, SizeCapError
from glauber_lab.graphs import Graph, generate_gnp
from glauber_lab.models import hardcore, lambda_critical, potential_params
from glauber_lab.oracle import enumerate_support, feasible_pinnings, influence_matrix, influence_stack
from glauber_lab.spectral import (
    certify_complete_si,
    certify_spectral_independence,
    estimate_kappa,
    si_gap_bound,
    si_phi,
    spectral_radii,
    spectral_radius,
    sssy_check,
    total_influence_report,
    weighted_inf_norm,
    weighted_inf_norms,
)

from conftest import small_graphs


def test_spectral_radius_examples():
    assert spectral_radius(np.zeros((3, 3))) == 0
    assert spectral_radius([[0, 0.5], [0.5, 0]]) == pytest.approx(0.5, rel=1e-10)
    K3 = np.abs(influence_matrix(hardcore(Graph.complete(3), 1)).entries)
    assert spectral_radius(K3) == pytest.approx(2 / 3, rel=1e-10)


def test_spectral_radius_errors():
    with pytest.raises(ParameterError):
        spectral_radius(np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        spectral_radius([[0, -1], [1, 0]])


def test_spectral_radius_reducible_and_periodic():
    # nilpotent upper-triangular part plus a 2-cycle block
    M = np.array([[0, 1, 5], [1, 0, 0], [0, 0, 0.5]])
    assert spectral_radius(M) == pytest.approx(1.0, rel=1e-10)
    assert spectral_radius(np.triu(np.ones((4, 4)), 1)) == 0


@given(st.integers(1, 15), st.integers(0, 10_000))
def test_spectral_radius_matches_eigvals(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.4)
    assert spectral_radius(M) == pytest.approx(float(np.abs(np.linalg.eigvals(M)).max()), rel=1e-8, abs=1e-12)


def test_weighted_norm_examples():
    chi = potential_params(2).chi
    I2 = influence_matrix(hardcore(Graph.complete(2), 1))
    assert weighted_inf_norm(I2, Graph.complete(2), chi) == 0.5
    assert weighted_inf_norm(np.zeros((3, 3)), Graph.path(3), chi) == 0
    I3 = influence_matrix(hardcore(Graph.complete(3), 1))
    for c in (1.2, chi, 1.9):
        assert weighted_inf_norm(I3, Graph.complete(3), c) == pytest.approx(2 / 3, rel=1e-14)
    with pytest.raises(ParameterError):
        weighted_inf_norm(np.zeros((2, 2)), Graph.path(3), chi)


@given(small_graphs(max_n=6), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([2, 3]))
def test_radius_below_weighted_norm_all_pinnings(g, lam, d):
    t = enumerate_support(hardcore(g, lam))
    pins, pluses = feasible_pinnings(t)
    stack = np.abs(influence_stack(t, pins, pluses))
    rho = spectral_radii(stack)
    norms = weighted_inf_norms(stack, g, potential_params(d).chi)
    assert np.all(rho <= norms + 1e-8)


@given(small_graphs(max_n=6), st.sampled_from([0.5, 1.0, 2.0]))
def test_frozen_rows_do_not_change_spectrum(g, lam):
    m = hardcore(g, lam)
    if g.n == 0:
        return
    I = influence_matrix(m, {0: 1})
    full = np.sort_complex(np.linalg.eigvals(I.absolute))
    pruned = np.sort_complex(np.linalg.eigvals(np.abs(I.pruned()))) if I.sites else np.zeros(0)
    nz_full = full[np.abs(full) > 1e-8]
    nz_pruned = pruned[np.abs(pruned) > 1e-8]
    assert np.allclose(nz_full, nz_pruned, atol=1e-8)


def test_entry_bound_exhaustive():
    for g in connected_census(6):
        for lam in (0.5, 1.0, 2.0):
            t = enumerate_support(hardcore(g, lam))
            pins, pluses = feasible_pinnings(t)
            stack = np.abs(influence_stack(t, pins, pluses))
            assert stack.max() <= lam / (1 + lam) + 1e-12


def test_si_certificates():
    cert = certify_spectral_independence(hardcore(Graph.empty(2), 1), 0.1)
    assert cert.eta_observed == 0 and cert.passed
    cert = certify_spectral_independence(hardcore(Graph.complete(2), 1), 0.5)
    assert cert.eta_observed == pytest.approx(0.5) and cert.pinnings == 1 and cert.passed
    cert = certify_spectral_independence(hardcore(Graph.complete(3), 1), 0.6)
    assert cert.eta_observed == pytest.approx(2 / 3) and not cert.passed
    record = json.loads(cert.to_json())
    assert record["eta_observed"] == pytest.approx(2 / 3)
    with pytest.raises(SizeCapError):
        certify_spectral_independence(hardcore(Graph.empty(11), 1), 1.0)


def test_complete_si():
    m = hardcore(Graph.complete(3), 1)
    plain = certify_spectral_independence(m, 1.0)
    comp = certify_complete_si(m, 1.0, 0.0, grid=[1.0])
    assert comp.eta_observed == pytest.approx(plain.eta_observed, abs=1e-12)
    assert certify_complete_si(hardcore(Graph.empty(1), 1), 0.0, 2.0).eta_observed == 0
    cert = certify_complete_si(hardcore(Graph.complete(2), 2), 1.0, 1.0)
    assert cert.eta_observed == pytest.approx(0.8, abs=1e-12)
    assert cert.argmax_fields == [2.0, 2.0]
    assert cert.fields_checked == 16 and cert.passed


def test_complete_si_sampled_grid_is_recorded():
    cert = certify_complete_si(hardcore(Graph.path(7), 1), 2.0, 1.0, max_vectors=64)
    assert cert.fields_checked == 64


def test_total_influence_report():
    rep = total_influence_report(Graph.empty(1), 0, 1.0, 2)
    assert rep.lhs == 0
    rep = total_influence_report(Graph.complete(2), 0, 1.0, 2)
    chi = potential_params(2).chi
    assert rep.lhs == pytest.approx(0.5)
    assert rep.alpha == pytest.approx(1.5)
    assert rep.deg_r == 1
    assert rep.ratio == pytest.approx(0.5 / 1.5 ** (1 / chi))
    with pytest.raises(ParameterError):
        total_influence_report(Graph.complete(2), 0, 4.0, 2)


def test_total_influence_ratio_bounded_across_seeds():
    lam = 0.9 * lambda_critical(2)
    ratios = []
    for seed in range(50):
        g = generate_gnp(50, 2, seed)
        r = max(range(g.n), key=g.degree)
        ratios.append(total_influence_report(g, r, lam, 2).ratio)
    ratios = np.array(ratios)
    assert ratios.min() > 0
    assert ratios.max() / ratios.min() < 20


def test_sssy_examples():
    rec = sssy_check(2, 1.0, 1, [0.0])
    assert rec.x_next == 1.0 and rec.lhs == 0
    est = estimate_kappa(2, 1.0)
    rec = sssy_check(2, 1.0, 1, [1.0])
    assert rec.x_next == 0.5
    assert rec.kappa <= est.kappa + 1e-12 and est.kappa < 0.5
    rec = sssy_check(3, 1.6, 3, [1.6] * 3)
    pp = potential_params(3)
    assert rec.lhs < (1 / 3) ** (pp.a / pp.chi)
    with pytest.raises(ParameterError):
        sssy_check(2, 4.0, 1, [1.0])
    with pytest.raises(ParameterError):
        sssy_check(2, 1.0, 2, [1.0])


def test_sssy_matches_potential_form():
    # Phi(y)^a sum (y / ((1 + x_i) Phi(x_i)))^a with Phi(x) = 1 / sqrt(x (x + 1))
    d, lam, x = 2, 3.0, np.array([0.3, 1.7, 2.5])
    a = potential_params(d).a
    y = lam / np.prod(1 + x)
    phi = lambda z: 1 / math.sqrt(z * (z + 1))
    ref = phi(y) ** a * sum((y / ((1 + xi) * phi(xi))) ** a for xi in x)
    assert sssy_check(d, lam, 3, x).lhs == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("d,lam,upper", [(2, 3.9, 0.5), (3, 1.6, 1 / 3), (2, 0.1, 0.2)])
def test_estimate_kappa_examples(d, lam, upper):
    est = estimate_kappa(d, lam, k_max=10)
    assert 0 < est.kappa < upper
    assert est.margin > 0


@given(st.integers(2, 6), st.floats(0.05, 0.99))
def test_kappa_below_inverse_d(d, frac):
    est = estimate_kappa(d, frac * lambda_critical(d), k_max=4, grid=24, restarts=2)
    assert est.kappa < 1 / d


def test_si_gap_bound_examples():
    assert si_gap_bound(2, 0, 0) == 0.5
    assert si_gap_bound(1, 0, 0) == 1
    with pytest.raises(ParameterError):
        si_gap_bound(3, 0.5, 1.0)


def test_si_gap_bound_below_exact_gap():
    m = hardcore(Graph.complete(3), 1)
    eta, phi = si_phi(m)
    assert eta == pytest.approx(2 / 3)
    assert phi == pytest.approx(0.5)
    assert si_gap_bound(3, eta, phi) <= diagnose(m).gap


def test_si_gap_bound_on_census():
    for g in connected_census(5):
        for lam in (0.5, 1.0):
            m = hardcore(g, lam)
            eta, phi = si_phi(m)
            if phi < 1:
                assert si_gap_bound(g.n, eta, phi) <= diagnose(m).gap + 1e-12
