import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from glauber_lab.census import connected_census, graphs_with_edges
from glauber_lab.errors import FeasibilityError, FormatError, ParameterError
from glauber_lab.graphs import Graph, line_graph, write_edge_list
from glauber_lab.models import (
    MATCHING,
    Pinning,
    apply_pinning,
    hardcore,
    lambda_critical,
    magnetize,
    monomer_dimer,
    parse_model_description,
    parse_number,
    pinning_reduction,
    potential_params,
)
from glauber_lab.oracle import enumerate_support, feasible_pinnings, marginal

from conftest import LAMBDAS, rationals, small_graphs


def test_lambda_critical_values():
    assert lambda_critical(2) == 4.0
    assert lambda_critical(3) == 1.6875
    assert lambda_critical(10) == pytest.approx(10**10 / 9**11, rel=1e-14)
    assert 0.3186 <= lambda_critical(10) < 0.3187
    grid = [lambda_critical(d) for d in range(2, 11)]
    assert all(a > b for a, b in zip(grid, grid[1:]))


def test_lambda_critical_rejects():
    with pytest.raises(ParameterError):
        lambda_critical(1)


@given(st.floats(1.01, 50), st.floats(0.01, 5))
def test_lambda_critical_decreasing(d, step):
    assert lambda_critical(d + step) < lambda_critical(d)


def test_hardcore_examples():
    t = enumerate_support(hardcore(Graph.empty(1), 1))
    assert t.exact_probabilities()[1] == Fraction(1, 2)
    t = enumerate_support(hardcore(Graph.complete(2), 1))
    assert t.Z == 3
    assert t.exact_probabilities()[0] == Fraction(1, 3)
    assert enumerate_support(hardcore(Graph.complete(3), 2)).Z == 7


@pytest.mark.parametrize("bad", [0, -1, float("nan"), float("inf"), True, "x"])
def test_hardcore_rejects_bad_activity(bad):
    with pytest.raises(ParameterError):
        hardcore(Graph.path(2), bad)


def test_per_vertex_activities():
    m = hardcore(Graph.path(2), {0: 2, 1: Fraction(1, 3)})
    assert m.activities == (2, Fraction(1, 3))
    with pytest.raises(ParameterError):
        hardcore(Graph.path(2), [1])


def test_monomer_dimer_examples():
    m = monomer_dimer(Graph.complete(2), 1)
    assert marginal(m, 0) == Fraction(1, 2)
    m = monomer_dimer(Graph.path(3), 1)
    t = enumerate_support(m)
    assert t.Z == 3
    assert sorted(t.masks.tolist()) == [0, 1, 2]
    assert m.labels == ((0, 1), (1, 2))
    empty = monomer_dimer(Graph.empty(3), 1)
    assert empty.n_sites == 0 and enumerate_support(empty).Z == 1


def test_monomer_dimer_edge_keyed_activities():
    m = monomer_dimer(Graph.path(3), {(0, 1): 2, (1, 2): 3})
    assert m.activities == (2, 3)


def test_matching_equals_line_graph_hardcore_up_to_7_edges():
    for e in range(8):
        for g in graphs_with_edges(e):
            for lam in (Fraction(1, 2), Fraction(2)):
                a = enumerate_support(monomer_dimer(g, lam))
                b = enumerate_support(hardcore(line_graph(g)[0], lam))
                assert a.masks.tolist() == b.masks.tolist()
                assert a.exact_probabilities() == b.exact_probabilities()


def test_apply_pinning_examples():
    k2 = hardcore(Graph.complete(2), 1)
    red, keep = pinning_reduction(k2, {0: 1})
    assert red.n_sites == 0 and keep == ()
    assert marginal(k2, 1, {0: 1}) == 0
    red = apply_pinning(k2, {0: -1})
    assert red.n_sites == 1 and marginal(red, 0) == Fraction(1, 2)
    p3 = hardcore(Graph.path(3), 1)
    red = apply_pinning(p3, {1: -1})
    assert red.site_graph.m == 0 and red.labels == (0, 2)
    t = enumerate_support(red)
    probs = dict(zip(t.masks.tolist(), t.exact_probabilities()))
    assert probs[3] == marginal(red, 0) * marginal(red, 1) == Fraction(1, 4)


def test_infeasible_pinning():
    with pytest.raises(FeasibilityError):
        apply_pinning(hardcore(Graph.complete(2), 1), {0: 1, 1: 1})
    with pytest.raises(ParameterError):
        apply_pinning(hardcore(Graph.complete(2), 1), {5: -1})
    with pytest.raises(ParameterError):
        Pinning({0: 0})


def test_matching_pinning_stays_matching():
    m = monomer_dimer(Graph.cycle(4), 1)
    red, keep = pinning_reduction(m, {0: 1})
    assert red.kind == MATCHING
    assert red.labels == tuple(m.labels[s] for s in keep)
    assert red.site_graph == line_graph(red.graph)[0]


def test_reduction_commutes_with_oracle_exhaustive():
    for g in connected_census(5):
        m = hardcore(g, Fraction(2))
        t = enumerate_support(m)
        pins, pluses = feasible_pinnings(t, max_pinned=g.n - 1)
        for pin, plus in zip(pins.tolist(), pluses.tolist()):
            p = {s: (1 if plus >> s & 1 else -1) for s in range(g.n) if pin >> s & 1}
            red, keep = pinning_reduction(m, p)
            for i, s in enumerate(keep):
                assert marginal(red, i) == marginal(m, s, p)


def test_magnetize_examples():
    m = hardcore(Graph.complete(2), 1)
    assert enumerate_support(magnetize(m, 1)).exact_probabilities() == enumerate_support(m).exact_probabilities()
    assert marginal(magnetize(hardcore(Graph.empty(1), 1), 3), 0) == Fraction(3, 4)
    mm = magnetize(m, {0: 2, 1: 1})
    assert enumerate_support(mm).Z == 4
    assert marginal(mm, 0) == Fraction(1, 2)
    with pytest.raises(ParameterError):
        magnetize(m, 0)


@given(small_graphs(max_n=6), rationals, rationals)
def test_constant_field_equals_scalar_change(g, lam, phi):
    a = enumerate_support(magnetize(hardcore(g, lam), phi)).exact_probabilities()
    b = enumerate_support(hardcore(g, lam * phi)).exact_probabilities()
    assert a == b


def test_potential_params_values():
    pp = potential_params(2)
    assert pp.chi == pytest.approx(1 / (1 - 0.5 * math.log(2)), abs=1e-12)
    assert pp.chi == pytest.approx(1.5303942, abs=1e-7)
    assert pp.a == pytest.approx(2.885390, abs=1e-6)
    assert 1 / pp.a + 1 / pp.chi == pytest.approx(1, abs=1e-12)
    # chi -> 1+ as d -> 1+; the value at 1.01 is 1/(1 - 0.005 ln 101)
    assert potential_params(1.01).chi == pytest.approx(1 / (1 - 0.005 * math.log(101)), rel=1e-12)
    near = [potential_params(1 + 10.0**-k).chi for k in range(1, 7)]
    assert all(1 < b < a for a, b in zip(near, near[1:]))
    assert near[-1] < 1 + 1e-4
    assert 1 < potential_params(10).chi < 2
    assert pp.kappa_estimate is None
    with pytest.raises(ParameterError):
        potential_params(1)


@given(st.floats(1.001, 1e4))
def test_chi_in_unit_interval(d):
    pp = potential_params(d)
    assert 1 < pp.chi < 2
    assert 1 / pp.a + 1 / pp.chi == pytest.approx(1, abs=1e-9)


def test_parse_number():
    assert parse_number("2") == 2 and isinstance(parse_number("2"), Fraction)
    assert parse_number("1/2") == Fraction(1, 2)
    assert parse_number("0.25") == 0.25 and isinstance(parse_number("0.25"), float)


def test_model_description(tmp_path):
    write_edge_list(Graph.path(3), tmp_path / "p3.edges")
    (tmp_path / "m.txt").write_text("graph = p3.edges\nkind = hardcore\nlambda = 1/2\n1 3\n")
    m = parse_model_description((tmp_path / "m.txt").read_text(), tmp_path)
    assert m.activities == (Fraction(1, 2), 3, Fraction(1, 2))
    (tmp_path / "md.txt").write_text("graph = p3.edges\nkind = matching\nlambda = 2\n")
    m = parse_model_description((tmp_path / "md.txt").read_text(), tmp_path)
    assert m.kind == MATCHING and m.activities == (2, 2)
    with pytest.raises(FormatError):
        parse_model_description("kind = hardcore\n", tmp_path)
    with pytest.raises(FormatError):
        parse_model_description("graph = p3.edges\nkind = potts\nlambda = 1\n", tmp_path)
