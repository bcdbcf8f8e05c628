from fractions import Fraction

import pytest
from hypothesis import given

from glauber_lab.errors import ParameterError, TruncationError
from glauber_lab.graphs import Graph, generate_gnp
from glauber_lab.models import hardcore
from glauber_lab.oracle import INF_RATIO, influence_matrix, marginal_ratio
from glauber_lab.sawtree import (
    build_saw_tree,
    graph_influence_row_via_tree,
    influence_rows_via_tree,
    tree_influence_row,
    tree_ratios,
)

from conftest import LAMBDAS, rationals, small_graphs


def test_k2_tree():
    t = build_saw_tree(Graph.complete(2), 0)
    assert t.vertex == (0, 1)
    assert t.pinned_nodes == []
    R = tree_ratios(t, Fraction(1))
    assert R.ratios == (Fraction(1, 2), 1)
    assert tree_influence_row(t, R)[1] == Fraction(-1, 2)


def test_k3_tree_structure_and_pins():
    t = build_saw_tree(Graph.complete(3), 0)
    assert len(t) == 7
    assert t.vertex == (0, 1, 2, 0, 2, 1, 0)
    assert t.depth == (0, 1, 2, 3, 1, 2, 3)
    pins = [t.pinned[z] for z in t.pinned_nodes]
    assert sorted(pins) == [-1, 1]
    assert all(not t.children[z] for z in t.pinned_nodes)


def test_k3_ratios_and_influences():
    t = build_saw_tree(Graph.complete(3), 0)
    R = tree_ratios(t, Fraction(1))
    assert R.root_ratio == Fraction(1, 3)
    infl = tree_influence_row(t, R)
    b_child = t.children[0][0]
    assert infl[b_child] == Fraction(-1, 2)
    b_copies = [z for z in range(len(t)) if t.vertex[z] == 1 and z != b_child]
    assert [infl[z] for z in b_copies] == [Fraction(1, 6)]
    assert all(infl[z] == 0 for z in t.pinned_nodes)
    row = graph_influence_row_via_tree(Graph.complete(3), 0, Fraction(1))
    assert row[1] == Fraction(-1, 3)


def test_four_cycle_pins_opposite():
    for r in range(4):
        t = build_saw_tree(Graph.cycle(4), r)
        pinned = t.pinned_nodes
        assert len(pinned) == 2
        assert all(t.depth[z] == 4 for z in pinned)
        assert sorted(t.pinned[z] for z in pinned) == [-1, 1]


def test_isolated_root():
    t = build_saw_tree(Graph.empty(1), 0)
    assert tree_ratios(t, Fraction(1)).root_ratio == 1


def test_path_influence_positive():
    row = graph_influence_row_via_tree(Graph.path(3), 0, Fraction(1))
    I = influence_matrix(hardcore(Graph.path(3), Fraction(1)))
    assert row[2] > 0
    assert row[2] == I.exact_entries[0, 2]


def test_pinned_plus_child_zeroes_parent():
    t = build_saw_tree(Graph.complete(3), 0)
    R = tree_ratios(t, Fraction(1))
    for z in t.pinned_nodes:
        if t.pinned[z] == 1:
            assert R.ratios[z] is INF_RATIO
            assert R.ratios[t.parent[z]] == 0


def test_literal_rule_fails_on_triangle():
    t = build_saw_tree(Graph.complete(3), 0, pin_rule="literal")
    assert sorted(t.pinned[z] for z in t.pinned_nodes) == [1, 1]
    assert tree_ratios(t, Fraction(1)).root_ratio == Fraction(1, 4)
    assert marginal_ratio(hardcore(Graph.complete(3), Fraction(1)), 0) == Fraction(1, 3)


def test_errors():
    with pytest.raises(ParameterError):
        build_saw_tree(Graph.path(3), 3)
    with pytest.raises(ParameterError):
        build_saw_tree(Graph.path(3), 0, pin_rule="other")
    with pytest.raises(TruncationError):
        build_saw_tree(Graph.path(5), 0, depth_cap=2)


def test_to_dot_marks_pins():
    dot = build_saw_tree(Graph.complete(3), 0).to_dot()
    assert '"0 +"' in dot and '"0 -"' in dot and "n0 -> n1" in dot


@given(small_graphs(max_n=7))
def test_copy_degree_identity(g):
    for r in range(g.n):
        t = build_saw_tree(g, r)
        for z in range(len(t)):
            if t.pinned[z]:
                assert not t.children[z]
                continue
            assert len(t.children[z]) + (z != 0) == g.degree(t.vertex[z])


@given(small_graphs(max_n=7), rationals)
def test_weitz_identity_and_signed_influences(g, lam):
    m = hardcore(g, lam)
    I = influence_matrix(m)
    for r in range(g.n):
        root, row, abs_row = influence_rows_via_tree(g, r, lam)
        assert root == marginal_ratio(m, r)
        for v in range(g.n):
            if v != r:
                assert row[v] == I.exact_entries[r, v]
                assert abs(I.exact_entries[r, v]) <= abs_row[v]


def test_float_mode_agrees():
    g = generate_gnp(8, 4, 3)
    for r in range(g.n):
        exact, _, _ = influence_rows_via_tree(g, r, Fraction(3, 2))
        approx, _, _ = influence_rows_via_tree(g, r, 1.5)
        assert abs(float(exact) - approx) <= 1e-12


def test_per_vertex_activities():
    g = Graph.cycle(5)
    acts = [Fraction(k + 1, 2) for k in range(5)]
    m = hardcore(g, acts)
    for r in range(5):
        root, _, _ = influence_rows_via_tree(g, r, acts)
        assert root == marginal_ratio(m, r)
