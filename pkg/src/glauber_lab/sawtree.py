"""Trees of self-avoiding walks with cycle-closing pinnings.

A node of ``T_SAW(r)`` is a walk ``r = w_0, ..., w_l``.  Either the walk is
self-avoiding, or it is self-avoiding up to ``w_{l-1}`` and ``w_l = w_j`` for
some ``j <= l - 3``; the latter nodes are leaves with a fixed spin.  The
closing leaf is pinned +1 iff ``w_{l-1} > w_{j+1}``, i.e. iff the walk comes
back to ``w_j`` through a larger neighbour than the one it left by.  With this
rule the root marginal ratio of the tree equals the graph marginal ratio.

``pin_rule="literal"`` instead pins -1 iff ``w_l > w_{l-1}``.  That variant
is kept as a fault-injection mode: it already gives the wrong root ratio on a
triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from glauber_lab.errors import ParameterError, TruncationError
from glauber_lab.graphs import Graph
from glauber_lab.oracle import INF_RATIO

PIN_RULES = ("edge-order", "literal")


@dataclass(frozen=True)
class SawTree:
    root_vertex: int
    vertex: tuple[int, ...]
    """Graph vertex copied by each node."""
    parent: tuple[int, ...]
    depth: tuple[int, ...]
    pinned: tuple[int, ...]
    """0 for free nodes, +1 or -1 for cycle-closing leaves."""
    children: tuple[tuple[int, ...], ...]
    pin_rule: str = "edge-order"

    root = 0

    def __len__(self) -> int:
        return len(self.vertex)

    @property
    def pinned_nodes(self) -> list[int]:
        return [z for z, s in enumerate(self.pinned) if s]

    def copies(self) -> dict[int, list[int]]:
        """``C_v``: node indices copying each graph vertex."""
        out: dict[int, list[int]] = {}
        for z, v in enumerate(self.vertex):
            out.setdefault(v, []).append(z)
        return out

    def depth_counts(self) -> list[int]:
        """Number of nodes at each depth (free and pinned)."""
        counts = [0] * (max(self.depth) + 1)
        for d in self.depth:
            counts[d] += 1
        return counts

    def to_dot(self, name: str = "T") -> str:
        lines = [f"digraph {name} {{"]
        for z, v in enumerate(self.vertex):
            pin = {1: " +", -1: " -"}.get(self.pinned[z], "")
            lines.append(f'  n{z} [label="{v}{pin}"];')
        for z, p in enumerate(self.parent):
            if p >= 0:
                lines.append(f"  n{p} -> n{z};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_saw_tree(g: Graph, r: int, depth_cap: int | None = None,
                   pin_rule: str = "edge-order") -> SawTree:
    if not 0 <= r < g.n:
        raise ParameterError(f"root {r} not a vertex of a graph with {g.n} vertices")
    if pin_rule not in PIN_RULES:
        raise ParameterError(f"unknown pin rule {pin_rule!r}")
    literal = pin_rule == "literal"
    adj = g.adjacency
    vertex, parent, depth, pinned = [r], [-1], [0], [0]
    children: list[list[int]] = [[]]
    pos = [-1] * g.n
    pos[r] = 0
    path = [r]
    stack = [(0, iter(adj[r]))]

    def add(v: int, par: int, pin: int) -> int:
        z = len(vertex)
        d = depth[par] + 1
        if depth_cap is not None and d > depth_cap:
            raise TruncationError(f"SAW tree from {r} exceeds depth cap {depth_cap}")
        vertex.append(v)
        parent.append(par)
        depth.append(d)
        pinned.append(pin)
        children.append([])
        children[par].append(z)
        return z

    while stack:
        z, it = stack[-1]
        end = path[-1]
        pred = path[-2] if len(path) > 1 else -1
        for u in it:
            if u == pred:
                continue
            j = pos[u]
            if j < 0:
                child = add(u, z, 0)
                pos[u] = len(path)
                path.append(u)
                stack.append((child, iter(adj[u])))
                break
            if literal:
                pin = -1 if u > end else 1
            else:
                pin = 1 if end > path[j + 1] else -1
            add(u, z, pin)
        else:
            stack.pop()
            pos[path.pop()] = -1

    return SawTree(r, tuple(vertex), tuple(parent), tuple(depth), tuple(pinned),
                   tuple(tuple(c) for c in children), pin_rule)


# --------------------------------------------------------------------------
# Ratio recursion and influences
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioTable:
    """Per-node subtree marginal ratio (``INF_RATIO`` for +1 leaves, 0 for -1 leaves).

    Exact tables hold ``gmpy2.mpq`` values, which compare equal to ``Fraction``.
    """

    ratios: tuple
    activities: tuple

    @property
    def root_ratio(self):
        return self.ratios[0]


def _node_activities(t: SawTree, activities) -> list:
    if isinstance(activities, (list, tuple)):
        return [activities[v] for v in t.vertex]
    return [activities] * len(t)


def tree_ratios(t: SawTree, activities) -> RatioTable:
    """``R_z = lambda_z * prod_children 1/(1 + R_c)``, evaluated bottom-up.

    A +1 child makes the product 0; a -1 child contributes 1.  Rational
    activities give exact ratios.
    """
    acts = _node_activities(t, activities)
    exact = all(isinstance(a, (int, Fraction)) for a in acts)
    one = mpq(1) if exact else 1.0
    R: list = [None] * len(t)
    for z in reversed(range(len(t))):
        pin = t.pinned[z]
        if pin == 1:
            R[z] = INF_RATIO
            continue
        if pin == -1:
            R[z] = 0 * one
            continue
        value = acts[z] * one
        for c in t.children[z]:
            rc = R[c]
            if rc is INF_RATIO:
                value = 0 * one
                break
            if rc:
                value = value / (1 + rc)
        R[z] = value
    return RatioTable(tuple(R), tuple(acts))


def tree_influence_row(t: SawTree, ratios: RatioTable) -> list:
    """Signed ``I_T(root, z)`` for every node ``z`` (1 at the root, 0 at pinned nodes).

    Along a tree edge ``x -> y`` the influence is ``-R_y / (1 + R_y)``, and
    influences multiply along the root path.
    """
    R = ratios.ratios
    one = R[0] * 0 + 1
    infl: list = [None] * len(t)
    infl[0] = one
    for z in range(1, len(t)):
        if t.pinned[z]:
            infl[z] = 0 * one
            continue
        ry = R[z]
        infl[z] = infl[t.parent[z]] * (-ry / (1 + ry))
    return infl


def _row_sums(t: SawTree, infl: Sequence, n: int, absolute: bool) -> list:
    zero = infl[0] * 0
    row = [zero] * n
    for z in range(1, len(t)):
        row[t.vertex[z]] += abs(infl[z]) if absolute else infl[z]
    row[t.root_vertex] = zero
    if isinstance(zero, type(mpq(0))):
        row = [Fraction(x) for x in row]
    return row


def graph_influence_row_via_tree(g: Graph, r: int, activities, depth_cap: int | None = None,
                                 pin_rule: str = "edge-order", absolute: bool = False) -> list:
    """``I_G(r, v) = sum over copies u of v of I_T(r, u)``, for every vertex ``v``.

    The entry for ``r`` itself is 0.  With ``absolute=True`` the copies are
    summed in absolute value, which upper-bounds ``|I_G(r, v)|``.
    """
    t = build_saw_tree(g, r, depth_cap, pin_rule)
    infl = tree_influence_row(t, tree_ratios(t, activities))
    return _row_sums(t, infl, g.n, absolute)


def influence_rows_via_tree(g: Graph, r: int, activities, depth_cap: int | None = None,
                            pin_rule: str = "edge-order"):
    """Root ratio, signed row and copy-absolute row from a single tree build."""
    t = build_saw_tree(g, r, depth_cap, pin_rule)
    ratios = tree_ratios(t, activities)
    infl = tree_influence_row(t, ratios)
    root = ratios.root_ratio
    if isinstance(root, type(mpq(0))):
        root = Fraction(root)
    return root, _row_sums(t, infl, g.n, False), _row_sums(t, infl, g.n, True)


def tree_path_counts(t: SawTree) -> list[int]:
    """``N^T_{r,l}``: number of nodes at depth ``l``."""
    return t.depth_counts()
