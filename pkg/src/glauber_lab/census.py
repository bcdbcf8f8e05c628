"""Isomorphism-class censuses of small graphs.

Two generators, both by augmentation plus canonical-form deduplication:

* :func:`graphs_on_vertices` adds one vertex at a time (every graph on ``n``
  vertices is a graph on ``n-1`` vertices plus a vertex joined to a subset).
* :func:`connected_graphs_with_edges` adds one edge at a time (every connected
  graph with ``e`` edges loses either a cycle edge or a pendant edge and stays
  connected).

Canonical forms come from colour refinement followed by a minimum over the
permutations that respect the refined colour classes.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations, product

from glauber_lab.graphs import Graph

CanonicalForm = tuple[int, tuple[tuple[int, int], ...]]


def _refined_colours(g: Graph) -> list[int]:
    colours = [len(a) for a in g.adjacency]
    while True:
        signatures = [
            (colours[v], tuple(sorted(colours[u] for u in g.adjacency[v]))) for v in range(g.n)
        ]
        ranks = {s: i for i, s in enumerate(sorted(set(signatures)))}
        new = [ranks[s] for s in signatures]
        if len(set(new)) == len(set(colours)):
            return new
        colours = new


def canonical_form(g: Graph) -> CanonicalForm:
    """Isomorphism invariant that separates non-isomorphic graphs."""
    colours = _refined_colours(g)
    cells: dict[int, list[int]] = {}
    for v, c in enumerate(colours):
        cells.setdefault(c, []).append(v)
    ordered_cells = [cells[c] for c in sorted(cells)]
    best = None
    for choice in product(*(permutations(cell) for cell in ordered_cells)):
        position = {}
        k = 0
        for block in choice:
            for v in block:
                position[v] = k
                k += 1
        relabelled = tuple(sorted(
            (min(position[u], position[v]), max(position[u], position[v])) for u, v in g.edges
        ))
        if best is None or relabelled < best:
            best = relabelled
    return g.n, best if best is not None else ()


def graph_from_canonical(form: CanonicalForm) -> Graph:
    return Graph.from_edges(form[0], form[1])


@lru_cache(maxsize=None)
def _graphs_on_vertices(n: int) -> tuple[CanonicalForm, ...]:
    if n == 0:
        return ((0, ()),)
    found: set[CanonicalForm] = set()
    for form in _graphs_on_vertices(n - 1):
        base = form[1]
        for subset in range(1 << (n - 1)):
            edges = list(base) + [(u, n - 1) for u in range(n - 1) if subset >> u & 1]
            found.add(canonical_form(Graph.from_edges(n, edges)))
    return tuple(sorted(found))


def graphs_on_vertices(n: int, connected: bool = False) -> list[Graph]:
    """One representative of every isomorphism class on ``n`` vertices."""
    out = [graph_from_canonical(f) for f in _graphs_on_vertices(n)]
    if connected:
        out = [g for g in out if g.is_connected()]
    return out


def connected_census(max_n: int) -> list[Graph]:
    """Every connected graph with ``1 <= n <= max_n`` vertices, up to isomorphism."""
    return [g for n in range(1, max_n + 1) for g in graphs_on_vertices(n, connected=True)]


@lru_cache(maxsize=None)
def _connected_with_edges(e: int) -> tuple[CanonicalForm, ...]:
    if e == 0:
        return ((1, ()),)
    found: set[CanonicalForm] = set()
    for form in _connected_with_edges(e - 1):
        g = graph_from_canonical(form)
        edges = list(g.edges)
        for u in range(g.n):
            found.add(canonical_form(Graph.from_edges(g.n + 1, edges + [(u, g.n)])))
            for v in range(u + 1, g.n):
                if not g.has_edge(u, v):
                    found.add(canonical_form(Graph.from_edges(g.n, edges + [(u, v)])))
    return tuple(sorted(found))


def connected_graphs_with_edges(e: int) -> list[Graph]:
    """Connected graphs with exactly ``e`` edges (and no isolated vertices when e > 0)."""
    return [graph_from_canonical(f) for f in _connected_with_edges(e)]


def _partitions(total: int, largest: int):
    if total == 0:
        yield ()
        return
    for part in range(min(total, largest), 0, -1):
        for rest in _partitions(total - part, part):
            yield (part,) + rest


def graphs_with_edges(e: int) -> list[Graph]:
    """Every graph with exactly ``e`` edges and no isolated vertices, up to isomorphism.

    Built as multisets of connected components whose edge counts partition ``e``.
    """
    out = []
    for parts in _partitions(e, e):
        pools = [connected_graphs_with_edges(p) for p in parts]
        for picks in product(*(range(len(p)) for p in pools)):
            # multiset: for equal parts require nondecreasing pick index
            if any(parts[i] == parts[i + 1] and picks[i] > picks[i + 1]
                   for i in range(len(parts) - 1)):
                continue
            edges = []
            offset = 0
            for pool, idx in zip(pools, picks):
                comp = pool[idx]
                edges += [(u + offset, v + offset) for u, v in comp.edges]
                offset += comp.n
            out.append(Graph.from_edges(offset, edges))
    return out
