"""Simple undirected graphs, G(n, d/n) sampling, line graphs and path counting.

Vertices are the integers ``0..n-1`` and that integer order is the total order
used everywhere else in the package (SAW-tree pinnings, tie-breaks).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from glauber_lab.errors import FormatError, ParameterError
from glauber_lab.rng import stream


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        if n < 0:
            raise ParameterError(f"vertex count must be nonnegative, got {n}")
        seen: set[tuple[int, int]] = set()
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise ParameterError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"edge ({u}, {v}) out of range for n={n}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ParameterError(f"duplicate edge {key}")
            seen.add(key)
        ordered = tuple(sorted(seen))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in ordered:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return cls(n, ordered, tuple(tuple(sorted(a)) for a in nbrs))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls.from_edges(n, ())

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls.from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls.from_edges(n, ((i, i + 1) for i in range(n - 1)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def star(cls, leaves: int) -> "Graph":
        return cls.from_edges(leaves + 1, ((0, i) for i in range(1, leaves + 1)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def neighbor_masks(self) -> list[int]:
        """Bitmask of each vertex's neighbourhood (bit ``u`` set for neighbour ``u``)."""
        masks = []
        for a in self.adjacency:
            mask = 0
            for u in a:
                mask |= 1 << u
            masks.append(mask)
        return masks

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def induced_subgraph(self, vertices: Sequence[int]) -> tuple["Graph", tuple[int, ...]]:
        """Subgraph induced by ``vertices``, relabelled ``0..k-1`` in the given order.

        Returns the subgraph and the tuple of original labels.
        """
        labels = tuple(vertices)
        index = {v: i for i, v in enumerate(labels)}
        edges = [(index[u], index[v]) for u, v in self.edges if u in index and v in index]
        return Graph.from_edges(len(labels), edges), labels

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, listed by smallest vertex."""
        seen = [False] * self.n
        out = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            queue = deque([s])
            while queue:
                x = queue.popleft()
                for y in self.adjacency[x]:
                    if not seen[y]:
                        seen[y] = True
                        comp.append(y)
                        queue.append(y)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1

    def to_dot(self, name: str = "G") -> str:
        lines = [f"graph {name} {{"]
        lines += [f"  {v};" for v in range(self.n)]
        lines += [f"  {u} -- {v};" for u, v in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Edge-list text format
# --------------------------------------------------------------------------


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    """Parse ``"n m"`` followed by ``m`` lines ``"u v"`` with ``0 <= u < v < n``."""
    if text and not text.endswith("\n"):
        raise FormatError("edge list must be newline-terminated")
    lines = text.split("\n")[:-1] if text else []
    if not lines:
        raise FormatError("missing header line 'n m'")

    def ints(line: str, lineno: int) -> tuple[int, int]:
        parts = line.split(" ")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise FormatError(f"line {lineno}: expected two decimal integers, got {line!r}")
        return int(parts[0]), int(parts[1])

    n, m = ints(lines[0], 1)
    if len(lines) - 1 != m:
        raise FormatError(f"header declares {m} edges but {len(lines) - 1} follow")
    edges = []
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        u, v = ints(line, i)
        if not u < v < n:
            raise FormatError(f"line {i}: need 0 <= u < v < n, got {u} {v}")
        if (u, v) in seen:
            raise FormatError(f"line {i}: duplicate edge {u} {v}")
        seen.add((u, v))
        edges.append((u, v))
    return Graph.from_edges(n, edges)


def write_edge_list(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_edge_list(g), encoding="ascii")


def read_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="ascii"))


# --------------------------------------------------------------------------
# Random graphs
# --------------------------------------------------------------------------


def _pair_from_index(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # pairs (w, v), w < v, enumerated v = 1..n-1, w = 0..v-1: k = v(v-1)/2 + w
    v = ((1.0 + np.sqrt(1.0 + 8.0 * k.astype(np.float64))) / 2.0).astype(np.int64)
    v -= (v * (v - 1) // 2) > k
    v += ((v + 1) * v // 2) <= k
    w = k - v * (v - 1) // 2
    return w, v


def generate_gnp(n: int, d: float, seed: int) -> Graph:
    """Sample G(n, p) with ``p = d/n`` by geometric skipping over the pair sequence."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not 0 <= d <= n:
        raise ParameterError(f"need 0 <= d <= n, got d={d}, n={n}")
    total = n * (n - 1) // 2
    p = d / n
    if p == 0.0 or total == 0:
        return Graph.empty(n)
    if p >= 1.0:
        return Graph.complete(n)
    rng = stream(seed, "gnp")
    batch = max(1024, int(1.2 * total * p) + 64)
    positions = []
    last = -1
    while True:
        skips = rng.geometric(p, size=batch)
        idx = last + np.cumsum(skips, dtype=np.int64)
        keep = idx[idx < total]
        positions.append(keep)
        if keep.size < idx.size:
            break
        last = int(idx[-1])
    k = np.concatenate(positions)
    w, v = _pair_from_index(k)
    return Graph.from_edges(n, zip(w.tolist(), v.tolist()))


# --------------------------------------------------------------------------
# Line graphs
# --------------------------------------------------------------------------


def line_graph(g: Graph) -> tuple[Graph, tuple[tuple[int, int], ...]]:
    """Line graph of ``g`` and the map line-vertex index -> edge of ``g``.

    Line vertex ``i`` is ``g.edges[i]``, so the map follows the sorted edge order.
    """
    incident: list[list[int]] = [[] for _ in range(g.n)]
    for i, (u, v) in enumerate(g.edges):
        incident[u].append(i)
        incident[v].append(i)
    pairs = set()
    for inc in incident:
        for a in range(len(inc)):
            for b in range(a + 1, len(inc)):
                pairs.add((inc[a], inc[b]))
    return Graph.from_edges(g.m, pairs), g.edges


# --------------------------------------------------------------------------
# Paths and branching values
# --------------------------------------------------------------------------


def count_simple_paths(g: Graph, v: int, l_max: int | None = None) -> list[int]:
    """``N[l]`` = number of simple paths with ``l+1`` vertices starting at ``v``.

    Exhaustive DFS; counts are Python integers. The list has length
    ``l_max + 1`` (default ``l_max = n``).
    """
    if l_max is None:
        l_max = g.n
    if l_max < 0:
        raise ParameterError("l_max must be >= 0")
    counts = [0] * (l_max + 1)
    counts[0] = 1
    adj = g.adjacency
    visited = [False] * g.n
    visited[v] = True
    # each frame: (vertex, depth, iterator position)
    stack = [(v, 0, 0)]
    while stack:
        x, depth, pos = stack.pop()
        nbrs = adj[x]
        if depth == l_max or pos == len(nbrs):
            visited[x] = depth == 0
            continue
        stack.append((x, depth, pos + 1))
        y = nbrs[pos]
        if not visited[y]:
            visited[y] = True
            counts[depth + 1] += 1
            stack.append((y, depth + 1, 0))
    return counts


@dataclass(frozen=True)
class BranchingReport:
    vertex: int
    d: float
    path_counts: tuple[int, ...]
    value: float
    truncated: bool


def _scaled(count: int, d: float, length: int) -> float:
    if count == 0:
        return 0.0
    return math.exp(math.log(count) - length * math.log(d))


def branching_value(g: Graph, v: int, d: float, l_max: int | None = None) -> BranchingReport:
    """d-branching value ``sum_l N[v,l] / d**l`` truncated at ``l_max`` (default n)."""
    if not d > 1:
        raise ParameterError(f"branching value needs d > 1, got {d}")
    counts = count_simple_paths(g, v, l_max)
    last = len(counts) - 1
    while last > 0 and counts[last] == 0:
        last -= 1
    truncated = counts[-1] > 0
    value = math.fsum(_scaled(c, d, i) for i, c in enumerate(counts))
    return BranchingReport(v, float(d), tuple(counts[: last + 1]), value, truncated)


def nonbacktracking_branching_bound(g: Graph, d: float, tol: float = 1e-13,
                                    max_iter: int = 200_000) -> np.ndarray | None:
    """Per-vertex upper bound on the d-branching value via non-backtracking walks.

    Every simple path is a non-backtracking walk, so with ``B`` the
    non-backtracking operator on directed edges and ``h`` the minimal solution
    of ``h = (1 + B h) / d``, the value ``1 + sum_{e out of v} h(e)`` bounds
    ``S_v`` from above.  The returned bound is certified: it is built from a
    vector ``h_up`` verified to satisfy ``(1 + B h_up) / d <= h_up``.
    Returns ``None`` when no certificate is found (the walk series diverges
    when the spectral radius of ``B`` is at least ``d``).
    """
    if not d > 1:
        raise ParameterError(f"need d > 1, got {d}")
    if g.m == 0:
        return np.ones(g.n)
    edges = np.array(g.edges, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    m = g.m
    rev = np.concatenate([np.arange(m, 2 * m), np.arange(0, m)])

    def step(h: np.ndarray) -> np.ndarray:
        out_sum = np.bincount(src, weights=h, minlength=g.n)
        return (1.0 + out_sum[dst] - h[rev]) / d

    h = np.zeros(2 * m)
    for _ in range(max_iter):
        new = step(h)
        growth = float(np.max(new - h))
        h = new
        if not np.isfinite(growth) or float(h.max()) > 1e12:
            return None
        if growth <= tol * max(1.0, float(h.max())):
            break
    else:
        return None
    h_up = h * (1.0 + 1e-6)
    if not np.all(step(h_up) <= h_up):
        return None
    return 1.0 + np.bincount(src, weights=h_up, minlength=g.n)


# --------------------------------------------------------------------------
# Block components and degree profiles
# --------------------------------------------------------------------------


def sample_block_component(g: Graph, ell: int, v: int,
                           seed: int | np.random.Generator) -> int:
    """Draw S uniformly from the ell-subsets of V; return |C_v| in g[S] (0 if v not in S)."""
    if not 1 <= ell <= g.n:
        raise ParameterError(f"need 1 <= ell <= n, got ell={ell}, n={g.n}")
    rng = stream(seed, "block-component")
    chosen = rng.choice(g.n, size=ell, replace=False)
    in_s = set(chosen.tolist())
    if v not in in_s:
        return 0
    seen = {v}
    queue = deque([v])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if y in in_s and y not in seen:
                seen.add(y)
                queue.append(y)
    return len(seen)


def max_degree_profile(g: Graph) -> tuple[int, list[int]]:
    """Maximum degree and histogram ``hist[k]`` = number of vertices of degree k."""
    degs = np.array(g.degrees(), dtype=np.int64)
    if degs.size == 0:
        return 0, [0]
    return int(degs.max()), np.bincount(degs).tolist()
