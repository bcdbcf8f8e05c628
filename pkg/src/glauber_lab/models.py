"""Hard-core and monomer-dimer Gibbs models.

Every model carries a *site graph*: the graph itself for the hard-core model,
the line graph for matchings.  Downstream code (oracle, SAW trees, dynamics)
only ever sees "a hard-core model on the site graph with per-site
activities", which is exactly the monomer-dimer/line-graph correspondence.

Activities may be ``int``/``Fraction`` (exact mode) or ``float``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Mapping, Union

from glauber_lab.errors import FeasibilityError, ParameterError
from glauber_lab.graphs import Graph, line_graph

Number = Union[int, float, Fraction]

HARDCORE = "hardcore"
MATCHING = "matching"


@dataclass(frozen=True)
class GibbsModel:
    kind: str
    graph: Graph
    activities: tuple[Number, ...]
    site_graph: Graph = field(repr=False)
    labels: tuple = field(default=(), repr=False)
    """Original identity of each site (vertex id, or edge tuple for matchings)."""

    @property
    def n_sites(self) -> int:
        return self.site_graph.n

    @property
    def exact(self) -> bool:
        return all(isinstance(a, (int, Fraction)) for a in self.activities)

    @property
    def max_activity(self) -> Number:
        return max(self.activities, default=0)

    def activity(self, site: int) -> Number:
        return self.activities[site]

    def site_of(self, label) -> int:
        return self.labels.index(label)


def _check_activity(value) -> Number:
    if not isinstance(value, Real) or isinstance(value, bool):
        raise ParameterError(f"activity must be a real number, got {value!r}")
    if not value > 0 or (isinstance(value, float) and not math.isfinite(value)):
        raise ParameterError(f"activities must be finite and > 0, got {value!r}")
    if isinstance(value, (int, Fraction, float)):
        return value
    return float(value)


def _activity_vector(n: int, activities) -> tuple[Number, ...]:
    if isinstance(activities, Mapping):
        missing = [s for s in range(n) if s not in activities]
        if missing:
            raise ParameterError(f"missing activities for sites {missing}")
        return tuple(_check_activity(activities[s]) for s in range(n))
    if isinstance(activities, (list, tuple)):
        if len(activities) != n:
            raise ParameterError(f"expected {n} activities, got {len(activities)}")
        return tuple(_check_activity(a) for a in activities)
    value = _check_activity(activities)
    return (value,) * n


def hardcore(g: Graph, activities) -> GibbsModel:
    """Hard-core model on ``g``: scalar fugacity or per-vertex map/sequence."""
    acts = _activity_vector(g.n, activities)
    return GibbsModel(HARDCORE, g, acts, g, tuple(range(g.n)))


def monomer_dimer(g: Graph, activities) -> GibbsModel:
    """Monomer-dimer model on ``g`` (edge weights); sites are ``g.edges`` in order."""
    lg, edge_map = line_graph(g)
    if isinstance(activities, Mapping) and activities and isinstance(next(iter(activities)), tuple):
        activities = {i: activities[e] for i, e in enumerate(edge_map)}
    acts = _activity_vector(g.m, activities)
    return GibbsModel(MATCHING, g, acts, lg, edge_map)


# --------------------------------------------------------------------------
# Pinnings
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Pinning:
    """Fixed spins on a subset of sites: ``assignments[site] in {+1, -1}``."""

    assignments: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for site, spin in self.assignments.items():
            if spin not in (1, -1):
                raise ParameterError(f"spin at site {site} must be +1 or -1, got {spin}")

    @property
    def sites(self) -> frozenset[int]:
        return frozenset(self.assignments)

    def occupied(self) -> list[int]:
        return sorted(s for s, v in self.assignments.items() if v == 1)

    def is_feasible(self, m: GibbsModel) -> bool:
        occ = set(self.occupied())
        adj = m.site_graph.adjacency
        return all(s < m.n_sites for s in self.assignments) and not any(
            u in occ for s in occ for u in adj[s]
        )

    def restrict(self, sites) -> "Pinning":
        keep = set(sites)
        return Pinning({s: v for s, v in self.assignments.items() if s in keep})

    def __len__(self) -> int:
        return len(self.assignments)


def _as_pinning(p) -> Pinning:
    if p is None:
        return Pinning({})
    if isinstance(p, Pinning):
        return p
    return Pinning(dict(p))


def check_feasible(m: GibbsModel, p) -> Pinning:
    p = _as_pinning(p)
    for s in p.assignments:
        if not 0 <= s < m.n_sites:
            raise ParameterError(f"pinned site {s} out of range")
    if not p.is_feasible(m):
        raise FeasibilityError("pinning places +1 on two adjacent sites")
    return p


def pinning_reduction(m: GibbsModel, p) -> tuple[GibbsModel, tuple[int, ...]]:
    """Reduced model for ``p`` together with the surviving site indices of ``m``.

    Pinned sites are removed; neighbours of occupied pinned sites are removed
    too (they are forced to -1).  Survivors keep their relative order and the
    reduced model's ``labels`` carry the original labels.
    """
    p = check_feasible(m, p)
    removed = set(p.assignments)
    for s in p.occupied():
        removed.update(m.site_graph.adjacency[s])
    keep = tuple(s for s in range(m.n_sites) if s not in removed)
    acts = tuple(m.activities[s] for s in keep)
    labels = tuple(m.labels[s] for s in keep)
    if m.kind == MATCHING:
        sub = Graph.from_edges(m.graph.n, [m.graph.edges[s] for s in keep])
        lg, _ = line_graph(sub)
        return GibbsModel(MATCHING, sub, acts, lg, labels), keep
    sub, _ = m.site_graph.induced_subgraph(keep)
    return GibbsModel(HARDCORE, sub, acts, sub, labels), keep


def apply_pinning(m: GibbsModel, p) -> GibbsModel:
    """Condition on ``p`` by deleting sites (see :func:`pinning_reduction`)."""
    return pinning_reduction(m, p)[0]


def magnetize(m: GibbsModel, fields) -> GibbsModel:
    """Multiply the activity of every site by its field value (all fields > 0)."""
    phis = _activity_vector(m.n_sites, fields)
    acts = tuple(a * f for a, f in zip(m.activities, phis))
    return GibbsModel(m.kind, m.graph, acts, m.site_graph, m.labels)


# --------------------------------------------------------------------------
# Scalar formulas
# --------------------------------------------------------------------------


def lambda_critical(d: float) -> float:
    """Tree-uniqueness threshold ``d**d / (d-1)**(d+1)``."""
    if not d > 1:
        raise ParameterError(f"lambda_critical needs d > 1, got {d}")
    try:
        return d**d / (d - 1) ** (d + 1)
    except OverflowError:
        return math.exp(d * math.log(d) - (d + 1) * math.log(d - 1))


@dataclass(frozen=True)
class PotentialParams:
    d: float
    chi: float
    a: float
    kappa_estimate: float | None = None


def potential_params(d: float) -> PotentialParams:
    """Exponents of the contraction potential for branching parameter ``d``."""
    if not d > 1:
        raise ParameterError(f"potential parameters need d > 1, got {d}")
    chi = 1.0 / (1.0 - (d - 1) / 2.0 * math.log1p(1.0 / (d - 1)))
    return PotentialParams(float(d), chi, chi / (chi - 1.0))


# --------------------------------------------------------------------------
# Model description files
# --------------------------------------------------------------------------


def parse_model_description(text: str, base_dir=None) -> GibbsModel:
    """Build a model from a description file.

    Format: ``key = value`` lines with keys ``graph`` (edge-list path,
    relative to ``base_dir``), ``kind`` (``hardcore`` or ``matching``) and
    optionally ``lambda``; plus any number of ``site value`` lines giving a
    per-site activity table (sites are vertex ids, or edge indices in sorted
    edge order for matchings).  ``#`` starts a comment.
    """
    from pathlib import Path

    from glauber_lab.errors import FormatError
    from glauber_lab.graphs import read_edge_list

    keys: dict[str, str] = {}
    table: dict[int, Number] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            k, v = (x.strip() for x in line.split("=", 1))
            keys[k] = v
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected 'key = value' or 'site value'")
        try:
            table[int(parts[0])] = parse_number(parts[1])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    if "graph" not in keys:
        raise FormatError("model description needs a 'graph = <path>' line")
    kind = keys.get("kind", HARDCORE)
    if kind not in (HARDCORE, MATCHING):
        raise FormatError(f"unknown model kind {kind!r}")
    path = Path(keys["graph"])
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    g = read_edge_list(path)
    n_sites = g.n if kind == HARDCORE else g.m
    if table:
        if "lambda" in keys:
            default = parse_number(keys["lambda"])
            acts = {s: table.get(s, default) for s in range(n_sites)}
        else:
            acts = table
    elif "lambda" in keys:
        acts = parse_number(keys["lambda"])
    else:
        raise FormatError("model description needs 'lambda' or an activity table")
    return hardcore(g, acts) if kind == HARDCORE else monomer_dimer(g, acts)


def parse_number(text: str) -> Number:
    """Parse ``"2"``, ``"1/2"`` exactly and anything else as a float."""
    text = text.strip()
    try:
        return Fraction(text) if "." not in text and "e" not in text.lower() else float(text)
    except (ValueError, ZeroDivisionError):
        return float(text)
