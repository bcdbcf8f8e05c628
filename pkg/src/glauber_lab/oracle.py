"""Exact computations by brute-force enumeration of the support.

Configurations are stored as integer bitmasks (bit ``i`` set iff site ``i`` is
+1) and listed in lexicographic order of the spin vector, site 0 first and
-1 before +1.

Two arithmetic modes share one code path.  In exact mode (all activities
``int``/``Fraction``) every activity is written as ``a_i / L`` over a common
denominator ``L`` and weights are stored as Python integers scaled by
``L**n``; ratios of weights are then exact ``Fraction`` values.  In float mode
weights are ``float64``.
"""

from __future__ import annotations

import builtins
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp

from glauber_lab.errors import FeasibilityError, ParameterError, SizeCapError
from glauber_lab.graphs import Graph
from glauber_lab.models import GibbsModel, Pinning, check_feasible

DEFAULT_SITE_CAP = 24


class InfiniteRatio:
    """Tagged value for a marginal ratio with zero denominator."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF_RATIO"

    def __reduce__(self):
        return (InfiniteRatio, ())


INF_RATIO = InfiniteRatio()


def is_infinite(x) -> bool:
    return x is INF_RATIO


# --------------------------------------------------------------------------
# Support tables
# --------------------------------------------------------------------------


class SupportTable:
    """All feasible configurations of a model with their weights.

    ``weights[i] / scale`` is the unnormalised weight of ``masks[i]``.
    """

    def __init__(self, n: int, masks: np.ndarray, weights: np.ndarray, scale: int | float):
        self.n = n
        self.masks = masks
        self.weights = weights
        self.scale = scale
        self._cache: dict = {}

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    def __len__(self) -> int:
        return len(self.masks)

    @property
    def total(self):
        """Sum of the stored (scaled) weights."""
        if "total" not in self._cache:
            self._cache["total"] = sum(self.weights.tolist()) if self.exact else float(self.weights.sum())
        return self._cache["total"]

    @property
    def Z(self):
        if self.exact:
            return Fraction(self.total, self.scale)
        return self.total

    @property
    def configurations(self) -> list[tuple[int, ...]]:
        return [tuple(1 if (x >> i) & 1 else -1 for i in range(self.n)) for x in self.masks.tolist()]

    def occupancy(self) -> np.ndarray:
        """Boolean matrix ``X[i, s]`` = site ``s`` occupied in configuration ``i``."""
        if "occ" not in self._cache:
            bits = np.arange(self.n, dtype=np.int64)
            self._cache["occ"] = ((self.masks[:, None] >> bits) & 1).astype(bool)
        return self._cache["occ"]

    def probabilities(self) -> np.ndarray:
        """Float probability vector (exact mode divides integers, correctly rounded)."""
        if "p" not in self._cache:
            if self.exact:
                t = self.total
                self._cache["p"] = np.array([w / t for w in self.weights.tolist()], dtype=float)
            else:
                self._cache["p"] = self.weights / self.total
        return self._cache["p"]

    def exact_probabilities(self) -> list[Fraction]:
        if not self.exact:
            raise ParameterError("exact probabilities need rational activities")
        t = self.total
        return [Fraction(w, t) for w in self.weights.tolist()]

    def mu_min(self):
        if self.exact:
            return Fraction(min(self.weights.tolist()), self.total)
        return float(self.probabilities().min())

    def index_of(self, mask: int) -> int:
        if "index" not in self._cache:
            self._cache["index"] = {x: i for i, x in builtins.enumerate(self.masks.tolist())}
        return self._cache["index"][mask]

    def consistent(self, p: Pinning | None) -> np.ndarray:
        """Boolean vector of configurations that agree with ``p``."""
        if not p:
            return np.ones(len(self), dtype=bool)
        pin = plus = 0
        for s, v in p.assignments.items():
            pin |= 1 << s
            if v == 1:
                plus |= 1 << s
        return (self.masks & pin) == plus

    def to_csv(self) -> str:
        lines = ["config,weight"]
        for x, w in zip(self.masks.tolist(), self.weights.tolist()):
            bits = "".join("1" if (x >> i) & 1 else "0" for i in range(self.n))
            weight = Fraction(w, self.scale) if self.exact else w
            lines.append(f"{bits},{weight}")
        return "\n".join(lines) + "\n"


def _common_denominator(acts) -> int:
    return reduce(math.lcm, (Fraction(a).denominator for a in acts), 1)


def _enumerate_sites(site_graph: Graph, activities, cap: int) -> SupportTable:
    n = site_graph.n
    if n > cap:
        raise SizeCapError(f"{n} sites exceed the enumeration cap {cap}")
    nbr = site_graph.neighbor_masks()
    exact = all(isinstance(a, (int, Fraction)) for a in activities)
    masks = np.zeros(1, dtype=np.int64)
    if exact:
        L = _common_denominator(activities)
        nums = [int(Fraction(a) * L) for a in activities]
        weights = np.array([1], dtype=object)
        scale = L**n
    else:
        weights = np.ones(1, dtype=float)
        scale = 1
    # prepend sites from last to first so the list stays lexicographic
    for i in reversed(range(n)):
        compat = (masks & nbr[i]) == 0
        masks = np.concatenate([masks, masks[compat] | (1 << i)])
        if exact:
            weights = np.concatenate([weights * L, weights[compat] * nums[i]])
        else:
            weights = np.concatenate([weights, weights[compat] * float(activities[i])])
    return SupportTable(n, masks, weights, scale)


@lru_cache(maxsize=256)
def _enumerate_cached(site_graph: Graph, activities: tuple, kinds: tuple, cap: int) -> SupportTable:
    return _enumerate_sites(site_graph, activities, cap)


def enumerate_support(m: GibbsModel, cap: int = DEFAULT_SITE_CAP) -> SupportTable:
    """Support table of ``m`` (independent sets of its site graph)."""
    # 1.0 == Fraction(1) hashes alike, so the activity types are part of the key
    kinds = tuple(type(a).__name__ for a in m.activities)
    return _enumerate_cached(m.site_graph, m.activities, kinds, cap)


enumerate = enumerate_support  # noqa: A001  public name; the builtin is used via ``builtins``


def enumerate_matchings(g: Graph, activities) -> tuple[list[int], list]:
    """Matchings of ``g`` by backtracking over edges, without the line graph.

    Returns edge bitmasks in the same lexicographic order as :func:`enumerate`
    together with their weights ``prod(activities[e])``.
    """
    acts = activities if isinstance(activities, (list, tuple)) else [activities] * g.m
    out_masks: list[int] = []
    out_weights: list = []

    def extend(e: int, used: set[int], mask: int, weight):
        if e == g.m:
            out_masks.append(mask)
            out_weights.append(weight)
            return
        extend(e + 1, used, mask, weight)
        u, v = g.edges[e]
        if u not in used and v not in used:
            extend(e + 1, used | {u, v}, mask | (1 << e), weight * acts[e])

    extend(0, set(), 0, 1)
    return out_masks, out_weights


# --------------------------------------------------------------------------
# Marginals and ratios
# --------------------------------------------------------------------------


def _ratio(num, den):
    if isinstance(num, int) and isinstance(den, int):
        return Fraction(num, den)
    return num / den


def _marginal_parts(m: GibbsModel, site: int, p):
    p = check_feasible(m, p)
    if not 0 <= site < m.n_sites:
        raise ParameterError(f"site {site} out of range")
    if site in p.assignments:
        raise ParameterError(f"site {site} is pinned")
    t = enumerate_support(m)
    cons = t.consistent(p)
    occ = t.occupancy()[:, site]
    w = t.weights
    if t.exact:
        plus = sum(w[cons & occ].tolist())
        total = sum(w[cons].tolist())
    else:
        plus = float(w[cons & occ].sum())
        total = float(w[cons].sum())
    if total == 0:
        raise FeasibilityError("pinning has empty support")
    return plus, total


def marginal(m: GibbsModel, site: int, p=None):
    """``mu_site(+1 | p)``: a ``Fraction`` in exact mode, else a float."""
    plus, total = _marginal_parts(m, site, p)
    return _ratio(plus, total)


def marginal_ratio(m: GibbsModel, site: int, p=None):
    """``mu_site(+1 | p) / mu_site(-1 | p)``, or :data:`INF_RATIO`."""
    plus, total = _marginal_parts(m, site, p)
    minus = total - plus
    if minus == 0:
        return INF_RATIO
    return _ratio(plus, minus)


# --------------------------------------------------------------------------
# Influence matrices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InfluenceMatrix:
    """Signed influence matrix over all sites of a model.

    ``entries[w, u] = mu_u(+ | w=+) - mu_u(+ | w=-)`` under the pinning; rows
    and columns of pinned or frozen sites are zero.  ``exact_entries`` holds
    the same values as ``Fraction`` objects when available.
    """

    sites: tuple[int, ...]
    entries: np.ndarray
    provenance: str = "oracle"
    exact_entries: np.ndarray | None = None

    @property
    def absolute(self) -> np.ndarray:
        return np.abs(self.entries)

    def pruned(self) -> np.ndarray:
        idx = np.array(self.sites, dtype=int)
        return self.entries[np.ix_(idx, idx)]


def _influence_from_joint(A, cvec, Zc, exact: bool, n: int):
    """Entries from joint occupation weights ``A[w, u]`` of the conditioned table."""
    if exact:
        out = np.empty((n, n), dtype=object)
        out[:, :] = Fraction(0)
        free = [w for w in range(n) if 0 < A[w][w] < Zc]
        for w in free:
            aw = A[w][w]
            for u in free:
                if u != w:
                    out[w, u] = Fraction(A[w][u], aw) - Fraction(cvec[u] - A[w][u], Zc - aw)
        return out, tuple(free)
    diag = np.diag(A)
    free_mask = (diag > 0) & (diag < Zc)
    with np.errstate(divide="ignore", invalid="ignore"):
        plus = A / diag[:, None]
        minus = (cvec[None, :] - A) / (Zc - diag)[:, None]
    out = np.where(free_mask[:, None] & free_mask[None, :], plus - minus, 0.0)
    np.fill_diagonal(out, 0.0)
    return out, tuple(np.flatnonzero(free_mask).tolist())


def influence_matrix(m: GibbsModel, p=None, exact: bool | None = None) -> InfluenceMatrix:
    """Signed oracle influence matrix of ``m`` under pinning ``p``.

    ``exact`` defaults to the model's arithmetic mode; ``exact=False`` on a
    rational model uses the float path.
    """
    p = check_feasible(m, p)
    t = enumerate_support(m)
    n = m.n_sites
    cons = t.consistent(p)
    X = t.occupancy()[cons]
    use_exact = t.exact if exact is None else (exact and t.exact)
    if use_exact:
        w = t.weights[cons]
        Xo = X.astype(np.int64).astype(object)
        A = (Xo.T @ (Xo * w[:, None])).tolist()
        cvec = [A[u][u] for u in range(n)]
        Zc = sum(w.tolist())
        exact_out, free = _influence_from_joint(A, cvec, Zc, True, n)
        floats = np.array([[float(x) for x in row] for row in exact_out], dtype=float).reshape(n, n)
        return InfluenceMatrix(free, floats, "oracle", exact_out)
    w = t.probabilities()[cons]
    Xf = X.astype(float)
    A = Xf.T @ (Xf * w[:, None])
    Zc = float(w.sum())
    out, free = _influence_from_joint(A, np.diag(A).copy(), Zc, False, n)
    return InfluenceMatrix(free, out, "oracle")


def feasible_pinnings(t: SupportTable, max_pinned: int | None = None,
                      min_pinned: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Every feasible pinning as ``(pin_masks, plus_masks)`` integer arrays.

    A pinning is a site set ``pin`` with a spin vector on it; it is feasible
    iff some support configuration restricts to it.  Ordered by site set
    (as an integer) and then by the restricted configuration.
    """
    limit = t.n if max_pinned is None else max_pinned
    pins, pluses = [], []
    for pin in range(1 << t.n):
        size = pin.bit_count()
        if size < min_pinned or size > limit:
            continue
        taus = np.unique(t.masks & pin)
        pins.append(np.full(len(taus), pin, dtype=np.int64))
        pluses.append(taus)
    if not pins:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(pins), np.concatenate(pluses)


def influence_stack(t: SupportTable, pin_masks: np.ndarray, plus_masks: np.ndarray,
                    weights: np.ndarray | None = None, chunk: int = 4096) -> np.ndarray:
    """Float signed influence matrices for many pinnings at once, shape ``(P, n, n)``.

    ``weights`` overrides the table weights (e.g. magnetised weights on the
    same support).  Sites are free under a pinning iff both spins occur in
    the conditioned support; other rows and columns are zero.
    """
    n = t.n
    X = t.occupancy().astype(float)
    w = t.probabilities() if weights is None else np.asarray(weights, dtype=float)
    XX = (X[:, :, None] * X[:, None, :]).reshape(len(t), n * n)
    out = np.zeros((len(pin_masks), n, n))
    for lo in range(0, len(pin_masks), chunk):
        pm = pin_masks[lo:lo + chunk, None]
        C = (t.masks[None, :] & pm) == plus_masks[lo:lo + chunk, None]
        Cf = C.astype(float)
        cnt_plus = Cf @ X
        cnt = Cf.sum(axis=1)
        free = (cnt_plus > 0) & (cnt_plus < cnt[:, None])
        Wc = Cf * w[None, :]
        A = (Wc @ XX).reshape(-1, n, n)
        Zc = Wc.sum(axis=1)
        diag = np.einsum("pii->pi", A)
        with np.errstate(divide="ignore", invalid="ignore"):
            plus = A / diag[:, :, None]
            minus = (diag[:, None, :] - A) / (Zc[:, None, None] - diag[:, :, None])
        both = free[:, :, None] & free[:, None, :]
        block = np.where(both, plus - minus, 0.0)
        idx = np.arange(n)
        block[:, idx, idx] = 0.0
        out[lo:lo + chunk] = block
    return out


# --------------------------------------------------------------------------
# Distances and entropy
# --------------------------------------------------------------------------


def tv_distance(p, q) -> float:
    p = np.asarray(p)
    q = np.asarray(q)
    if p.shape != q.shape:
        raise ParameterError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    if p.dtype == object or q.dtype == object:
        return sum(abs(a - b) for a, b in zip(p.tolist(), q.tolist())) / 2
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class FunctionalSample:
    """Nonnegative function on the support, indexed like its SupportTable."""

    values: np.ndarray

    @classmethod
    def from_mapping(cls, table: SupportTable, mapping) -> "FunctionalSample":
        vals = np.zeros(len(table))
        for i, v in mapping.items():
            vals[i] = v
        return cls(vals)


def _as_table(m) -> SupportTable:
    return m if isinstance(m, SupportTable) else enumerate_support(m)


def _as_values(f, size: int) -> np.ndarray:
    vals = f.values if isinstance(f, FunctionalSample) else f
    vals = np.asarray(vals, dtype=float)
    if vals.shape[0] != size:
        raise ParameterError(f"function has {vals.shape[0]} values, support has {size}")
    if np.any(vals < 0):
        raise ParameterError("entropy needs a nonnegative function")
    return vals


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def entropy_functional(m, f):
    """``Ent_mu(f) = mu(f log f) - mu(f) log mu(f)`` with ``0 log 0 = 0``.

    ``f`` may be one function (length ``|support|``) or a matrix whose columns
    are functions, in which case an array of entropies is returned.  Rounding
    noise below zero is clipped.
    """
    t = _as_table(m)
    vals = _as_values(f, len(t))
    p = t.probabilities()
    mean = p @ vals
    ent = p @ _xlogx(vals) - _xlogx(np.atleast_1d(mean)).reshape(np.shape(mean))
    ent = np.maximum(ent, 0.0)
    return float(ent) if np.ndim(ent) == 0 else ent


def _site_mask(S) -> int:
    mask = 0
    for s in S:
        mask |= 1 << s
    return mask


def _groups(t: SupportTable, S) -> tuple[np.ndarray, np.ndarray, sp.csr_matrix]:
    """Group configurations by their restriction to the complement of ``S``.

    Returns the distinct outside masks, the group index of each configuration
    and the 0/1 group-membership matrix (groups x configurations).
    """
    key = ("groups", _site_mask(S))
    if key not in t._cache:
        outside = t.masks & ~np.int64(key[1])
        keys, inverse = np.unique(outside, return_inverse=True)
        inverse = inverse.ravel()
        G = sp.csr_matrix((np.ones(len(inverse)), (inverse, np.arange(len(inverse)))),
                          shape=(len(keys), len(inverse)))
        t._cache[key] = (keys, inverse, G)
    return t._cache[key]


def conditional_entropy_average(m, f, S):
    """``mu(Ent_S(f))``: entropy of ``f`` over the sites ``S`` given the rest, averaged.

    Accepts one function or a matrix of functions (columns), like
    :func:`entropy_functional`.
    """
    t = _as_table(m)
    vals = _as_values(f, len(t))
    S = list(S)
    for s in S:
        if not 0 <= s < t.n:
            raise ParameterError(f"site {s} out of range")
    p = t.probabilities()
    _, _, G = _groups(t, S)
    pcol = p[:, None] if vals.ndim == 2 else p
    mass = G @ p
    fsum = G @ (pcol * vals)
    m_col = mass[:, None] if vals.ndim == 2 else mass
    ent = (pcol * _xlogx(vals)).sum(axis=0) - (m_col * _xlogx(fsum / m_col)).sum(axis=0)
    ent = np.maximum(ent, 0.0)
    return float(ent) if np.ndim(ent) == 0 else ent


def conditional_entropies(m, f, S):
    """Per-boundary entropies ``Ent^tau_S(f)`` keyed by the outside configuration.

    Returns ``(outside_masks, mass, ent)``: for each distinct configuration
    ``tau`` on the complement of ``S``, its probability and the entropy of
    ``f`` under ``mu(. | tau)`` (one column per function when ``f`` is a matrix).
    """
    t = _as_table(m)
    vals = _as_values(f, len(t))
    p = t.probabilities()
    keys, _, G = _groups(t, S)
    pcol = p[:, None] if vals.ndim == 2 else p
    mass = G @ p
    m_col = mass[:, None] if vals.ndim == 2 else mass
    fsum = G @ (pcol * vals)
    hsum = G @ (pcol * _xlogx(vals))
    ent = (hsum - _xlogx(fsum / m_col) * m_col) / m_col
    return keys, mass, np.maximum(ent, 0.0)
