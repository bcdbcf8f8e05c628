"""Spectral independence: spectral radii, weighted norms and certificates.

Also the potential-function contraction used to bound influences on trees
(``sssy_check`` / ``estimate_kappa``) and the spectral-gap lower bound that
spectral independence implies.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np
from scipy.sparse.csgraph import connected_components

from glauber_lab.errors import ConvergenceError, ParameterError, SizeCapError
from glauber_lab.graphs import Graph, branching_value
from glauber_lab.models import GibbsModel, lambda_critical, potential_params
from glauber_lab.oracle import (
    InfluenceMatrix,
    enumerate_support,
    feasible_pinnings,
    influence_stack,
)
from glauber_lab.rng import stream
from glauber_lab.sawtree import influence_rows_via_tree

__all__ = [
    "InfluenceMatrix",
    "SICertificate",
    "spectral_radius",
    "spectral_radii",
    "weighted_inf_norm",
    "weighted_inf_norms",
    "certify_spectral_independence",
    "certify_complete_si",
    "total_influence_report",
    "sssy_check",
    "estimate_kappa",
    "si_gap_bound",
    "si_phi",
]

DEFAULT_SI_SITE_CAP = 10
POWER_ITER_CAP = 10_000


# --------------------------------------------------------------------------
# Spectral radius and norms
# --------------------------------------------------------------------------


def _perron_block(B: np.ndarray, rtol: float) -> float:
    """Perron root of an irreducible nonnegative block.

    Power iteration on ``B + I`` (primitive, so it converges) with the
    Collatz-Wielandt bracket ``min (Bx)_i/x_i <= rho <= max (Bx)_i/x_i``.
    """
    shifted = B + np.eye(len(B))
    x = np.ones(len(B))
    for _ in range(POWER_ITER_CAP):
        y = B @ x
        q = y / x
        lo, hi = q.min(), q.max()
        if hi - lo <= rtol * max(hi, 1e-300):
            return float(0.5 * (lo + hi))
        x = shifted @ x
        x /= x.max()
    raise ConvergenceError(f"power iteration did not converge in {POWER_ITER_CAP} steps")


def spectral_radius(M, rtol: float = 1e-10, cross_check: bool = True) -> float:
    """Perron root of a nonnegative square matrix.

    Computed per strongly connected block.  Matrices up to 12x12 are
    cross-checked against the largest root of the characteristic polynomial
    (via ``eigvals``).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"spectral radius needs a square matrix, got shape {M.shape}")
    if np.any(M < 0):
        raise ParameterError("spectral radius here is for nonnegative matrices")
    n = len(M)
    if n == 0 or not M.any():
        return 0.0
    k, labels = connected_components(M > 0, directed=True, connection="strong")
    rho = 0.0
    for b in range(k):
        idx = np.flatnonzero(labels == b)
        B = M[np.ix_(idx, idx)]
        if B.any():
            rho = max(rho, _perron_block(B, rtol))
    if cross_check and n <= 12:
        ref = float(np.abs(np.linalg.eigvals(M)).max())
        if abs(ref - rho) > 1e-8 * max(1.0, ref):
            raise ConvergenceError(f"power iteration {rho} disagrees with eigensolver {ref}")
    return rho


def spectral_radii(stack: np.ndarray) -> np.ndarray:
    """Spectral radii of a stack of nonnegative matrices ``(P, n, n)`` via eigvals."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] == 0 or stack.shape[-1] == 0:
        return np.zeros(stack.shape[0])
    return np.abs(np.linalg.eigvals(stack)).max(axis=-1)


def _degree_scaling(g: Graph, chi: float) -> np.ndarray:
    deg = np.array(g.degrees(), dtype=float)
    return np.where(deg >= 1, deg ** (1.0 / chi), 1.0)


def weighted_inf_norm(M, g: Graph, chi: float) -> float:
    """``||D^-1 |M| D||_inf`` with ``D = diag(deg(v) ** (1/chi))``."""
    entries = M.entries if isinstance(M, InfluenceMatrix) else np.asarray(M, dtype=float)
    if entries.shape != (g.n, g.n):
        raise ParameterError(f"matrix shape {entries.shape} does not match {g.n} sites")
    if not 1 < chi < 2:
        raise ParameterError(f"chi must lie in (1, 2), got {chi}")
    D = _degree_scaling(g, chi)
    if g.n == 0:
        return 0.0
    return float((np.abs(entries) * D[None, :] / D[:, None]).sum(axis=1).max())


def weighted_inf_norms(stack: np.ndarray, g: Graph, chi: float) -> np.ndarray:
    D = _degree_scaling(g, chi)
    if g.n == 0:
        return np.zeros(len(stack))
    return (np.abs(stack) * D[None, None, :] / D[None, :, None]).sum(axis=2).max(axis=1)


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------


@dataclass
class SICertificate:
    model: str
    eta: float
    eta_observed: float
    pinnings: int
    field_grid: list = field(default_factory=list)
    fields_checked: int = 1
    argmax_fields: list | None = None
    passed: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def describe_model(m: GibbsModel) -> str:
    acts = sorted(set(str(a) for a in m.activities))
    lam = acts[0] if len(acts) == 1 else "[" + ",".join(str(a) for a in m.activities) + "]"
    return f"{m.kind}(n={m.graph.n},m={m.graph.m},lambda={lam})"


def _si_stack(m: GibbsModel, max_sites: int):
    if m.n_sites > max_sites:
        raise SizeCapError(f"{m.n_sites} sites exceed the SI enumeration cap {max_sites}")
    t = enumerate_support(m)
    pins, pluses = feasible_pinnings(t, max_pinned=max(m.n_sites - 2, -1))
    return t, pins, pluses


def max_influence_radius(m: GibbsModel, max_sites: int = DEFAULT_SI_SITE_CAP,
                         weights=None) -> tuple[float, int]:
    """Max of ``rho(|I|)`` over pinnings leaving at least two free sites, and the pinning count."""
    t, pins, pluses = _si_stack(m, max_sites)
    if len(pins) == 0:
        return 0.0, 0
    stack = np.abs(influence_stack(t, pins, pluses, weights))
    return float(spectral_radii(stack).max()), len(pins)


def certify_spectral_independence(m: GibbsModel, eta: float,
                                  max_sites: int = DEFAULT_SI_SITE_CAP) -> SICertificate:
    rho, count = max_influence_radius(m, max_sites)
    return SICertificate(describe_model(m), eta, rho, count, [1], 1, None, rho <= eta)


def certify_complete_si(m: GibbsModel, eta: float, xi: float, grid=None,
                        max_sites: int = DEFAULT_SI_SITE_CAP, max_vectors: int = 4096,
                        seed: int = 0) -> SICertificate:
    """SI of every magnetisation with per-site fields drawn from ``grid``.

    Default grid ``{0.1, 0.5, 1, 1 + xi}`` (values above ``1 + xi`` dropped).
    All field vectors are checked when there are at most ``max_vectors`` of
    them; otherwise the constant vectors plus a seeded uniform sample of the
    product grid, and the certificate records how many were checked.
    """
    if xi < 0:
        raise ParameterError(f"xi must be nonnegative, got {xi}")
    if grid is None:
        grid = [0.1, 0.5, 1.0, 1.0 + xi]
    grid = sorted({float(x) for x in grid if 0 < x <= 1 + xi + 1e-15})
    if not grid:
        raise ParameterError("field grid has no values in (0, 1 + xi]")
    t, pins, pluses = _si_stack(m, max_sites)
    n = m.n_sites
    if n == 0 or len(pins) == 0:
        return SICertificate(describe_model(m), eta, 0.0, 0, grid, 1, None, True)
    if len(grid) ** n <= max_vectors:
        vectors = [np.array(v) for v in product(grid, repeat=n)]
    else:
        rng = stream(seed, "complete-si-fields")
        vectors = [np.full(n, x) for x in grid]
        vectors += [rng.choice(grid, size=n) for _ in range(max_vectors - len(grid))]
    X = t.occupancy()
    base = t.probabilities()
    best, arg = -1.0, None
    for phi in vectors:
        w = base * np.exp(X @ np.log(phi))
        stack = np.abs(influence_stack(t, pins, pluses, w / w.sum()))
        rho = float(spectral_radii(stack).max())
        if rho > best:
            best, arg = rho, phi.tolist()
    return SICertificate(describe_model(m), eta, best, len(pins), grid, len(vectors), arg,
                         best <= eta)


def si_phi(m: GibbsModel, max_sites: int = DEFAULT_SI_SITE_CAP) -> tuple[float, float]:
    """``(eta, phi)`` with ``phi = max_k rho_k / (n - k - 1)``.

    ``rho_k`` is the largest ``rho(|I|)`` over pinnings of ``k`` sites,
    ``0 <= k <= n - 2``.
    """
    t, pins, pluses = _si_stack(m, max_sites)
    if len(pins) == 0:
        return 0.0, 0.0
    radii = spectral_radii(np.abs(influence_stack(t, pins, pluses)))
    sizes = np.array([int(p).bit_count() for p in pins])
    n = m.n_sites
    phi = float(max(radii[sizes == k].max() / (n - k - 1) for k in np.unique(sizes)))
    return float(radii.max()), phi


def si_gap_bound(n: int, eta: float, phi: float) -> float:
    """Spectral-gap lower bound ``(1 - phi)^(2 + 2 eta) / n^(1 + 2 eta)``."""
    if not 0 <= phi < 1:
        raise ParameterError(f"phi must lie in [0, 1), got {phi}")
    if eta < 0:
        raise ParameterError(f"eta must be nonnegative, got {eta}")
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return (1.0 - phi) ** (2 + 2 * eta) / n ** (1 + 2 * eta)


# --------------------------------------------------------------------------
# Total influence on graphs with unbounded degrees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TotalInfluenceReport:
    root: int
    lhs: float
    """sum_u |I_G(r,u)| deg(u)^(1/chi)"""
    lhs_tree: float
    """same sum with |I_G| replaced by the copy-wise absolute tree sums"""
    alpha: float
    deg_r: int
    ratio: float
    chi: float


def total_influence_report(g: Graph, r: int, activities, d: float,
                           l_max: int | None = None) -> TotalInfluenceReport:
    acts = activities if isinstance(activities, (list, tuple)) else [activities] * g.n
    lam_max = max((float(a) for a in acts), default=0.0)
    if lam_max >= lambda_critical(d):
        raise ParameterError(f"activity {lam_max} is not below lambda_c({d})")
    chi = potential_params(d).chi
    deg = np.array(g.degrees(), dtype=float)
    alpha = branching_value(g, r, d, l_max).value
    if g.degree(r) == 0:
        return TotalInfluenceReport(r, 0.0, 0.0, alpha, 0, 0.0, chi)
    facts = [float(a) for a in acts]
    _, row, abs_row = influence_rows_via_tree(g, r, facts)
    scale = deg ** (1.0 / chi)
    lhs = float(np.abs(np.array(row, dtype=float)) @ scale)
    lhs_tree = float(np.array(abs_row, dtype=float) @ scale)
    ratio = lhs / (alpha * g.degree(r)) ** (1.0 / chi)
    return TotalInfluenceReport(r, lhs, lhs_tree, alpha, g.degree(r), ratio, chi)


# --------------------------------------------------------------------------
# Potential-function contraction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SSSYRecord:
    lhs: float
    x_next: float
    kappa: float
    """``lhs ** (chi / a)``, the contraction rate this point certifies."""


def _check_subcritical(d: float, lam: float) -> None:
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if lam >= lambda_critical(d):
        raise ParameterError(f"lambda={lam} is not below lambda_c({d})={lambda_critical(d)}")


def _sssy_lhs(lam: float, x: np.ndarray, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised lhs over the last axis of ``x``.

    Each term ``Phi(y) * y / ((1 + x_i) Phi(x_i))`` simplifies to
    ``sqrt(y x_i / ((1 + y)(1 + x_i)))``, which is finite at ``x_i = 0``.
    """
    y = lam * np.exp(-np.log1p(x).sum(axis=-1))
    t = (y[..., None] / (1 + y[..., None])) * (x / (1 + x))
    return (t ** (a / 2)).sum(axis=-1), y


def sssy_check(d: float, lam: float, k: int, x) -> SSSYRecord:
    _check_subcritical(d, lam)
    x = np.asarray(x, dtype=float)
    if k < 1 or x.shape != (k,):
        raise ParameterError(f"need k >= 1 and a vector of length k, got k={k}, shape {x.shape}")
    if np.any(x < 0):
        raise ParameterError("x must be nonnegative")
    pp = potential_params(d)
    lhs, y = _sssy_lhs(lam, x, pp.a)
    lhs = float(lhs)
    return SSSYRecord(lhs, float(y), lhs ** (pp.chi / pp.a))


@dataclass(frozen=True)
class KappaEstimate:
    kappa: float
    d: float
    lam: float
    k_max: int
    grid: int
    argmax_k: int
    argmax_lambda: float
    argmax_x: tuple

    @property
    def margin(self) -> float:
        return 1.0 / self.d - self.kappa


def _ascent(lam: float, x: np.ndarray, cap: float, a: float, steps: int = 60) -> tuple[float, np.ndarray]:
    """Coordinate ascent on ``lhs`` inside the box ``[0, cap]^k``."""
    best = float(_sssy_lhs(lam, x, a)[0])
    h = cap / 8
    for _ in range(steps):
        improved = False
        for i in range(len(x)):
            cands = np.repeat(x[None, :], 2, axis=0)
            cands[0, i] = min(cap, x[i] + h)
            cands[1, i] = max(0.0, x[i] - h)
            vals = _sssy_lhs(lam, cands, a)[0]
            j = int(np.argmax(vals))
            if vals[j] > best:
                best, x = float(vals[j]), cands[j]
                improved = True
        if not improved:
            h /= 2
            if h < cap * 1e-9:
                break
    return best, x


def estimate_kappa(d: float, lam: float, k_max: int = 10, grid: int = 64,
                   restarts: int = 8, seed: int = 0) -> KappaEstimate:
    """Numerical ``sup`` of the contraction rate over ``k <= k_max`` children.

    The fugacity ranges over ``grid`` points of ``(0, lam]``, and for each
    the children's ratios over ``[0, fugacity]^k``.  Each ``k`` gets a
    diagonal grid search, then coordinate ascent from the best diagonal
    point and from ``restarts`` random points.
    """
    _check_subcritical(d, lam)
    pp = potential_params(d)
    a = pp.a
    rng = stream(seed, "estimate-kappa")
    fugacities = lam * np.arange(1, grid + 1) / grid
    diag = np.linspace(0.0, 1.0, grid)
    best = (-1.0, 0, lam, ())
    for k in range(1, k_max + 1):
        # diagonal sweep over (fugacity, x) jointly
        xs = fugacities[:, None] * diag[None, :]
        pts = np.repeat(xs[:, :, None], k, axis=2)
        vals = _sssy_lhs(fugacities[:, None], pts, a)[0]
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        lam_k = float(fugacities[i])
        starts = [np.full(k, xs[i, j])] + [rng.uniform(0, lam_k, size=k) for _ in range(restarts)]
        for x0 in starts:
            val, x = _ascent(lam_k, x0, lam_k, a)
            if val > best[0]:
                best = (val, k, lam_k, tuple(float(v) for v in x))
    kappa = best[0] ** (pp.chi / a)
    return KappaEstimate(kappa, d, lam, k_max, grid, best[1], best[2], best[3])
