"""Entropy inequalities: approximate tensorisation and block factorisation.

The verifiers evaluate both sides exactly over the support (float64) for a
batch of test functions and report the largest observed ratio
``Ent(f) / RHS(f)``, so a failure is diagnosable rather than just a verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from glauber_lab.errors import ParameterError, SizeCapError
from glauber_lab.models import GibbsModel
from glauber_lab.oracle import (
    SupportTable,
    conditional_entropies,
    conditional_entropy_average,
    entropy_functional,
    enumerate_support,
)
from glauber_lab.rng import stream

RTOL = 1e-9
ATOL = 1e-14
BLOCK_SITE_CAP = 12
BLOCK_SIZE_CAP = 6
SLOW_MODE_CAP = 3000


# --------------------------------------------------------------------------
# Closed-form bounds
# --------------------------------------------------------------------------


def _lam_term(lam: float) -> float:
    return 1.0 + lam + 1.0 / lam


def at_bound_hardcore(k: int, lam: float, eta: float | None = None) -> float:
    """Tensorisation constant for ``k`` sites: ``2k^2 (1+lam+1/lam)^(2k+2)``.

    With ``eta`` the smaller of that and
    ``3 log(1+lam+1/lam) ((1+lam) k)^(2+2 eta)``.
    """
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    q = _lam_term(lam)
    first = 2.0 * k * k * q ** (2 * k + 2)
    if eta is None:
        return first
    if eta < 0:
        raise ParameterError(f"eta must be nonnegative, got {eta}")
    return min(first, 3.0 * math.log(q) * ((1.0 + lam) * k) ** (2 + 2 * eta))


def at_bound_matching(k: int, lam: float) -> float:
    return at_bound_hardcore(k, lam)


@dataclass(frozen=True)
class SIParams:
    eta: float
    xi: float
    zeta: float

    def __post_init__(self):
        if self.eta < 0 or not self.xi > 0 or not self.zeta > 0:
            raise ParameterError("need eta >= 0, xi > 0, zeta > 0")


@dataclass(frozen=True)
class EntropyBounds:
    at_k: Callable
    alpha: float
    block_C: float
    ell: int
    theta: float | None = None


def block_alpha(si: SIParams) -> float:
    """``min(1/(2 eta), log(1+xi) / (log(1+xi) + log(2 zeta)))``."""
    lx = math.log1p(si.xi)
    second = lx / (lx + math.log(2 * si.zeta))
    if not 0 < second <= 1:
        raise ParameterError(f"zeta={si.zeta} gives alpha outside (0, 1]; need zeta >= 1/2")
    first = math.inf if si.eta == 0 else 1.0 / (2.0 * si.eta)
    return min(first, second)


def alpha_and_block_C(si: SIParams, n: int, ell: int) -> EntropyBounds:
    """``alpha`` and the block-factorisation constant ``(e n / ell)^(1 + 1/alpha)``."""
    alpha = block_alpha(si)
    if ell < 1 / alpha - 1e-12:
        raise ParameterError(f"block size {ell} is below 1/alpha = {1 / alpha:.6g}")
    if ell >= n:
        raise ParameterError(f"block size {ell} must be below n = {n}")
    C = (math.e * n / ell) ** (1.0 + 1.0 / alpha)
    return EntropyBounds(lambda k, lam: at_bound_hardcore(k, lam, si.eta), alpha, C, ell)


def tmix_upper_from_at(C_at: float, n: int, mu_min: float) -> int:
    """``ceil(C n (log log(1/mu_min) + log 2 + 2))``; the log log term is clamped at 0."""
    if not 0 < mu_min < 1:
        raise ParameterError(f"mu_min must lie in (0, 1), got {mu_min}")
    if C_at <= 0 or n < 1:
        raise ParameterError("need C_at > 0 and n >= 1")
    loglog = max(0.0, math.log(math.log(1.0 / mu_min)))
    return math.ceil(C_at * n * (loglog + math.log(2.0) + 2.0))


def md_theta(lam: float, max_degree: int) -> float:
    """``1 / (400 e Delta (1 + lam + 1/lam)^2)``."""
    if max_degree < 2:
        raise ParameterError(f"max degree must be at least 2, got {max_degree}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    return 1.0 / (400.0 * math.e * max_degree * _lam_term(lam) ** 2)


@dataclass(frozen=True)
class SeriesCheck:
    theta: float
    q: float
    """``4 e Delta theta``, the per-extra-edge factor of the component tail"""
    partial_sums: tuple
    term_ratio_limit: float
    converged: bool


def md_series_check(lam: float, max_degree: int, terms: int = 200) -> SeriesCheck:
    """Partial sums of ``sum_k 2k^2 (1+lam+1/lam)^(2k+2) (4 e Delta theta)^(k-1)``."""
    theta = md_theta(lam, max_degree)
    q = 4.0 * math.e * max_degree * theta
    L = _lam_term(lam)
    sums, total = [], 0.0
    for k in range(1, terms + 1):
        log_term = math.log(2 * k * k) + (2 * k + 2) * math.log(L) + (k - 1) * math.log(q)
        total += math.exp(log_term)
        sums.append(total)
    limit = L * L * q
    tail_small = sums[-1] - sums[-2] <= 1e-12 * sums[-1]
    return SeriesCheck(theta, q, tuple(sums), limit, limit < 1 and math.isfinite(total) and tail_small)


# --------------------------------------------------------------------------
# Test functions
# --------------------------------------------------------------------------


def random_functions(size: int, trials: int, seed: int) -> np.ndarray:
    """Columns of log-uniform values in ``[e^-3, e^3]`` (``size`` x ``trials``)."""
    rng = stream(seed, "entropy-functions")
    return np.exp(rng.uniform(-3.0, 3.0, size=(size, trials)))


def adversarial_functions(size: int) -> np.ndarray:
    """Indicators, smoothed indicators, two-point and constant functions."""
    eye = np.eye(size)
    cols = [eye, eye + 1e-9, 1.0 - eye, np.ones((size, 1))]
    if size >= 2:
        steps = (np.arange(size)[:, None] < np.arange(1, size)[None, :]).astype(float)
        cols += [steps, steps + 1e-9]
    return np.hstack(cols)


def slow_mode_functions(m: GibbsModel, modes: int = 3) -> np.ndarray:
    """Functions built from the slowest eigenvectors of the Glauber chain.

    For each right eigenvector ``v`` (scaled to ``max |v| = 1``) this gives
    ``1 + eps v`` for small and moderate ``eps``, ``exp(c v)`` and the smoothed
    indicator of ``v > 0``.  Small perturbations probe the variance ratio
    ``1 / (n gap)``, which random functions rarely approach on bottlenecked
    chains.
    """
    from glauber_lab.dynamics import transition_matrix

    dg = transition_matrix(m, exact=False)
    N = dg.size
    if N < 2:
        return np.ones((N, 0))
    s = np.sqrt(dg.stationary)
    S = (s[:, None] * dg.dense()) / s[None, :]
    _, vecs = np.linalg.eigh(0.5 * (S + S.T))
    cols = []
    for k in range(2, min(modes + 1, N) + 1):
        v = vecs[:, -k] / s
        v = v / np.abs(v).max()
        for eps in (1e-3, 0.1, 0.5, 0.9):
            cols += [1 + eps * v, 1 - eps * v]
        for c in (1.0, 3.0):
            cols += [np.exp(c * v), np.exp(-c * v)]
        cols += [(v > 0) + 1e-9, (v <= 0) + 1e-9]
    return np.column_stack(cols).astype(float)


def probe_functions(size: int, trials: int, seed: int, m: GibbsModel | None = None) -> np.ndarray:
    """Random columns plus adversaries (and slow-mode functions when ``m`` is given)."""
    parts = [random_functions(size, trials, seed), adversarial_functions(size)]
    if m is not None and size <= SLOW_MODE_CAP:
        parts.append(slow_mode_functions(m))
    return np.hstack(parts)


# --------------------------------------------------------------------------
# Verifiers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityReport:
    name: str
    constant: float
    max_ratio: float
    functions: int
    passed: bool

    def csv_row(self, model: str) -> str:
        return f"{model},{self.name},{self.constant!r},{self.max_ratio!r},{self.functions},{int(self.passed)}"


ENTROPY_CSV_HEADER = "model,inequality,constant,max_ratio,trials,pass"


def _compare(lhs: np.ndarray, rhs_unit: np.ndarray, C: float) -> tuple[float, bool]:
    """Check ``lhs <= C * rhs_unit`` columnwise; return (max lhs/rhs_unit, all pass)."""
    ok = lhs <= C * rhs_unit * (1 + RTOL) + ATOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs_unit > ATOL, lhs / rhs_unit, np.where(lhs > ATOL, np.inf, 0.0))
    return float(ratios.max()) if ratios.size else 0.0, bool(ok.all())


def _table(m) -> SupportTable:
    return m if isinstance(m, SupportTable) else enumerate_support(m)


def tensorization_sides(m, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(Ent(f), sum_v mu(Ent_v(f)))`` for each column of ``f``."""
    t = _table(m)
    lhs = entropy_functional(t, f)
    rhs = sum(conditional_entropy_average(t, f, [v]) for v in range(t.n))
    return np.atleast_1d(lhs), np.atleast_1d(rhs)


def verify_tensorization(m: GibbsModel, C: float, trials: int = 10_000, seed: int = 0,
                         functions: np.ndarray | None = None) -> InequalityReport:
    """``Ent(f) <= C sum_v mu(Ent_v(f))`` on random plus adversarial ``f``."""
    t = _table(m)
    model = m if isinstance(m, GibbsModel) else None
    f = probe_functions(len(t), trials, seed, model) if functions is None else functions
    lhs, rhs = tensorization_sides(t, f)
    ratio, ok = _compare(lhs, rhs, C)
    return InequalityReport("tensorization", C, ratio, f.shape[1], ok)


def verify_block_factorization(m: GibbsModel, ell: int, C: float, trials: int = 1000,
                               seed: int = 0, functions: np.ndarray | None = None) -> InequalityReport:
    """``Ent(f) <= C / binom(n, ell) * sum_{|S| = ell} mu(Ent_S(f))``."""
    t = _table(m)
    n = t.n
    if not 1 <= ell <= n:
        raise ParameterError(f"block size must lie in [1, {n}], got {ell}")
    if n > BLOCK_SITE_CAP or ell > BLOCK_SIZE_CAP:
        raise SizeCapError(f"block sums limited to n <= {BLOCK_SITE_CAP}, ell <= {BLOCK_SIZE_CAP}")
    model = m if isinstance(m, GibbsModel) else None
    f = probe_functions(len(t), trials, seed, model) if functions is None else functions
    lhs = np.atleast_1d(entropy_functional(t, f))
    total = sum(conditional_entropy_average(t, f, S) for S in combinations(range(n), ell))
    rhs = np.atleast_1d(total) / math.comb(n, ell)
    ratio, ok = _compare(lhs, rhs, C)
    return InequalityReport(f"block-{ell}", C, ratio, f.shape[1], ok)


@dataclass(frozen=True)
class EntProductReport:
    checks: int
    max_ratio: float
    passed: bool


def verify_ent_product(m: GibbsModel, trials: int = 100, seed: int = 0,
                       functions: np.ndarray | None = None) -> EntProductReport:
    """``Ent^tau_S(f) <= sum_{U in C(S)} mu^tau_S[Ent_U(f)]`` for every ``S`` and ``tau``.

    ``C(S)`` are the connected components of the site graph induced on ``S``;
    given ``tau`` the conditional law on ``S`` is a product over them.
    """
    t = _table(m)
    g = m.site_graph
    n = t.n
    f = random_functions(len(t), trials, seed) if functions is None else functions
    f = f.reshape(len(t), -1)
    checks, worst, ok = 0, 0.0, True
    for smask in range(1, 1 << n):
        S = [v for v in range(n) if smask >> v & 1]
        sub, labels = g.induced_subgraph(S)
        comps = [[labels[i] for i in c] for c in sub.components()]
        keys, mass, ent = conditional_entropies(t, f, S)
        index = {k: i for i, k in enumerate(keys.tolist())}
        rhs = np.zeros_like(ent)
        for U in comps:
            ukeys, umass, uent = conditional_entropies(t, f, U)
            tau = ukeys & ~np.int64(smask)
            gidx = np.array([index[x] for x in tau.tolist()], dtype=int)
            np.add.at(rhs, gidx, umass[:, None] * uent)
        rhs /= mass[:, None]
        ok &= bool((ent <= rhs * (1 + RTOL) + ATOL).all())
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > ATOL, ent / rhs, np.where(ent > ATOL, np.inf, 0.0))
        worst = max(worst, float(r.max()))
        checks += ent.size
    return EntProductReport(checks, worst, ok)
