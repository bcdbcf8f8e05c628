"""Glauber dynamics: simulation and exact transition-matrix diagnostics.

Both models run on the site graph, so the matching chain is literally the
hard-core chain on the line graph.  One step picks a site uniformly and
resamples it from its conditional law (heat bath): a site with an occupied
neighbour becomes -1, otherwise it becomes +1 with probability
``lambda_v / (1 + lambda_v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.linalg import eigsh

from glauber_lab.errors import ConvergenceError, ParameterError, SizeCapError
from glauber_lab.models import MATCHING, GibbsModel
from glauber_lab.oracle import (
    INF_RATIO,
    SupportTable,
    enumerate_support,
    feasible_pinnings,
)
from glauber_lab.rng import stream

TMIX_THRESHOLD = 1.0 / (2.0 * math.e)
TMIX_CAP = 10**7
CONDUCTANCE_CAP = 20
GAP_CAP = 1 << 20


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------


@dataclass
class ChainState:
    spins: np.ndarray
    """int8 vector of +1/-1 per site"""
    blocked: np.ndarray
    """number of occupied neighbours per site"""

    @classmethod
    def initial(cls, m: GibbsModel) -> "ChainState":
        n = m.n_sites
        return cls(-np.ones(n, dtype=np.int8), np.zeros(n, dtype=np.int32))

    @classmethod
    def from_spins(cls, m: GibbsModel, spins) -> "ChainState":
        s = cls(np.asarray(spins, dtype=np.int8).copy(), np.zeros(m.n_sites, dtype=np.int32))
        s.recompute(m)
        if not s.is_feasible(m):
            raise ParameterError("configuration is not feasible")
        return s

    def recompute(self, m: GibbsModel) -> None:
        occ = self.spins == 1
        self.blocked = np.array([sum(occ[u] for u in nb) for nb in m.site_graph.adjacency],
                                dtype=np.int32)

    def is_feasible(self, m: GibbsModel) -> bool:
        occ = self.spins == 1
        return not any(occ[u] and occ[v] for u, v in m.site_graph.edges)

    @property
    def mask(self) -> int:
        return sum(1 << i for i in np.flatnonzero(self.spins == 1).tolist())


def _occupy_probabilities(m: GibbsModel) -> np.ndarray:
    lam = np.array([float(a) for a in m.activities])
    return lam / (1.0 + lam)


def glauber_step(m: GibbsModel, s: ChainState, rng) -> ChainState:
    """One heat-bath update, in place; returns ``s``."""
    n = m.n_sites
    if n == 0:
        return s
    v = int(rng.integers(n))
    lam = float(m.activities[v])
    u = rng.random()
    new = 1 if s.blocked[v] == 0 and u < lam / (1.0 + lam) else -1
    if new != s.spins[v]:
        s.spins[v] = new
        delta = 1 if new == 1 else -1
        for u in m.site_graph.adjacency[v]:
            s.blocked[u] += delta
    return s


@njit(cache=True)
def _chain_kernel(indptr, indices, p_occ, spins, blocked, sites, us, step0, burn_in, thin,
                  rec_occ, rec_flips, rec_mask, track_mask, state):
    """Run ``len(sites)`` steps; ``state = [mask, occupied, flips_since_record, next_row]``."""
    mask, occupied, flips, row = state[0], state[1], state[2], state[3]
    for t in range(len(sites)):
        v = sites[t]
        if blocked[v] == 0 and us[t] < p_occ[v]:
            new = 1
        else:
            new = -1
        if new != spins[v]:
            spins[v] = new
            flips += 1
            delta = 1 if new == 1 else -1
            occupied += delta
            if track_mask:
                mask ^= np.int64(1) << v
            for k in range(indptr[v], indptr[v + 1]):
                blocked[indices[k]] += delta
        step = step0 + t + 1
        if step > burn_in and (step - burn_in) % thin == 0:
            rec_occ[row] = occupied
            rec_flips[row] = flips
            if track_mask:
                rec_mask[row] = mask
            flips = 0
            row += 1
    state[0], state[1], state[2], state[3] = mask, occupied, flips, row


@dataclass
class ChainRun:
    steps: int
    burn_in: int
    thin: int
    seed: int
    final: ChainState
    record_steps: np.ndarray
    occupied: np.ndarray
    flips: np.ndarray
    masks: np.ndarray | None
    """recorded configurations as bitmasks (only for at most 62 sites)"""

    def occupation_fraction(self) -> np.ndarray:
        n = len(self.final.spins)
        return self.occupied / n if n else self.occupied.astype(float)

    def empirical_law(self, table: SupportTable) -> np.ndarray:
        """Empirical distribution of the recorded configurations, in table order."""
        if self.masks is None:
            raise ParameterError("configurations were not recorded")
        counts = np.zeros(len(table))
        vals, cnt = np.unique(self.masks, return_counts=True)
        for x, c in zip(vals.tolist(), cnt.tolist()):
            counts[table.index_of(x)] += c
        return counts / max(1, counts.sum())


def _csr(m: GibbsModel) -> tuple[np.ndarray, np.ndarray]:
    adj = m.site_graph.adjacency
    indptr = np.zeros(len(adj) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(a) for a in adj])
    indices = np.array([u for a in adj for u in a], dtype=np.int64)
    return indptr, indices


def run_chain(m: GibbsModel, steps: int, burn_in: int = 0, thin: int = 1, seed: int = 0,
              start: ChainState | None = None, chunk: int = 1 << 20) -> ChainRun:
    """Run ``burn_in + steps`` Glauber steps from the all -1 state (or ``start``).

    Every ``thin``-th step after burn-in is recorded.  Sites and resampling
    uniforms come from two seeded streams of doubles, so a run is a
    deterministic function of its arguments and does not depend on ``chunk``.
    """
    if steps < 0 or burn_in < 0 or thin < 1:
        raise ParameterError("need steps >= 0, burn_in >= 0, thin >= 1")
    n = m.n_sites
    s = ChainState.initial(m) if start is None else ChainState(start.spins.copy(), start.blocked.copy())
    track = n <= 62
    rows = steps // thin
    rec_occ = np.zeros(rows, dtype=np.int64)
    rec_flips = np.zeros(rows, dtype=np.int64)
    rec_mask = np.zeros(rows if track else 0, dtype=np.int64)
    state = np.array([s.mask if track else 0, int((s.spins == 1).sum()), 0, 0], dtype=np.int64)
    total = burn_in + steps
    if n > 0 and total > 0:
        site_rng = stream(seed, "glauber-site")
        coin_rng = stream(seed, "glauber")
        indptr, indices = _csr(m)
        p_occ = _occupy_probabilities(m)
        done = 0
        while done < total:
            size = min(chunk, total - done)
            sites = np.minimum((site_rng.random(size) * n).astype(np.int64), n - 1)
            us = coin_rng.random(size)
            _chain_kernel(indptr, indices, p_occ, s.spins, s.blocked, sites, us, done, burn_in,
                          thin, rec_occ, rec_flips, rec_mask, track, state)
            done += size
    record_steps = burn_in + thin * np.arange(1, rows + 1)
    return ChainRun(steps, burn_in, thin, seed, s, record_steps, rec_occ, rec_flips,
                    rec_mask if track else None)


def time_series_csv(run: ChainRun) -> str:
    lines = ["step,occupied_count,site_flips"]
    lines += [f"{t},{o},{f}" for t, o, f in zip(run.record_steps.tolist(), run.occupied.tolist(),
                                               run.flips.tolist())]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Exact diagnostics
# --------------------------------------------------------------------------


@dataclass
class ChainDiagnostics:
    table: SupportTable
    n_sites: int
    P: sp.csr_matrix
    stationary: np.ndarray
    P_exact: dict | None = None
    """sparse exact entries ``{(i, j): Fraction}`` in rational mode"""
    stationary_exact: list | None = None
    t_mix: int | None = None
    gap: float | None = None
    conductance: float | None = None
    pi_min: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.table)

    def dense(self) -> np.ndarray:
        return self.P.toarray()


def transition_matrix(m: GibbsModel, exact: bool | None = None,
                      cap: int = GAP_CAP) -> ChainDiagnostics:
    """Glauber transition matrix over the support in table order."""
    t = enumerate_support(m)
    if len(t) > cap:
        raise SizeCapError(f"support of size {len(t)} exceeds the chain cap {cap}")
    n = m.n_sites
    N = len(t)
    use_exact = t.exact if exact is None else (exact and t.exact)
    order = np.argsort(t.masks)
    sorted_masks = t.masks[order]

    def locate(masks: np.ndarray) -> np.ndarray:
        return order[np.searchsorted(sorted_masks, masks)]

    nbr = m.site_graph.neighbor_masks()
    rows, cols, vals = [], [], []
    exact_entries: dict = {}
    hold = np.zeros(N)
    hold_exact = [Fraction(0)] * N if use_exact else None
    idx = np.arange(N)
    for v in range(n):
        lam = m.activities[v]
        bit = np.int64(1) << v
        occ = (t.masks & bit) != 0
        free = ~occ & ((t.masks & nbr[v]) == 0)
        blocked = ~occ & ~free
        if use_exact:
            lam_q = Fraction(lam)
            p_plus = lam_q / (1 + lam_q) / n
            p_minus = 1 / (1 + lam_q) / n
        p_plus_f = float(lam) / (1.0 + float(lam)) / n
        p_minus_f = 1.0 / (1.0 + float(lam)) / n
        # occupied -> vacate, or stay
        src = idx[occ]
        dst = locate(t.masks[occ] ^ bit)
        rows.append(src), cols.append(dst), vals.append(np.full(len(src), p_minus_f))
        hold[occ] += p_plus_f
        # free -> occupy, or stay
        src2 = idx[free]
        dst2 = locate(t.masks[free] | bit)
        rows.append(src2), cols.append(dst2), vals.append(np.full(len(src2), p_plus_f))
        hold[free] += p_minus_f
        hold[blocked] += 1.0 / n
        if use_exact:
            for i, j in zip(src.tolist(), dst.tolist()):
                exact_entries[(i, j)] = p_minus
                hold_exact[i] += p_plus
            for i, j in zip(src2.tolist(), dst2.tolist()):
                exact_entries[(i, j)] = p_plus
                hold_exact[i] += p_minus
            for i in np.flatnonzero(blocked).tolist():
                hold_exact[i] += Fraction(1, n)
    if n == 0:
        hold[:] = 1.0
        if use_exact:
            hold_exact = [Fraction(1)] * N
    rows.append(idx), cols.append(idx), vals.append(hold)
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    stationary_exact = None
    if use_exact:
        for i in range(N):
            exact_entries[(i, i)] = hold_exact[i]
        stationary_exact = t.exact_probabilities()
    dg = ChainDiagnostics(t, n, P, t.probabilities(), exact_entries if use_exact else None,
                          stationary_exact)
    dg.pi_min = float(dg.stationary.min())
    return dg


def check_stochastic(dg: ChainDiagnostics, tol: float = 1e-12) -> bool:
    if dg.P_exact is not None:
        sums = [Fraction(0)] * dg.size
        for (i, _), v in dg.P_exact.items():
            sums[i] += v
        return all(s == 1 for s in sums)
    return bool(np.all(np.abs(np.asarray(dg.P.sum(axis=1)).ravel() - 1) <= tol))


def check_detailed_balance(dg: ChainDiagnostics, tol: float = 1e-12) -> bool:
    """``pi_i P_ij == pi_j P_ji`` (exactly in rational mode)."""
    if dg.P_exact is not None:
        pi = dg.stationary_exact
        P = dg.P_exact
        return all(pi[i] * v == pi[j] * P.get((j, i), 0) for (i, j), v in P.items())
    F = sp.diags(dg.stationary) @ dg.P
    diff = abs(F - F.T)
    return diff.max() <= tol if diff.nnz else True


def tv_profile(dg: ChainDiagnostics, t_max: int) -> np.ndarray:
    """``max_x TV(P^t(x, .), pi)`` for ``t = 0..t_max``."""
    return _evolve(dg, t_max=t_max)[1]


def _evolve(dg: ChainDiagnostics, t_max: int | None = None, cap: int = TMIX_CAP):
    N = dg.size
    pi = dg.stationary
    PT = dg.P.T.tocsr()
    R = np.eye(N)
    profile = [float(0.5 * np.abs(R - pi[:, None]).sum(axis=0).max())]
    t = 0
    while True:
        if t_max is not None and t >= t_max:
            return t, np.array(profile)
        if t_max is None and profile[-1] <= TMIX_THRESHOLD:
            return t, np.array(profile)
        if t >= cap:
            raise ConvergenceError(f"TV did not drop below 1/(2e) within {cap} steps")
        R = PT @ R
        t += 1
        profile.append(float(0.5 * np.abs(R - pi[:, None]).sum(axis=0).max()))


def mixing_time_exact(dg: ChainDiagnostics, cap: int = TMIX_CAP) -> int:
    """Smallest ``t`` with ``max_x TV(P^t(x, .), pi) <= 1/(2e)``, from every start."""
    t, profile = _evolve(dg, cap=cap)
    dg.t_mix = t
    dg.extra["tv_profile"] = profile
    return t


def _symmetrised(dg: ChainDiagnostics):
    s = np.sqrt(dg.stationary)
    return sp.diags(s) @ dg.P @ sp.diags(1.0 / s)


def spectral_gap(dg: ChainDiagnostics) -> float:
    """``1 - lambda_2`` of the (reversible) transition matrix."""
    N = dg.size
    if N > GAP_CAP:
        raise SizeCapError(f"support of size {N} exceeds the gap cap {GAP_CAP}")
    if N == 1:
        gap = 1.0
    else:
        S = _symmetrised(dg)
        S = 0.5 * (S + S.T)
        if N <= 3000:
            ev = np.linalg.eigvalsh(S.toarray())
            lam2 = ev[-2]
        else:
            ev = eigsh(S, k=2, which="LA", return_eigenvectors=False)
            lam2 = np.sort(ev)[0]
        gap = float(1.0 - lam2)
    dg.gap = gap
    return gap


def conductance(dg: ChainDiagnostics, chunk: int = 1 << 14) -> float:
    """``min_{pi(A) <= 1/2} Q(A, A^c) / pi(A)`` by exhaustive subset search."""
    N = dg.size
    if N > CONDUCTANCE_CAP:
        raise SizeCapError(f"exact conductance needs |support| <= {CONDUCTANCE_CAP}, got {N}")
    pi = dg.stationary
    Q = (sp.diags(pi) @ dg.P).toarray()
    bits = np.arange(N)
    best = math.inf
    for lo in range(1, 1 << N, chunk):
        subsets = np.arange(lo, min(lo + chunk, 1 << N), dtype=np.int64)
        X = ((subsets[:, None] >> bits) & 1).astype(float)
        mass = X @ pi
        keep = mass <= 0.5 + 1e-12
        if not keep.any():
            continue
        X, mass = X[keep], mass[keep]
        inner = ((X @ Q) * X).sum(axis=1)
        best = min(best, float(((mass - inner) / mass).min()))
    dg.conductance = best
    return best


def conductance_lower_bound(dg: ChainDiagnostics, lam) -> float:
    """``(2 pi_min / |M|) * min(1/(1+lam), lam/(1+lam))``; a sequence of activities uses the worst site."""
    lams = [float(x) for x in lam] if isinstance(lam, (list, tuple)) else [float(lam)]
    worst = min(min(1 / (1 + x), x / (1 + x)) for x in lams)
    return 2 * dg.pi_min / dg.n_sites * worst


def pi_min_lower_bound(lam: float, sites: int) -> float:
    return min(1.0, lam**sites) / (1.0 + lam) ** sites


def diagnose(m: GibbsModel, with_conductance: bool | None = None,
             cap: int = GAP_CAP) -> ChainDiagnostics:
    """Transition matrix plus t_mix, gap and conductance.

    Conductance is exact for small supports; otherwise the pi_min-based lower
    bound is stored and ``extra["conductance_kind"]`` says ``"bound"``.
    """
    dg = transition_matrix(m, exact=False, cap=cap)
    mixing_time_exact(dg)
    spectral_gap(dg)
    if with_conductance is None:
        with_conductance = dg.size <= CONDUCTANCE_CAP
    if with_conductance:
        conductance(dg)
        dg.extra["conductance_kind"] = "exact"
    elif dg.n_sites > 0:
        dg.conductance = conductance_lower_bound(dg, list(m.activities))
        dg.extra["conductance_kind"] = "bound"
    return dg


def diagnostics_csv_row(n: int, d, lam, seed, dg: ChainDiagnostics) -> str:
    cond = "" if dg.conductance is None else repr(dg.conductance)
    kind = dg.extra.get("conductance_kind", "")
    return f"{n},{d},{lam},{seed},{dg.t_mix},{dg.gap!r},{cond},{dg.pi_min!r},{kind}"


DIAGNOSTICS_HEADER = "n,d,lambda,seed,t_mix,gap,conductance,pi_min,conductance_kind"


# --------------------------------------------------------------------------
# Marginal stability
# --------------------------------------------------------------------------


@dataclass
class StabilityReport:
    zeta: float
    max_ratio: float
    """largest R^{Lambda,tau}(w)"""
    max_nested: float
    """largest R^{Lambda,tau}(w) / R^{S,tau_S}(w) over S within Lambda"""
    pinnings: int
    lower_bound_ok: bool
    """homogeneous hard-core: R >= lam / ((1+lam)^(deg+1) - lam) without +1 neighbours"""
    min_lower_slack: float | None
    passed: bool


def _all_ratios(t: SupportTable, pins: np.ndarray, pluses: np.ndarray):
    """``(plus, minus)`` weights of each site under each pinning, shape ``(P, n)``."""
    X = t.occupancy().astype(float)
    w = t.probabilities()
    C = ((t.masks[None, :] & pins[:, None]) == pluses[:, None]).astype(float)
    plus = C @ (w[:, None] * X)
    minus = (C @ w)[:, None] - plus
    return plus, minus


def stability_report(m: GibbsModel, zeta: float, max_sites: int = 10, samples: int = 2000,
                     seed: int = 0) -> StabilityReport:
    """Marginal-stability observables over pinnings.

    Exhaustive (every pinning and every sub-pinning) for at most 6 sites.
    Up to ``max_sites`` sites the pinnings are a seeded sample of size
    ``samples`` while the sub-pinning minimum stays exact.
    """
    n = m.n_sites
    if n > max_sites:
        raise SizeCapError(f"{n} sites exceed the stability cap {max_sites}")
    t = enumerate_support(m)
    pins, pluses = feasible_pinnings(t, max_pinned=n - 1)
    plus, minus = _all_ratios(t, pins, pluses)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(minus > 0, plus / np.where(minus > 0, minus, 1), np.inf)
    pinned_site = ((pins[:, None] >> np.arange(n)) & 1).astype(bool)
    R[pinned_site] = np.nan
    if np.isinf(R).any():
        max_ratio = INF_RATIO
    else:
        max_ratio = float(np.nanmax(R)) if np.isfinite(R).any() else 0.0
    # minimum over sub-pinnings, by DP over pinned-set size
    key = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(pins.tolist(), pluses.tolist()))}
    sub_min = R.copy()
    sizes = np.array([int(p).bit_count() for p in pins.tolist()])
    for i in np.argsort(sizes, kind="stable"):
        pin, plus_mask = int(pins[i]), int(pluses[i])
        x = pin
        while x:
            low = x & -x
            x ^= low
            j = key[(pin ^ low, plus_mask & ~low)]
            sub_min[i] = np.fmin(sub_min[i], np.where(pinned_site[i], np.nan, sub_min[j]))
    if n > 6:
        rng = stream(seed, "stability")
        chosen = rng.choice(len(pins), size=min(samples, len(pins)), replace=False)
    else:
        chosen = np.arange(len(pins))
    Rc, Sc = R[chosen], sub_min[chosen]
    ok = (Rc > 0) & np.isfinite(Rc)
    max_nested = float((Rc[ok] / Sc[ok]).max()) if ok.any() else 0.0
    # lower bound for homogeneous hard-core without pinned +1 neighbours
    lower_ok, slack = True, None
    acts = set(m.activities)
    if m.kind != MATCHING and len(acts) == 1 and n > 0:
        lam = float(next(iter(acts)))
        deg = np.array(m.site_graph.degrees())
        bound = lam / ((1 + lam) ** (deg + 1) - lam)
        nbr = np.array(m.site_graph.neighbor_masks(), dtype=np.int64)
        no_plus_nbr = (pluses[:, None] & nbr[None, :]) == 0
        mask = no_plus_nbr & ~pinned_site
        rel = R[mask] / np.broadcast_to(bound, R.shape)[mask]
        slack = float(rel.min()) if rel.size else None
        lower_ok = bool(rel.size == 0 or rel.min() >= 1 - 1e-12)
    passed = max_ratio is not INF_RATIO and max_ratio <= zeta and max_nested <= zeta
    return StabilityReport(zeta, max_ratio, max_nested, len(chosen), lower_ok, slack, passed)
