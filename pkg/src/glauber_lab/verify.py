"""Cross-module invariant suites run by ``glauber-lab verify``.

Each suite walks a corpus of small graphs and counts cases; a failed case
keeps a short description of the first counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from glauber_lab.census import connected_census
from glauber_lab.dynamics import (
    CONDUCTANCE_CAP,
    conductance_lower_bound,
    diagnose,
    pi_min_lower_bound,
    stability_report,
)
from glauber_lab.entropy import at_bound_hardcore, tmix_upper_from_at, verify_tensorization
from glauber_lab.graphs import Graph, generate_gnp
from glauber_lab.models import hardcore, potential_params
from glauber_lab.oracle import enumerate_support, feasible_pinnings, influence_matrix, influence_stack, marginal_ratio
from glauber_lab.sawtree import influence_rows_via_tree
from glauber_lab.spectral import spectral_radii, weighted_inf_norms

CORPORA = ("default", "exhaustive-n6")
LAMBDAS = (Fraction(1, 2), Fraction(1), Fraction(2))
SUITES = ("weitz", "inf-tree", "si-norm", "stability", "tensorization", "cheeger")


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: int = 0
    first_failure: str | None = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, what: str) -> None:
        self.cases += 1
        if not ok:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = what

    def record_many(self, ok: np.ndarray, what: str) -> None:
        bad = int((~ok).sum())
        self.cases += len(ok)
        self.failures += bad
        if bad and self.first_failure is None:
            self.first_failure = what

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tail = f" first={self.first_failure}" if self.first_failure else ""
        return f"{self.name},{self.cases},{self.failures},{status}{tail}"


def corpus_graphs(name: str) -> list[tuple[str, Graph]]:
    if name == "exhaustive-n6":
        return [(f"census{i}(n={g.n},m={g.m})", g) for i, g in enumerate(connected_census(6))]
    if name != "default":
        raise ValueError(f"unknown corpus {name!r}; choose from {', '.join(CORPORA)}")
    named = [("K1", Graph.complete(1)), ("K2", Graph.complete(2)), ("K3", Graph.complete(3)),
             ("K4", Graph.complete(4)), ("P4", Graph.path(4)), ("P5", Graph.path(5)),
             ("C4", Graph.cycle(4)), ("C5", Graph.cycle(5)), ("C6", Graph.cycle(6)),
             ("star4", Graph.star(4))]
    named += [(f"gnp6-{s}", generate_gnp(6, 3, s)) for s in range(4)]
    return named


def _weitz(graphs, lams, pin_rule: str) -> tuple[SuiteResult, SuiteResult]:
    weitz, inf = SuiteResult("weitz"), SuiteResult("inf-tree")
    for name, g in graphs:
        for lam in lams:
            m = hardcore(g, lam)
            exact = influence_matrix(m, exact=True).exact_entries
            for r in range(g.n):
                root, row, abs_row = influence_rows_via_tree(g, r, lam, pin_rule=pin_rule)
                weitz.record(root == marginal_ratio(m, r), f"{name} lambda={lam} root={r}")
                exact_row = exact[r]
                signed = all(row[v] == exact_row[v] for v in range(g.n) if v != r)
                bounded = all(abs(exact_row[v]) <= abs_row[v] for v in range(g.n) if v != r)
                inf.record(signed and bounded, f"{name} lambda={lam} root={r}")
    return weitz, inf


def _si_norm(graphs, lams) -> SuiteResult:
    res = SuiteResult("si-norm")
    for name, g in graphs:
        for lam in lams:
            t = enumerate_support(hardcore(g, float(lam)))
            pins, pluses = feasible_pinnings(t, max_pinned=g.n - 2)
            if len(pins) == 0:
                continue
            stack = np.abs(influence_stack(t, pins, pluses))
            rho = spectral_radii(stack)
            for d in (2, 3):
                norms = weighted_inf_norms(stack, g, potential_params(d).chi)
                ok = rho <= norms + 1e-8
                res.record_many(ok, f"{name} lambda={lam} d={d}")
    return res


def _stability(graphs, lams) -> SuiteResult:
    res = SuiteResult("stability")
    for name, g in graphs:
        for lam in lams:
            rep = stability_report(hardcore(g, lam), zeta=float(lam))
            ok = rep.lower_bound_ok and rep.max_ratio <= float(lam) * (1 + 1e-12)
            res.record(ok, f"{name} lambda={lam} max_ratio={rep.max_ratio}")
    return res


def _tensorization_and_cheeger(graphs, lams, trials: int) -> tuple[SuiteResult, SuiteResult]:
    ten, chg = SuiteResult("tensorization"), SuiteResult("cheeger")
    for name, g in graphs:
        if g.n == 0:
            continue
        for lam in lams:
            m = hardcore(g, float(lam))
            rep = verify_tensorization(m, at_bound_hardcore(g.n, float(lam)), trials=trials)
            dg = diagnose(m)
            ok = rep.passed
            if g.n >= 1 and dg.pi_min < 1:
                ok &= dg.t_mix <= tmix_upper_from_at(max(rep.max_ratio, 1e-300), g.n, dg.pi_min)
            ten.record(ok, f"{name} lambda={lam} ratio={rep.max_ratio:.6g}")
            if dg.size > CONDUCTANCE_CAP or dg.size < 2:
                continue
            phi = dg.conductance
            ok = dg.gap >= phi * phi / 2 - 1e-12
            ok &= phi >= conductance_lower_bound(dg, float(lam)) - 1e-12
            ok &= dg.pi_min >= pi_min_lower_bound(float(lam), g.n) - 1e-15
            chg.record(bool(ok), f"{name} lambda={lam} gap={dg.gap:.6g} phi={phi:.6g}")
    return ten, chg


def run_suites(corpus: str = "default", literal_pinning: bool = False,
               trials: int = 1000) -> list[SuiteResult]:
    """All invariant suites on ``corpus``; ``literal_pinning`` swaps the SAW pin rule."""
    graphs = corpus_graphs(corpus)
    rule = "literal" if literal_pinning else "edge-order"
    weitz, inf = _weitz(graphs, LAMBDAS, rule)
    out = [weitz, inf, _si_norm(graphs, LAMBDAS), _stability(graphs, LAMBDAS)]
    out += list(_tensorization_and_cheeger(graphs, LAMBDAS, trials))
    return out
