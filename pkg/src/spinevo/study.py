"""Single-genome analyses: evaluation with a full trace, alpha scans,
rounding studies and the GA-versus-random-search comparison."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import DEFAULT_STEPS, DEFAULT_WINDOW, FidelityTrace, diagonalize, peak_search
from .engine import GaConfig, random_search, run_ga
from .errors import ConfigError, ConvergenceError
from .fitness import FitnessParams, FitnessRecord, score
from .genome import Genome, StateExpression, round_couplings
from .hilbert import build_hamiltonian, protocol_basis, state_vector


def evaluate_genome(
    g: Genome,
    alpha: float = 0.0,
    window: tuple[float, float] = DEFAULT_WINDOW,
    steps: int = DEFAULT_STEPS,
    params: FitnessParams = FitnessParams(),
    at: float | None = None,
    refine: bool = False,
) -> tuple[FitnessRecord, FidelityTrace]:
    """Evaluate one genome through the explicit Hamiltonian path.

    ``at`` (t*Jmax) overrides the genome's own target time.
    """
    basis = protocol_basis(g)
    h = build_hamiltonian(g, basis, alpha)
    psi0 = state_vector(g.initial, g.sites, basis)
    target = state_vector(g.target, g.sites, basis)
    fixed = at if at is not None else g.target_time
    try:
        sd = diagonalize(h)
    except ConvergenceError:
        rec = FitnessRecord(g, 0.0, 0.0, h.j_max, 0.0, failed=True)
        empty = np.zeros(0)
        return rec, FidelityTrace(empty, empty, empty, 0.0, 0.0)
    trace = peak_search(sd, psi0, target, window, steps, fixed, h.j_max, refine)
    scale = h.j_max if h.j_max > 0 else 1.0
    t_f = trace.peak_time / scale
    rec = FitnessRecord(g, trace.peak_fidelity, t_f, h.j_max, score(trace.peak_fidelity, t_f, h.j_max, params))
    return rec, trace


def scan_alpha(g: Genome, alphas: Sequence[float]) -> list[float]:
    """Fidelity at the genome's target time for each alpha."""
    if g.target_time is None:
        raise ConfigError("alpha scan needs a genome with a target time (@t)")
    basis = protocol_basis(g)
    psi0 = state_vector(g.initial, g.sites, basis)
    target = state_vector(g.target, g.sites, basis)
    out = []
    for alpha in alphas:
        h = build_hamiltonian(g, basis, float(alpha))
        trace = peak_search(diagonalize(h), psi0, target, fixed_time=g.target_time, j_max=h.j_max)
        out.append(trace.peak_fidelity)
    return out


def alpha_scan_csv(alphas: Sequence[float], fidelities: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "fidelity"])
    for a, f in zip(alphas, fidelities):
        w.writerow([repr(float(a)), repr(float(f))])
    return buf.getvalue()


@dataclass
class RoundingRow:
    initial: StateExpression
    target: StateExpression
    fidelities: dict[int, float]  # significant figures -> F


def round_study(
    g: Genome,
    sig_figs: Sequence[int],
    protocols: Sequence[tuple[StateExpression, StateExpression]] | None = None,
    alpha: float = 0.0,
    window: tuple[float, float] = DEFAULT_WINDOW,
    steps: int = DEFAULT_STEPS,
) -> list[RoundingRow]:
    """Fidelity of each protocol after rounding the couplings to n s.f.

    With a target time the fidelity is taken there, otherwise at the peak.
    """
    if protocols is None:
        protocols = [(g.initial, g.target)]
    rounded = {n: round_couplings(g, n) for n in sig_figs}
    rows = []
    for initial, target in protocols:
        fids = {}
        for n, gn in rounded.items():
            rec, _ = evaluate_genome(gn.with_protocol(initial, target), alpha, window, steps)
            fids[n] = rec.f_max
        rows.append(RoundingRow(initial, target, fids))
    return rows


def format_round_table(rows: Sequence[RoundingRow], sig_figs: Sequence[int]) -> str:
    head = ["initial", "target"] + [f"{n} s.f." for n in sig_figs]
    body = [[str(r.initial), str(r.target)] + [f"{100 * r.fidelities[n]:.1f}%" for n in sig_figs] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([fmt(head)] + [fmt(b) for b in body]) + "\n"


@dataclass
class BaselineReport:
    threshold: float
    budget: int
    ga_evaluations: int | None
    ga_best: FitnessRecord
    random_evaluations: int | None
    random_best: FitnessRecord

    def ratio(self) -> float | None:
        """Random-search cost over GA cost; unreached runs count as budget + 1."""
        if self.ga_evaluations is None:
            return None
        rnd = self.random_evaluations if self.random_evaluations is not None else self.budget + 1
        return rnd / self.ga_evaluations

    def text(self) -> str:
        def show(n):
            return str(n) if n is not None else f">{self.budget}"

        ratio = self.ratio()
        lines = [
            f"threshold F >= {self.threshold}",
            f"budget {self.budget} evaluations each",
            f"ga      evaluations_to_threshold={show(self.ga_evaluations)} best_f_max={self.ga_best.f_max:.6f}",
            f"random  evaluations_to_threshold={show(self.random_evaluations)} best_f_max={self.random_best.f_max:.6f}",
            f"ratio   {ratio:.2f}" if ratio is not None else "ratio   n/a (GA did not reach threshold)",
        ]
        return "\n".join(lines) + "\n"


def compare_baseline(template: Genome, cfg: GaConfig, budget: int, threshold: float = 0.99) -> BaselineReport:
    """GA and random search with the same evaluation budget."""
    if budget < cfg.population:
        raise ConfigError("budget must be at least one population")
    ga_cfg = replace(cfg, generations=budget // cfg.population)
    ga = run_ga(template, ga_cfg, callback=lambda e: e.best_f_max >= threshold)
    rnd = random_search(template, cfg, budget, threshold=threshold, stop_at_threshold=True)
    return BaselineReport(threshold, budget, ga.evaluations_to(threshold), ga.best, rnd.evals_to_threshold, rnd.best)
