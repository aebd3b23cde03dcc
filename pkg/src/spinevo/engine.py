"""Generational genetic algorithm over coupling values.

All genomes in a run share the template's topology and protocol, so the
population is handled as an integer matrix of signed coupling values (one row
per genome, one column per coupling token).  Evaluation is the only expensive
stage; it runs over fixed-size chunks that can be farmed out to worker
processes.  Chunk boundaries never depend on the worker count and evaluation
draws no random numbers, so results are identical for any ``workers``.
"""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import DEFAULT_STEPS, DEFAULT_WINDOW, chebyshev_propagate, fidelity_curve, time_grid
from .errors import ConfigError, TopologyMismatch
from .fitness import FitnessParams, FitnessRecord
from .genome import Genome
from .hilbert import DEFAULT_CAPACITY, assemble_blocks, block_operators, protocol_basis, state_vector

log = logging.getLogger(__name__)

CHUNK = 64


@dataclass(frozen=True)
class GaConfig:
    population: int = 1024
    generations: int = 200
    mu_initial: int | None = None  # None: 20% of the largest coupling value
    mu_final: int = 1
    fitness_params: FitnessParams = field(default_factory=FitnessParams)
    window: tuple[float, float] = DEFAULT_WINDOW
    steps: int = DEFAULT_STEPS
    alpha: float = 0.0
    seed: int = 0
    allow_negative: bool = False
    target_fitness: float | None = None
    elitism: int = 0
    workers: int = 1
    capacity: int = DEFAULT_CAPACITY
    method: str = "auto"  # "eigh" disables the single-time shortcut

    def mu_start(self, width: int) -> int:
        if self.mu_initial is not None:
            return self.mu_initial
        return max(1, int(math.floor(0.2 * (10**width - 1) + 0.5)))

    def validate(self, width: int | None = None) -> None:
        if self.population < 2:
            raise ConfigError("population must be at least 2")
        if self.generations < 1:
            raise ConfigError("generations must be at least 1")
        if self.mu_final < 1:
            raise ConfigError("mu_final must be at least 1")
        if width is not None and self.mu_start(width) < self.mu_final:
            raise ConfigError("mu_initial must be >= mu_final")
        if not 0 <= self.elitism < self.population:
            raise ConfigError("elitism must be in [0, population)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        lo, hi = self.window
        if not hi > lo >= 0:
            raise ConfigError(f"bad time window {self.window}")


@dataclass(frozen=True)
class GenerationLog:
    generation: int
    worst: float
    average: float
    best: float
    best_genome: str
    best_f_max: float = float("nan")
    best_t_f_jmax: float = float("nan")

    def csv_row(self) -> list[str]:
        return [str(self.generation), repr(self.worst), repr(self.average), repr(self.best), self.best_genome]


LOG_HEADER = ["generation", "worst", "average", "best", "best_genome"]


# -- evaluation ---------------------------------------------------------------


@dataclass
class Scores:
    """Column-wise evaluation results for a block of genomes."""

    f_max: np.ndarray
    t_f_jmax: np.ndarray
    j_max: np.ndarray
    score: np.ndarray
    failed: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["Scores"]) -> "Scores":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("f_max", "t_f_jmax", "j_max", "score", "failed")))

    def take(self, idx) -> "Scores":
        return Scores(self.f_max[idx], self.t_f_jmax[idx], self.j_max[idx], self.score[idx], self.failed[idx])


class Evaluator:
    """Hilbert -> dynamics -> fitness pipeline for one topology and protocol.

    With a fixed target time only one amplitude per genome is needed, and the
    default ``method="auto"`` gets it from a Chebyshev expansion of the
    propagator instead of a full diagonalization.  ``method="eigh"`` forces
    the spectral path everywhere.
    """

    def __init__(
        self,
        template: Genome,
        alpha: float = 0.0,
        window: tuple[float, float] = DEFAULT_WINDOW,
        steps: int = DEFAULT_STEPS,
        params: FitnessParams = FitnessParams(),
        capacity: int = DEFAULT_CAPACITY,
        method: str = "auto",
    ):
        if method not in ("auto", "eigh"):
            raise ConfigError(f"unknown evaluation method {method!r}")
        self.template = template
        self.params = params
        basis = protocol_basis(template, capacity)
        sites = template.sites
        psi0 = state_vector(template.initial, sites, basis)
        target = state_vector(template.target, sites, basis)
        self.blocks = []
        for ops, sl in zip(block_operators(template, basis, alpha), basis.block_slices().values()):
            self.blocks.append((ops, psi0[sl], target[sl]))
        self.offsite = np.array([not c.is_onsite for c in template.couplings])
        if template.target_time is not None:
            self.times = np.array([template.target_time])
        else:
            self.times = time_grid(window, steps)
        self.single_point = method == "auto" and len(self.times) == 1

    @classmethod
    def from_config(cls, template: Genome, cfg: GaConfig) -> "Evaluator":
        return cls(template, cfg.alpha, cfg.window, cfg.steps, cfg.fitness_params, cfg.capacity, cfg.method)

    def __call__(self, values: np.ndarray) -> Scores:
        values = np.atleast_2d(np.asarray(values, dtype=np.int64))
        parts = [self._chunk(values[i : i + CHUNK]) for i in range(0, len(values), CHUNK)]
        return Scores.concat(parts)

    def _spectra(self, values: np.ndarray, scale: np.ndarray):
        energies, weights = [], []
        for ops, psi0, target in self.blocks:
            h = assemble_blocks(ops, values) / scale[:, None, None]
            e, v = np.linalg.eigh(h)
            vt = v.transpose(0, 2, 1)
            a = vt @ psi0.real + 1j * (vt @ psi0.imag)
            b = vt @ target.real - 1j * (vt @ target.imag)
            energies.append(e)
            weights.append(a * b)
        return np.concatenate(energies, axis=1), np.concatenate(weights, axis=1)

    def _chunk(self, values: np.ndarray) -> Scores:
        n = len(values)
        if self.offsite.any():
            j_max = np.abs(values[:, self.offsite]).max(axis=1).astype(float)
        else:
            j_max = np.zeros(n)
        scale = np.where(j_max > 0, j_max, 1.0)
        failed = np.zeros(n, dtype=bool)
        if self.single_point:
            return self._finish(self._amplitude_fidelity(values, scale), np.zeros(n, dtype=int), scale, j_max, failed)
        try:
            e, w = self._spectra(values, scale)
        except np.linalg.LinAlgError:
            e_rows, w_rows = [], []
            for k in range(n):
                try:
                    ek, wk = self._spectra(values[k : k + 1], scale[k : k + 1])
                except np.linalg.LinAlgError:
                    log.warning("eigensolver failed for genome %s", values[k].tolist())
                    failed[k] = True
                    ek, wk = np.zeros((1, self._dim)), np.zeros((1, self._dim), dtype=complex)
                e_rows.append(ek)
                w_rows.append(wk)
            e, w = np.concatenate(e_rows), np.concatenate(w_rows)
        f = fidelity_curve(e, w, self.times)
        k = np.argmax(f, axis=1)
        return self._finish(f[np.arange(n), k], k, scale, j_max, failed)

    def _amplitude_fidelity(self, values: np.ndarray, scale: np.ndarray) -> np.ndarray:
        amp = np.zeros(len(values), dtype=complex)
        v = values.astype(float)
        for ops, psi0, target in self.blocks:
            hop = v[:, ops.hop_coupling] / scale[:, None]
            diag = (v @ ops.diag_weights) / scale[:, None]
            psi = chebyshev_propagate(ops.hop_rows, ops.hop_cols, hop, diag, psi0, float(self.times[0]))
            amp += psi @ target.conj()
        return np.minimum(amp.real**2 + amp.imag**2, 1.0)

    def _finish(self, f_max, k, scale, j_max, failed) -> Scores:
        tau = self.times[k]
        f_max[failed] = 0.0
        tau = np.where(failed, 0.0, tau)
        t_f = tau / scale
        p = self.params
        score = 100.0 * np.exp(p.a * (f_max - 1.0)) * np.exp(p.b * t_f * j_max)
        score[failed] = 0.0
        return Scores(f_max, tau, j_max, score, failed)

    @property
    def _dim(self) -> int:
        return sum(ops.dim for ops, _, _ in self.blocks)

    def record(self, values: np.ndarray, s: Scores, k: int) -> FitnessRecord:
        jm = float(s.j_max[k])
        scale = jm if jm > 0 else 1.0
        return FitnessRecord(
            self.template.with_values(values[k]),
            float(s.f_max[k]),
            float(s.t_f_jmax[k]) / scale,
            jm,
            float(s.score[k]),
            bool(s.failed[k]),
        )


_WORKER_EVALUATOR: Evaluator | None = None


def _init_worker(evaluator: Evaluator) -> None:
    global _WORKER_EVALUATOR
    _WORKER_EVALUATOR = evaluator


def _eval_chunk(values: np.ndarray) -> Scores:
    assert _WORKER_EVALUATOR is not None
    return _WORKER_EVALUATOR._chunk(values)


class ParallelEvaluator:
    """Evaluates value matrices with ``workers`` processes and a result cache.

    Rows are deduplicated against everything seen so far; the remaining unique
    rows are split into CHUNK-sized pieces in first-appearance order.
    """

    def __init__(self, evaluator: Evaluator, workers: int = 1, cache_limit: int = 500_000):
        self.evaluator = evaluator
        self.workers = workers
        self.cache: dict[bytes, tuple] = {}
        self.cache_limit = cache_limit
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            methods = mp.get_all_start_methods()
            ctx = mp.get_context("fork" if "fork" in methods else None)
            self._pool = ProcessPoolExecutor(
                self.workers, mp_context=ctx, initializer=_init_worker, initargs=(self.evaluator,)
            )
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, values: np.ndarray) -> Scores:
        values = np.ascontiguousarray(values, dtype=np.int64)
        keys = [row.tobytes() for row in values]
        found: dict[bytes, tuple] = {}
        todo: dict[bytes, int] = {}
        for row, key in enumerate(keys):
            if key in found or key in todo:
                continue
            if key in self.cache:
                found[key] = self.cache[key]
            else:
                todo[key] = row
        if todo:
            fresh = values[list(todo.values())]
            chunks = [fresh[i : i + CHUNK] for i in range(0, len(fresh), CHUNK)]
            if self._pool is not None:
                parts = list(self._pool.map(_eval_chunk, chunks))
            else:
                parts = [self.evaluator._chunk(c) for c in chunks]
            res = Scores.concat(parts)
            for n, key in enumerate(todo):
                found[key] = (res.f_max[n], res.t_f_jmax[n], res.j_max[n], res.score[n], res.failed[n])
            if self.cache_limit > 0:
                if len(self.cache) + len(todo) > self.cache_limit:
                    self.cache.clear()
                for key in todo:
                    self.cache[key] = found[key]
        cols = list(zip(*(found[k] for k in keys)))
        return Scores(*(np.array(c) for c in cols))


def _check_population(population: Sequence[Genome]) -> Genome:
    if not population:
        raise ConfigError("empty population")
    structure = population[0].structure()
    for g in population[1:]:
        if g.structure() != structure:
            raise TopologyMismatch("population members do not share one topology/protocol")
    return population[0]


def evaluate(population: Sequence[Genome], cfg: GaConfig = GaConfig()) -> list[FitnessRecord]:
    """One fitness record per genome, in input order."""
    template = _check_population(population)
    evaluator = Evaluator.from_config(template, cfg)
    values = np.array([g.values for g in population], dtype=np.int64)
    with ParallelEvaluator(evaluator, cfg.workers) as pe:
        s = pe(values)
    return [evaluator.record(values, s, k) for k in range(len(values))]


# -- operators ----------------------------------------------------------------


def init_population(template: Genome, cfg: GaConfig) -> list[Genome]:
    if cfg.population < 2:
        raise ConfigError("population must be at least 2")
    return [template] * cfg.population


def gene_bounds(template: Genome, allow_negative: bool) -> tuple[np.ndarray, np.ndarray]:
    """Per-coupling [low, high] range that mutation and random search respect.

    Without ``allow_negative`` a coupling keeps the sign it has in the template.
    On-site energies are never negative (a repeated letter carries no sign).
    """
    top = template.max_value
    lo, hi = [], []
    for c in template.couplings:
        if c.is_onsite:
            lo.append(0)
            hi.append(top)
        elif allow_negative:
            lo.append(-top)
            hi.append(top)
        elif c.value < 0:
            lo.append(-top)
            hi.append(0)
        else:
            lo.append(0)
            hi.append(top)
    return np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)


def _roulette(scores: np.ndarray, size, rng: np.random.Generator):
    total = float(scores.sum())
    if total > 0:
        return rng.choice(len(scores), size=size, p=scores / total)
    return rng.integers(0, len(scores), size=size)


def _cross_values(a: np.ndarray, b: np.ndarray, take_a: np.ndarray, sign_a: np.ndarray, width: int):
    """Per-digit mixing of two value arrays (..., C) with digit masks (..., C, width)."""
    pw = 10 ** np.arange(width - 1, -1, -1, dtype=np.int64)
    da = (np.abs(a)[..., None] // pw) % 10
    db = (np.abs(b)[..., None] // pw) % 10
    mag = (np.where(take_a, da, db) * pw).sum(axis=-1)
    sign = np.where(sign_a, np.where(a < 0, -1, 1), np.where(b < 0, -1, 1))
    return sign * mag


def _mutate_values(values, idx, delta, lo, hi):
    out = values.copy()
    rows = np.arange(len(out))
    out[rows, idx] = np.clip(out[rows, idx] + delta, lo[idx], hi[idx])
    return out


def select_parent(records: Sequence[FitnessRecord], rng: np.random.Generator) -> Genome:
    """Fitness-proportional draw; uniform when every score is zero."""
    if not records:
        raise ValueError("no records to select from")
    scores = np.array([r.score for r in records], dtype=float)
    return records[int(_roulette(scores, None, rng))].genome


def crossover(p1: Genome, p2: Genome, rng: np.random.Generator) -> Genome:
    """Each coupling digit comes from p1 or p2 with probability 1/2.

    The letter pair of a token is treated as one more character, so with
    negative couplings allowed the sign is inherited the same way.
    """
    if p1.structure() != p2.structure():
        raise TopologyMismatch("parents differ outside their coupling digits")
    n = len(p1.couplings)
    take = rng.random((n, p1.width)) < 0.5
    sign = rng.random(n) < 0.5
    child = _cross_values(np.array(p1.values), np.array(p2.values), take, sign, p1.width)
    return p1.with_values(child)


def mutate(g: Genome, mu: int, cfg: GaConfig, rng: np.random.Generator) -> Genome:
    """Shift one uniformly chosen coupling by +-u, u uniform in [1, mu], then clamp."""
    if mu < 1:
        raise ConfigError("mu must be at least 1")
    lo, hi = gene_bounds(g, cfg.allow_negative)
    idx = rng.integers(0, len(g.couplings), size=1)
    delta = (rng.integers(0, 2, size=1) * 2 - 1) * rng.integers(1, mu + 1, size=1)
    out = _mutate_values(np.array([g.values], dtype=np.int64), idx, delta, lo, hi)
    return g.with_values(out[0])


def anneal_mu(gen: int, cfg: GaConfig, width: int = 3) -> int:
    mu_i, mu_f = cfg.mu_start(width), cfg.mu_final
    if cfg.generations == 1:
        return mu_i
    x = mu_i + (mu_f - mu_i) * gen / (cfg.generations - 1)
    return int(math.floor(x + 0.5))


def breed(
    values: np.ndarray,
    scores: np.ndarray,
    mu: int,
    cfg: GaConfig,
    rng: np.random.Generator,
    width: int,
    bounds: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """Next generation: elites first, then children in draw order.

    Random numbers are drawn in a fixed order: parents, digit coins, sign
    coins, mutated gene, mutation direction, mutation size.
    """
    pop, n_genes = values.shape
    n_children = pop - cfg.elitism
    elites = values[np.argsort(-scores, kind="stable")[: cfg.elitism]]
    parents = _roulette(scores, 2 * n_children, rng).reshape(n_children, 2)
    take = rng.random((n_children, n_genes, width)) < 0.5
    sign = rng.random((n_children, n_genes)) < 0.5
    children = _cross_values(values[parents[:, 0]], values[parents[:, 1]], take, sign, width)
    idx = rng.integers(0, n_genes, size=n_children)
    delta = (rng.integers(0, 2, size=n_children) * 2 - 1) * rng.integers(1, mu + 1, size=n_children)
    children = _mutate_values(children, idx, delta, *bounds)
    return np.concatenate([elites, children]) if cfg.elitism else children


# -- drivers ------------------------------------------------------------------


@dataclass
class GaResult:
    best: FitnessRecord
    logs: list[GenerationLog]
    population: int

    def __iter__(self):
        return iter((self.best, self.logs))

    @property
    def evaluations(self) -> int:
        return len(self.logs) * self.population

    def evaluations_to(self, f_threshold: float) -> int | None:
        """Genomes evaluated up to the first generation whose best F reaches the threshold."""
        for entry in self.logs:
            if entry.best_f_max >= f_threshold:
                return (entry.generation + 1) * self.population
        return None


def run_ga(
    template: Genome,
    cfg: GaConfig = GaConfig(),
    callback: Callable[[GenerationLog], bool | None] | None = None,
) -> GaResult:
    """Evolve ``cfg.generations`` generations from copies of ``template``.

    ``callback`` sees every generation log; returning True stops the run.
    """
    cfg.validate(template.width)
    rng = np.random.default_rng(cfg.seed)
    evaluator = Evaluator.from_config(template, cfg)
    bounds = gene_bounds(template, cfg.allow_negative)
    values = np.repeat(np.array([template.values], dtype=np.int64), cfg.population, axis=0)
    logs: list[GenerationLog] = []
    best = None
    best_score = -1.0
    with ParallelEvaluator(evaluator, cfg.workers) as pe:
        for gen in range(cfg.generations):
            s = pe(values)
            k = int(np.argmax(s.score))
            genome_str = str(template.with_values(values[k]))
            entry = GenerationLog(
                gen,
                float(s.score.min()),
                float(s.score.mean()),
                float(s.score[k]),
                genome_str,
                float(s.f_max[k]),
                float(s.t_f_jmax[k]),
            )
            logs.append(entry)
            if s.score[k] > best_score:
                best_score = float(s.score[k])
                best = evaluator.record(values, s, k)
            if callback is not None and callback(entry):
                break
            log.debug("gen %d best %.4f avg %.4f", gen, entry.best, entry.average)
            if cfg.target_fitness is not None and s.score[k] >= cfg.target_fitness:
                break
            if gen == cfg.generations - 1:
                break
            mu = anneal_mu(gen, cfg, template.width)
            values = breed(values, s.score, mu, cfg, rng, template.width, bounds)
    assert best is not None
    return GaResult(best, logs, cfg.population)


@dataclass
class RandomSearchResult:
    best: FitnessRecord
    evaluations: int
    evals_to_threshold: int | None


def random_search(
    template: Genome,
    cfg: GaConfig,
    budget: int,
    threshold: float | None = None,
    stop_at_threshold: bool = False,
) -> RandomSearchResult:
    """Best of ``budget`` genomes with couplings drawn uniformly over their range."""
    if budget < 1:
        raise ConfigError("budget must be at least 1")
    rng = np.random.default_rng(cfg.seed)
    evaluator = Evaluator.from_config(template, cfg)
    lo, hi = gene_bounds(template, cfg.allow_negative)
    best = None
    best_score = -1.0
    hit = None
    done = 0
    batch = max(CHUNK, cfg.population)
    with ParallelEvaluator(evaluator, cfg.workers, cache_limit=0) as pe:
        while done < budget:
            n = min(batch, budget - done)
            values = rng.integers(lo, hi + 1, size=(n, len(lo)))
            s = pe(values)
            k = int(np.argmax(s.score))
            if s.score[k] > best_score:
                best_score = float(s.score[k])
                best = evaluator.record(values, s, k)
            if threshold is not None and hit is None:
                above = np.nonzero(s.f_max >= threshold)[0]
                if above.size:
                    hit = done + int(above[0]) + 1
            done += n
            if hit is not None and stop_at_threshold:
                break
    assert best is not None
    return RandomSearchResult(best, done, hit)
