import math
from dataclasses import replace

import numpy as np
import pytest

from spinevo.engine import (
    GaConfig,
    anneal_mu,
    crossover,
    evaluate,
    gene_bounds,
    init_population,
    mutate,
    random_search,
    run_ga,
    select_parent,
)
from spinevo.errors import ConfigError, TopologyMismatch
from spinevo.fitness import FitnessRecord
from spinevo.genome import parse, uniform_chain
from spinevo.study import evaluate_genome

SMALL = GaConfig(population=32, generations=6, seed=3)


def _records(scores):
    g = parse("<A|B>AB500")
    return [FitnessRecord(g.with_values([k + 1]), 0.0, 0.0, 1.0, s) for k, s in enumerate(scores)]


def _pst_values(n=7, top=999):
    w = [math.sqrt(i * (n - i)) for i in range(1, n)]
    return [round(top * x / max(w)) for x in w]


# -- initialization and evaluation --------------------------------------------


def test_init_population_copies_template():
    t = parse("<A|C>AB500BC500@3.00")
    pop = init_population(t, replace(SMALL, population=4))
    assert len(pop) == 4 and all(g == t for g in pop)
    with pytest.raises(ConfigError):
        init_population(t, replace(SMALL, population=1))


def test_uniform_population_records_equal():
    t = uniform_chain(7)
    recs = evaluate([t] * 5, SMALL)
    assert len({(r.f_max, r.t_f, r.score) for r in recs}) == 1


def test_pst_member_reaches_full_fidelity():
    t = uniform_chain(7)
    pst = t.with_values(_pst_values())
    recs = evaluate([t, pst, t], SMALL)
    assert recs[1].f_max >= 0.999
    assert recs[1].genome == pst


def test_batched_pipeline_matches_explicit_path():
    rng = np.random.default_rng(0)
    t = parse("<A+B|CD>AB500AC500BC500BD500CD500DD300")
    pop = [t.with_values(v) for v in rng.integers(0, 1000, size=(20, 6))]
    cfg = replace(SMALL, alpha=0.141)
    for rec in evaluate(pop, cfg):
        ref, _ = evaluate_genome(rec.genome, alpha=0.141)
        assert rec.f_max == pytest.approx(ref.f_max, abs=1e-10)
        assert rec.t_f_jmax == pytest.approx(ref.t_f_jmax, abs=1e-9)
        assert rec.score == pytest.approx(ref.score, rel=1e-9)


def test_single_time_shortcut_matches_spectral_path():
    rng = np.random.default_rng(7)
    t = parse("<0+A+D+AD|0+C+E-CE>AB5000BC5000BE5000CD5000DE5000AA0100@6.20")
    pop = [t.with_values(v) for v in rng.integers(0, 10_000, size=(90, 6))]
    fast = evaluate(pop, replace(SMALL, alpha=0.141))
    slow = evaluate(pop, replace(SMALL, alpha=0.141, method="eigh"))
    for a, b in zip(fast, slow):
        assert a.f_max == pytest.approx(b.f_max, abs=1e-10)
        assert a.t_f == b.t_f
        assert a.score == pytest.approx(b.score, rel=1e-9)


def test_workers_do_not_change_records():
    rng = np.random.default_rng(1)
    t = uniform_chain(6)
    pop = [t.with_values(v) for v in rng.integers(0, 1000, size=(150, 5))]
    one = evaluate(pop, replace(SMALL, workers=1))
    two = evaluate(pop, replace(SMALL, workers=2))
    assert one == two


def test_mixed_topologies_rejected():
    with pytest.raises(TopologyMismatch):
        evaluate([parse("<A|C>AB500BC500"), parse("<A|C>AB500AC500")], SMALL)


def test_zero_couplings_do_not_crash():
    t = parse("<A|C>AB000BC000")
    (rec,) = evaluate([t], SMALL)
    assert rec.f_max == 0.0 and rec.score > 0


# -- operators ----------------------------------------------------------------


def test_select_degenerate_wheel():
    rng = np.random.default_rng(0)
    recs = _records([100, 0])
    assert all(select_parent(recs, rng) is recs[0].genome for _ in range(500))


@pytest.mark.parametrize("scores,expected", [([50, 50], [0.5, 0.5]), ([0, 0, 0, 0], [0.25] * 4), ([30, 10], [0.75, 0.25])])
def test_select_frequencies(scores, expected):
    rng = np.random.default_rng(11)
    recs = _records(scores)
    picks = [select_parent(recs, rng).values[0] - 1 for _ in range(10_000)]
    freq = np.bincount(picks, minlength=len(scores)) / 10_000
    assert np.all(np.abs(freq - expected) <= 0.02)


def test_crossover_identical_parents():
    p = parse("<A|C>AB512BC087")
    rng = np.random.default_rng(0)
    assert all(crossover(p, p, rng) == p for _ in range(50))


def test_crossover_all_heads():
    class Heads:
        def random(self, size):
            return np.zeros(size)

    a, b = parse("<A|B>AB500"), parse("<A|B>AB900")
    assert str(crossover(a, b, Heads())) == "<A|B>AB500"


def test_crossover_digit_frequencies():
    a, b = parse("<A|C>AB111BC111"), parse("<A|C>AB999BC999")
    rng = np.random.default_rng(5)
    digits = np.array([[int(ch) for ch in f"{v:03d}"] for _ in range(10_000) for v in crossover(a, b, rng).values])
    digits = digits.reshape(10_000, 6)
    assert set(np.unique(digits)) <= {1, 9}
    assert np.all(np.abs((digits == 9).mean(axis=0) - 0.5) <= 0.02)


def test_crossover_topology_mismatch():
    with pytest.raises(TopologyMismatch):
        crossover(parse("<A|C>AB500BC500"), parse("<A|B>AB500BC500"), np.random.default_rng(0))


def test_mutation_clamps():
    rng = np.random.default_rng(0)
    low = parse("<A|B>AB000")
    high = parse("<A|B>AB999")
    for _ in range(200):
        assert 0 <= mutate(low, 200, SMALL, rng).values[0] <= 200
        assert 799 <= mutate(high, 200, SMALL, rng).values[0] <= 999


def test_mutation_range_exhaustive():
    rng = np.random.default_rng(2)
    g = parse("<A|D>AB500BC500CD500")
    seen = set()
    for _ in range(10_000):
        m = mutate(g, 200, SMALL, rng).values
        changed = [k for k in range(3) if m[k] != 500]
        assert len(changed) == 1
        seen.add(m[changed[0]])
    assert seen <= set(range(300, 701)) - {500}
    assert min(seen) == 300 and max(seen) == 700


def test_mutation_keeps_sign_unless_allowed():
    rng = np.random.default_rng(4)
    g = parse("<A|C>BA010BC010")
    for _ in range(500):
        m = mutate(g, 200, SMALL, rng).values
        assert m[0] <= 0 and m[1] >= 0
    neg = replace(SMALL, allow_negative=True)
    lo, hi = gene_bounds(g, True)
    assert lo.tolist() == [-999, -999] and hi.tolist() == [999, 999]
    assert any(mutate(g, 200, neg, rng).values[1] < 0 for _ in range(500))


def test_onsite_genes_stay_non_negative():
    lo, hi = gene_bounds(parse("<A|B>AA100AB500"), True)
    assert lo.tolist() == [0, -999] and hi.tolist() == [999, 999]


def test_anneal_schedule():
    cfg = GaConfig()
    assert anneal_mu(0, cfg, 3) == 200
    assert anneal_mu(199, cfg, 3) == 1
    mid = 200 + (1 - 200) * 100 / 199
    assert anneal_mu(100, cfg, 3) == round(mid) == 100
    assert anneal_mu(0, cfg, 4) == 2000
    seq = [anneal_mu(g, cfg, 3) for g in range(200)]
    assert seq == sorted(seq, reverse=True)


def test_config_validation():
    t = uniform_chain(3)
    for bad in (
        replace(SMALL, population=1),
        replace(SMALL, generations=0),
        replace(SMALL, mu_initial=1, mu_final=5),
        replace(SMALL, elitism=32),
        replace(SMALL, workers=0),
    ):
        with pytest.raises(ConfigError):
            run_ga(t, bad)


# -- drivers ------------------------------------------------------------------


def test_single_generation_is_initial_population():
    t = uniform_chain(5)
    result = run_ga(t, replace(SMALL, generations=1))
    assert len(result.logs) == 1
    (rec,) = evaluate([t], SMALL)
    assert result.best.genome == t and result.best.score == rec.score
    log = result.logs[0]
    assert log.worst == log.average == log.best


def test_same_seed_same_run():
    t = uniform_chain(5)
    a = run_ga(t, SMALL)
    b = run_ga(t, SMALL)
    assert a.logs == b.logs and a.best == b.best
    c = run_ga(t, replace(SMALL, seed=4))
    assert c.logs != a.logs


def test_workers_do_not_change_run():
    t = uniform_chain(5)
    cfg = replace(SMALL, population=200)
    assert run_ga(t, cfg).logs == run_ga(t, replace(cfg, workers=2)).logs


def test_log_invariants_and_children_share_template():
    t = parse("<A|E>AB500BC500CD500DE500@4.00")
    result = run_ga(t, SMALL)
    for entry in result.logs:
        assert entry.worst <= entry.average <= entry.best
        g = parse(entry.best_genome)
        assert g.structure() == t.structure()


def test_elitism_never_loses_the_best():
    t = uniform_chain(6)
    result = run_ga(t, replace(SMALL, elitism=2, generations=12))
    best = [e.best for e in result.logs]
    assert all(x <= y for x, y in zip(best, best[1:]))


def test_target_fitness_stops_early():
    t = uniform_chain(3)
    result = run_ga(t, replace(SMALL, target_fitness=1.0))
    assert len(result.logs) == 1


def test_callback_stops():
    t = uniform_chain(4)
    result = run_ga(t, SMALL, callback=lambda e: e.generation == 2)
    assert len(result.logs) == 3


def test_ga_improves_short_chain():
    t = uniform_chain(5)
    result = run_ga(t, replace(SMALL, population=128, generations=25, seed=0))
    assert result.best.f_max >= 0.99
    assert result.best.f_max > result.logs[0].best_f_max


def test_random_search_two_site():
    t = parse("<A|B>AB500")
    one = random_search(t, SMALL, budget=1)
    assert one.evaluations == 1
    res = random_search(t, SMALL, budget=100)
    assert res.evaluations == 100
    # any nonzero coupling gives the same trace in t*Jmax units; the sampled
    # maximum of sin^2 on the default grid sits at 11.0
    assert res.best.f_max == pytest.approx(math.sin(11.0) ** 2, abs=1e-12)


def test_random_search_threshold_count():
    t = parse("<A|B>AB500")
    res = random_search(t, SMALL, budget=500, threshold=0.99, stop_at_threshold=True)
    assert res.evals_to_threshold == 1
    with pytest.raises(ConfigError):
        random_search(t, SMALL, budget=0)
