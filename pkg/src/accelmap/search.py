"""Two-level genetic search over accelerator sets, designs and strategies.

Outer level: which accelerator-set candidates to use, which design each one
gets, and where the contiguous layer ranges are cut. Inner level: per-layer
(ES, SS) strategies for one set, its design and its layer range. The inner
optimum feeds the outer fitness; inner results are memoized because the
outer population revisits identical subproblems constantly.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from math import ceil

import numpy as np

from . import comm
from .designs import AcceleratorDesign, layer_cycles, profile_designs
from .errors import BaselineError, ValidationError
from .evaluator import LatencyReport, Mapping, MappingEvaluator
from .sharding import (
    EMPTY_STRATEGY,
    Dim,
    ParallelismStrategy,
    dim_size,
    enumerate_strategies,
    factorizations,
    feasible_strategies_exist,
)
from .topology import (
    AccSetCandidate,
    SystemTopology,
    bottleneck_bandwidth,
    enumerate_accset_candidates,
    inter_set_path_bandwidth,
)
from .workload import ConvLayer, Workload

GENES_PER_LAYER = 14  # 6 ES priorities, 6 SS priorities, SS enable, factorization

# Latency stand-in for subproblems with no feasible strategy at all; large
# enough that any feasible alternative dominates.
INFEASIBLE_LATENCY = 1e9

MEMORY_PENALTY = 10.0


@dataclass(frozen=True)
class GAConfig:
    population: int = 32
    generations: int = 50
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    crossover_rate: float = 0.8
    elites: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.population < 2:
            raise ValidationError("population must be >= 2")
        if self.generations < 1:
            raise ValidationError("generations must be >= 1")
        for name in ("mutation_rate", "crossover_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"{name} must be within [0, 1]")
        if self.mutation_sigma <= 0:
            raise ValidationError("mutation_sigma must be positive")
        if not 0 <= self.elites < self.population:
            raise ValidationError("elites must be in [0, population)")


DEFAULT_OUTER = GAConfig(population=32, generations=50)
DEFAULT_INNER = GAConfig(population=16, generations=30)


# --------------------------------------------------------------------------
# Gene decoding.
# --------------------------------------------------------------------------

def decode_inner(genes: list[float], layer: ConvLayer, p: int) -> ParallelismStrategy | None:
    """Turn one layer's 14 genes into a strategy valid for the layer.

    Dimensions with higher priority genes are split first; the factorization
    gene picks how p spreads over the two ES dims. Falls back to fewer ES
    dims when a dimension cannot absorb its factor, and to None when no
    valid ES assignment exists at all.
    """
    if p == 1:
        return EMPTY_STRATEGY
    es_order = sorted(Dim, key=lambda d: (-genes[d], d))
    facts = factorizations(p)
    f1, f2 = facts[min(int(genes[13] * len(facts)), len(facts) - 1)]

    es: tuple[tuple[Dim, int], ...] | None = None
    first = next((d for d in es_order if f1 <= dim_size(layer, d)), None)
    if first is not None:
        second = next(
            (d for d in es_order if d != first and f2 <= dim_size(layer, d)), None
        )
        if second is not None:
            es = ((first, f1), (second, f2))
    if es is None:
        single = next((d for d in es_order if p <= dim_size(layer, d)), None)
        if single is None:
            return None
        es = ((single, p),)

    strategy = ParallelismStrategy(es=es, p=p)
    if genes[12] > 0.5:
        ss_order = sorted(Dim, key=lambda d: (-genes[6 + d], d))
        for cand in ss_order:
            if strategy.es_factor(cand) * p <= dim_size(layer, cand):
                strategy = ParallelismStrategy(es=es, ss=cand, p=p)
                break
    return strategy


def decode_outer(
    genes: np.ndarray,
    candidates: list[AccSetCandidate],
    designs: list[AcceleratorDesign],
    n_layers: int,
) -> list[tuple[AccSetCandidate, AcceleratorDesign, tuple[int, int]]]:
    """Decode an outer genome into (set, design, layer range) slots.

    Highest-gene candidates are kept greedily while pairwise disjoint; each
    kept set takes the design with the highest gene in its slot; normalized
    cut genes place the contiguous range boundaries. Slots whose range comes
    out empty are dropped (idle accelerators are allowed).
    """
    n_cand = len(candidates)
    n_designs = len(designs)
    values = genes.tolist()
    cand_genes = values[:n_cand]
    order = sorted(range(n_cand), key=lambda i: (-cand_genes[i], i))
    selected: list[int] = []
    used: set[int] = set()
    for idx in order:
        members = set(candidates[idx].members)
        if not members & used:
            selected.append(idx)
            used |= members
    k = len(selected)

    plans = []
    for slot, idx in enumerate(selected):
        block = values[n_cand + slot * n_designs : n_cand + (slot + 1) * n_designs]
        best = 0
        for d in range(1, n_designs):
            if block[d] > block[best]:
                best = d
        plans.append((candidates[idx], designs[best]))

    cut_base = n_cand + _max_slots(candidates) * n_designs
    cuts = sorted(
        min(n_layers, max(0, round(values[cut_base + i] * n_layers)))
        for i in range(k - 1)
    )
    bounds = [0] + cuts + [n_layers]

    result = []
    for slot, (accset, design) in enumerate(plans):
        lo, hi = bounds[slot], bounds[slot + 1]
        if hi > lo:
            result.append((accset, design, (lo, hi)))
    return result


def _max_slots(candidates: list[AccSetCandidate]) -> int:
    # Greedy selection picks pairwise disjoint sets, so it can never keep
    # more sets than there are accelerators mentioned by the candidates.
    return len({m for c in candidates for m in c.members})


def outer_genome_size(candidates: list[AccSetCandidate], n_designs: int) -> int:
    slots = _max_slots(candidates)
    return len(candidates) + slots * n_designs + max(slots - 1, 0)


def init_design_genes(scores: list[float]) -> list[float]:
    """First-generation design genes are the normalized performance scores."""
    return list(scores)


def genes_for_strategy(strategy: ParallelismStrategy) -> list[float]:
    """A 14-gene block that decode_inner maps back onto `strategy`.

    Used to seed inner populations with known-good strategies; the ES
    priorities put the strategy's dims on top, the factorization gene hits
    the matching bucket's center.
    """
    genes = [0.0] * GENES_PER_LAYER
    low = iter((0.30, 0.25, 0.20, 0.15, 0.10, 0.05))
    facts = factorizations(strategy.p)
    es = strategy.es if strategy.es else ()
    if strategy.p == 1 or not es:
        fact_idx = 0
        tops: tuple = ()
    elif len(es) == 1:
        tops = (es[0][0],)
        fact_idx = facts.index((strategy.p, 1))
    else:
        (d1, f1), (d2, f2) = es
        if (f1, f2) in facts:
            tops = (d1, d2)
            fact_idx = facts.index((f1, f2))
        else:
            tops = (d2, d1)
            fact_idx = facts.index((f2, f1))
    for rank, dim in enumerate(tops):
        genes[dim] = 0.95 - 0.1 * rank
    for dim in Dim:
        if dim not in tops:
            genes[dim] = next(low)
    for dim in Dim:
        genes[6 + dim] = 0.9 if strategy.ss == dim else 0.2 + 0.01 * dim
    genes[12] = 0.95 if strategy.ss is not None else 0.05
    genes[13] = (fact_idx + 0.5) / len(facts)
    return genes


# --------------------------------------------------------------------------
# Generic generational GA core (minimizing).
# --------------------------------------------------------------------------

def _evolve(
    rng: np.random.Generator,
    population: np.ndarray,
    fitness_of,
    cfg: GAConfig,
) -> tuple[np.ndarray, float, list[float]]:
    """Run the GA loop; returns (best genome, best fitness, history)."""
    pop, n_genes = population.shape
    history: list[float] = []
    best_genome = population[0].copy()
    best_fit = float("inf")

    for _ in range(cfg.generations):
        fits = [fitness_of(population[i]) for i in range(pop)]
        ranking = sorted(range(pop), key=lambda i: (fits[i], i))
        if fits[ranking[0]] < best_fit:
            best_fit = fits[ranking[0]]
            best_genome = population[ranking[0]].copy()
        history.append(best_fit)

        next_pop = [population[i].copy() for i in ranking[: cfg.elites]]
        while len(next_pop) < pop:
            ia, ib = rng.integers(0, pop, size=2)
            pa = population[ia] if (fits[ia], ia) <= (fits[ib], ib) else population[ib]
            ia, ib = rng.integers(0, pop, size=2)
            pb = population[ia] if (fits[ia], ia) <= (fits[ib], ib) else population[ib]
            if rng.random() < cfg.crossover_rate:
                mask = rng.random(n_genes) < 0.5
                child1 = np.where(mask, pa, pb)
                child2 = np.where(mask, pb, pa)
            else:
                child1, child2 = pa.copy(), pb.copy()
            for child in (child1, child2):
                if len(next_pop) >= pop:
                    break
                mmask = rng.random(n_genes) < cfg.mutation_rate
                n_mut = int(mmask.sum())
                if n_mut:
                    child = child.copy()
                    child[mmask] = np.clip(
                        child[mmask] + rng.normal(0.0, cfg.mutation_sigma, n_mut),
                        0.0, 1.0,
                    )
                next_pop.append(child)
        population = np.stack(next_pop)

    # Account for the final generation's offspring.
    fits = [fitness_of(population[i]) for i in range(pop)]
    ranking = sorted(range(pop), key=lambda i: (fits[i], i))
    if fits[ranking[0]] < best_fit:
        best_fit = fits[ranking[0]]
        best_genome = population[ranking[0]].copy()
    history.append(best_fit)
    return best_genome, best_fit, history


def _derive_seed(base: int, *parts) -> int:
    tag = "|".join(str(p) for p in parts).encode()
    return (zlib.crc32(tag) ^ (base & 0xFFFFFFFF)) & 0xFFFFFFFF


# --------------------------------------------------------------------------
# Inner level: strategies for one set.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InnerResult:
    strategies: tuple[ParallelismStrategy, ...]
    latency: float        # penalized when memory-infeasible
    raw_latency: float
    mem_ok: bool
    history: tuple[float, ...] = ()


class SearchEngine:
    """Shared state of one search run: evaluator, candidates, memo tables."""

    def __init__(
        self,
        workload: Workload,
        topo: SystemTopology,
        designs: list[AcceleratorDesign],
        inner_cfg: GAConfig,
        seed: int,
        elem_bytes: int = 2,
    ):
        if not designs:
            raise ValidationError("need at least one design")
        self.workload = workload
        self.topo = topo
        self.designs = designs
        self.inner_cfg = inner_cfg
        self.seed = seed
        self.evaluator = MappingEvaluator(workload, topo, elem_bytes)
        self.candidates = [
            c for c in enumerate_accset_candidates(topo)
            if len(c.members) & (len(c.members) - 1) == 0
        ]
        self._inner_memo: dict = {}
        self._outer_memo: dict = {}
        self._space_memo: dict = {}

    # -- inner GA -----------------------------------------------------------

    def inner(
        self, accset: AccSetCandidate, design: AcceleratorDesign,
        layer_range: tuple[int, int],
    ) -> InnerResult:
        lo, hi = layer_range
        mem_limit = min(self.topo.mem[m] for m in accset.members)
        key = (len(accset), accset.intra_bw, design.id, lo, hi, mem_limit)
        hit = self._inner_memo.get(key)
        if hit is not None:
            return hit
        result = self._solve_inner(accset, design, layer_range, key)
        self._inner_memo[key] = result
        return result

    def _solve_inner(self, accset, design, layer_range, key) -> InnerResult:
        lo, hi = layer_range
        p = len(accset)
        layers = self.workload.layers[lo:hi]

        if p == 1:
            strategies = (EMPTY_STRATEGY,) * (hi - lo)
            cost = self.evaluator.set_cost(accset, design, layer_range, strategies)
            return InnerResult(strategies, cost.total_s if cost.mem_ok
                               else cost.total_s * MEMORY_PENALTY,
                               cost.total_s, cost.mem_ok)

        if any(not feasible_strategies_exist(l, p) for l in layers):
            return InnerResult((), INFEASIBLE_LATENCY * (hi - lo),
                               INFEASIBLE_LATENCY * (hi - lo), False)

        cfg = self.inner_cfg
        base = cfg.seed if cfg.seed is not None else self.seed
        rng = np.random.default_rng(_derive_seed(base, "inner", *key))
        n_genes = GENES_PER_LAYER * len(layers)
        population = rng.random((cfg.population, n_genes))
        # Redistribution costs couple consecutive layers, which makes the
        # all-layers-same-strategy region hard to reach by per-gene moves.
        # Seed the population from two heuristic corners: the cheapest
        # uniform strategies (no redistribution by construction) and the
        # per-layer independent optimum, leaving the rest random.
        seeds = self._seed_genomes(accset, design, layers, limit=cfg.population - 2)
        for row, genome in enumerate(seeds):
            population[row] = genome

        def fitness_of(genome: np.ndarray) -> float:
            return self._inner_fitness(genome, accset, design, layer_range)[0]

        best_genome, _, history = _evolve(rng, population, fitness_of, cfg)
        fit, strategies, cost = self._inner_fitness(best_genome, accset, design, layer_range)
        return InnerResult(strategies, fit, cost.total_s, cost.mem_ok, tuple(history))

    def _strategy_space(self, layer: ConvLayer, p: int) -> dict:
        memo_key = (layer.index, p)
        space = self._space_memo.get(memo_key)
        if space is None:
            space = {}
            for s in enumerate_strategies(layer, p):
                space.setdefault(s.key(), s)
            self._space_memo[memo_key] = space
        return space

    def _seed_genomes(self, accset, design, layers, limit: int) -> list[np.ndarray]:
        """Heuristic starting genomes for the inner population.

        Ranks every strategy that is valid for all layers of the range by its
        summed per-layer cost (uniform use means zero redistribution), and
        adds one genome taking each layer's individually cheapest strategy.
        """
        if limit <= 0:
            return []
        p = len(accset)

        def node_cost(layer, strategy) -> float:
            c, a, r, _, _ = self.evaluator.layer_cost(
                design, layer, strategy, accset.intra_bw
            )
            return c + a + r

        spaces = [self._strategy_space(layer, p) for layer in layers]
        common = set(spaces[0])
        for space in spaces[1:]:
            common &= set(space)
        uniform = []
        for skey in common:
            strategy = spaces[0][skey]
            total = sum(node_cost(layer, strategy) for layer in layers)
            uniform.append((total, repr(skey), strategy))
        uniform.sort(key=lambda t: (t[0], t[1]))

        genomes = [
            np.tile(np.array(genes_for_strategy(s)), len(layers))
            for _, _, s in uniform[: limit - 1]
        ]

        per_layer = []
        for layer, space in zip(layers, spaces):
            best = min(space.values(), key=lambda s: (node_cost(layer, s), repr(s.key())))
            per_layer.extend(genes_for_strategy(best))
        genomes.insert(min(1, len(genomes)), np.array(per_layer))
        return genomes[:limit]

    def _inner_fitness(self, genome, accset, design, layer_range):
        lo, hi = layer_range
        values = genome.tolist()
        strategies = []
        for offset, layer in enumerate(self.workload.layers[lo:hi]):
            genes = values[offset * GENES_PER_LAYER : (offset + 1) * GENES_PER_LAYER]
            strategy = decode_inner(genes, layer, len(accset))
            if strategy is None:
                raise ValidationError("unexpected infeasible layer in inner GA")
            strategies.append(strategy)
        strategies = tuple(strategies)
        cost = self.evaluator.set_cost(accset, design, layer_range, strategies)
        fit = cost.total_s if cost.mem_ok else cost.total_s * MEMORY_PENALTY
        return fit, strategies, cost

    # -- outer fitness ------------------------------------------------------

    def boundary_cost(self, producer: AccSetCandidate, consumer: AccSetCandidate,
                      boundary_layer: ConvLayer) -> float:
        n_bytes = boundary_layer.out_elems() * self.evaluator.elem_bytes
        bw, via_host = inter_set_path_bandwidth(self.topo, producer, consumer)
        return comm.p2p_cost(n_bytes, bw, self.topo.msg_latency, via_host).seconds

    def plan_latency(self, plan) -> float:
        """Aggregated latency of a decoded outer plan (inner GAs memoized)."""
        sig = tuple((s.members, d.id, rng) for s, d, rng in plan)
        hit = self._outer_memo.get(sig)
        if hit is not None:
            return hit
        total = 0.0
        for accset, design, layer_range in plan:
            total += self.inner(accset, design, layer_range).latency
        for i in range(len(plan) - 1):
            boundary_layer = self.workload.layers[plan[i][2][1] - 1]
            total += self.boundary_cost(plan[i][0], plan[i + 1][0], boundary_layer)
        self._outer_memo[sig] = total
        return total

    def plan_to_mapping(self, plan) -> Mapping:
        strategies: list[ParallelismStrategy] = []
        for accset, design, layer_range in plan:
            strategies.extend(self.inner(accset, design, layer_range).strategies)
        return Mapping(
            accsets=tuple(s for s, _, _ in plan),
            config=tuple(d for _, d, _ in plan),
            ranges=tuple(r for _, _, r in plan),
            strategies=tuple(strategies),
        )


# --------------------------------------------------------------------------
# Top-level searches.
# --------------------------------------------------------------------------

@dataclass
class SearchResult:
    mapping: Mapping
    report: LatencyReport
    seed: int | None = None
    outer_history: tuple[float, ...] = ()
    evaluations: int = 0


def run_outer_ga(
    workload: Workload,
    topo: SystemTopology,
    designs: list[AcceleratorDesign],
    cfg_outer: GAConfig = DEFAULT_OUTER,
    cfg_inner: GAConfig = DEFAULT_INNER,
    seed: int = 0,
    elem_bytes: int = 2,
) -> SearchResult:
    """Full two-level search; deterministic for a fixed seed."""
    engine = SearchEngine(workload, topo, designs, cfg_inner, seed, elem_bytes)
    _, scores = profile_designs(designs, workload)
    n_cand = len(engine.candidates)
    n_designs = len(designs)
    slots = _max_slots(engine.candidates)
    n_genes = n_cand + slots * n_designs + max(slots - 1, 0)

    base = cfg_outer.seed if cfg_outer.seed is not None else seed
    rng = np.random.default_rng(_derive_seed(base, "outer"))
    population = rng.random((cfg_outer.population, n_genes))
    design_block = np.array(init_design_genes(scores) * slots)
    population[:, n_cand : n_cand + slots * n_designs] = design_block

    evals = 0

    def fitness_of(genome: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        plan = decode_outer(genome, engine.candidates, designs, len(workload))
        return engine.plan_latency(plan)

    best_genome, _, history = _evolve(rng, population, fitness_of, cfg_outer)
    plan = decode_outer(best_genome, engine.candidates, designs, len(workload))
    mapping = engine.plan_to_mapping(plan)
    report = engine.evaluator.evaluate(mapping)
    return SearchResult(mapping, report, seed, tuple(history), evals)


def run_inner_ga(
    accset: AccSetCandidate,
    layer_range: tuple[int, int],
    design: AcceleratorDesign,
    workload: Workload,
    topo: SystemTopology,
    cfg: GAConfig = DEFAULT_INNER,
    seed: int = 0,
    elem_bytes: int = 2,
) -> tuple[tuple[ParallelismStrategy, ...], float]:
    """Standalone entry to the strategy search for one accelerator set."""
    engine = SearchEngine(workload, topo, [design], cfg, seed, elem_bytes)
    result = engine.inner(accset, design, layer_range)
    return result.strategies, result.latency


def _balanced_factorization(p: int) -> tuple[int, int]:
    f1, f2 = max(
        ((f, p // f) for f in range(1, p + 1) if p % f == 0),
        key=lambda pair: (-abs(pair[0] - pair[1]), min(pair)),
    )
    return (f1, f2) if f1 >= f2 else (f2, f1)


def baseline_strategy(layer: ConvLayer, p: int) -> ParallelismStrategy:
    """ES along the two longest loop dims, balanced factorization, no SS."""
    if p == 1:
        return EMPTY_STRATEGY
    f1, f2 = _balanced_factorization(p)
    order = sorted(Dim, key=lambda d: (-dim_size(layer, d), d))
    first = next((d for d in order if f1 <= dim_size(layer, d)), None)
    if first is None:
        raise ValidationError(f"layer {layer.index}: no dimension can absorb {f1}")
    if f2 > 1:
        second = next(
            (d for d in order if d != first and f2 <= dim_size(layer, d)), None
        )
        if second is None:
            raise ValidationError(f"layer {layer.index}: no second dimension for {f2}")
        return ParallelismStrategy(es=((first, f1), (second, f2)), p=p)
    return ParallelismStrategy(es=((first, f1),), p=p)


def run_baseline(
    workload: Workload,
    topo: SystemTopology,
    designs: list[AcceleratorDesign],
    elem_bytes: int = 2,
) -> SearchResult:
    """Group-aligned two-set mapper: half the layers per group, the design
    with the lowest total compute cycles per set, ES on the two longest dims."""
    groups = topo.direct_groups()
    if len(groups) != 2:
        raise BaselineError(
            f"baseline requires a topology with exactly two groups, found {len(groups)}"
        )
    evaluator = MappingEvaluator(workload, topo, elem_bytes)
    n = len(workload)
    cut = min(ceil(n / 2), n)
    ranges = [(0, cut)] + ([(cut, n)] if cut < n else [])
    accsets = [
        AccSetCandidate(group, bottleneck_bandwidth(topo, group))
        for group in groups[: len(ranges)]
    ]

    config = []
    for accset, (lo, hi) in zip(accsets, ranges):
        totals = [
            sum(layer_cycles(d, l) for l in workload.layers[lo:hi]) for d in designs
        ]
        best = 0
        for d in range(1, len(designs)):
            if totals[d] < totals[best]:
                best = d
        config.append(designs[best])

    strategies = []
    for accset, (lo, hi) in zip(accsets, ranges):
        for l in range(lo, hi):
            strategies.append(baseline_strategy(workload.layers[l], len(accset)))

    mapping = Mapping(
        accsets=tuple(accsets),
        config=tuple(config),
        ranges=tuple(ranges),
        strategies=tuple(strategies),
    )
    report = evaluator.evaluate(mapping)
    return SearchResult(mapping, report)
