"""Exhaustive optimum finder for tiny instances, used to validate the GA.

Enumerates every combination of disjoint candidate sets, set order, design
assignment and contiguous layer cuts. Per-layer strategies are optimized
exactly by shortest path over the layer chain: the evaluator's set cost is,
by construction, a sum of per-layer terms plus adjacent redistribution
terms, so dynamic programming over (layer, strategy) nodes returns the same
optimum full enumeration would, without the infeasible strategy-product
blowup. A brute-force cross-check of this equivalence lives in the tests.

Memory constraints are assumed slack: the oracle refuses instances where
its optimum comes out memory-infeasible rather than guess.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import comm
from .designs import AcceleratorDesign
from .errors import OracleLimitError
from .evaluator import Mapping, MappingEvaluator
from .search import SearchResult
from .sharding import ParallelismStrategy, enumerate_strategies
from .topology import (
    AccSetCandidate,
    SystemTopology,
    enumerate_accset_candidates,
    inter_set_path_bandwidth,
)
from .workload import Workload


@dataclass(frozen=True)
class OracleLimits:
    max_layers: int = 4
    max_accs: int = 4
    max_designs: int = 2


def _strategy_space(layer, p) -> list[ParallelismStrategy]:
    seen = set()
    out = []
    for s in enumerate_strategies(layer, p):
        k = s.key()
        if k not in seen:
            seen.add(k)
            out.append(s)
    return out


class _SetSolver:
    """Exact per-set strategy optimization with memoization."""

    def __init__(self, evaluator: MappingEvaluator):
        self.evaluator = evaluator
        self._memo: dict = {}

    def solve(
        self, accset: AccSetCandidate, design: AcceleratorDesign,
        layer_range: tuple[int, int],
    ) -> tuple[float, tuple[ParallelismStrategy, ...]]:
        key = (len(accset), accset.intra_bw, design.id, layer_range)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        lo, hi = layer_range
        p = len(accset)
        layers = self.evaluator.workload.layers[lo:hi]
        spaces = [_strategy_space(l, p) for l in layers]
        if any(not space for space in spaces):
            result = (float("inf"), ())
        else:
            result = self._shortest_path(accset, design, layers, spaces)
        self._memo[key] = result
        return result

    def _shortest_path(self, accset, design, layers, spaces):
        def node(layer, strategy) -> float:
            c, a, r, _, _ = self.evaluator.layer_cost(
                design, layer, strategy, accset.intra_bw
            )
            return c + a + r

        dp = [node(layers[0], s) for s in spaces[0]]
        back: list[list[int]] = []
        for li in range(1, len(layers)):
            prev_layer = layers[li - 1]
            cur, arg = [], []
            for s_next in spaces[li]:
                best_cost = float("inf")
                best_prev = 0
                for pi, s_prev in enumerate(spaces[li - 1]):
                    cost = dp[pi] + self.evaluator.redistribution_seconds(
                        accset, prev_layer, s_prev, s_next
                    )
                    if cost < best_cost:
                        best_cost = cost
                        best_prev = pi
                cur.append(best_cost + node(layers[li], s_next))
                arg.append(best_prev)
            dp = cur
            back.append(arg)

        best_last = min(range(len(dp)), key=lambda i: (dp[i], i))
        chosen = [best_last]
        for arg in reversed(back):
            chosen.append(arg[chosen[-1]])
        chosen.reverse()
        strategies = tuple(spaces[i][c] for i, c in enumerate(chosen))
        return dp[best_last], strategies


def _disjoint_families(candidates: list[AccSetCandidate]) -> list[tuple[int, ...]]:
    """All non-empty tuples of pairwise disjoint candidates (by index)."""
    out: list[tuple[int, ...]] = []

    def extend(start: int, picked: tuple[int, ...], used: frozenset):
        for i in range(start, len(candidates)):
            members = frozenset(candidates[i].members)
            if not members & used:
                family = picked + (i,)
                out.append(family)
                extend(i + 1, family, used | members)

    extend(0, (), frozenset())
    return out


def _compositions(n: int, k: int):
    """Ways to cut 0..n-1 into k contiguous non-empty ranges."""
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        yield tuple((bounds[i], bounds[i + 1]) for i in range(k))


def run_oracle(
    workload: Workload,
    topo: SystemTopology,
    designs: list[AcceleratorDesign],
    limits: OracleLimits = OracleLimits(),
    elem_bytes: int = 2,
) -> SearchResult:
    """True optimum by exhaustive enumeration; refuses oversized instances."""
    n = len(workload)
    problems = []
    if n > limits.max_layers:
        problems.append(f"{n} layers > {limits.max_layers}")
    if topo.n_acc > limits.max_accs:
        problems.append(f"{topo.n_acc} accelerators > {limits.max_accs}")
    if len(designs) > limits.max_designs:
        problems.append(f"{len(designs)} designs > {limits.max_designs}")
    if problems:
        raise OracleLimitError(
            "instance too large for exhaustive search: " + "; ".join(problems)
        )

    evaluator = MappingEvaluator(workload, topo, elem_bytes)
    candidates = [
        c for c in enumerate_accset_candidates(topo)
        if len(c.members) & (len(c.members) - 1) == 0
    ]
    solver = _SetSolver(evaluator)

    best_total = float("inf")
    best_plan = None
    for family in _disjoint_families(candidates):
        k = len(family)
        if k > n:
            continue
        for ordered in itertools.permutations(family):
            sets = [candidates[i] for i in ordered]
            for ranges in _compositions(n, k):
                boundary = 0.0
                for i in range(k - 1):
                    boundary_layer = workload.layers[ranges[i][1] - 1]
                    bw, via_host = inter_set_path_bandwidth(topo, sets[i], sets[i + 1])
                    boundary += comm.p2p_cost(
                        boundary_layer.out_elems() * elem_bytes, bw,
                        topo.msg_latency, via_host,
                    ).seconds
                for assignment in itertools.product(designs, repeat=k):
                    total = boundary
                    parts = []
                    for accset, design, rng in zip(sets, assignment, ranges):
                        cost, strategies = solver.solve(accset, design, rng)
                        total += cost
                        parts.append(strategies)
                    if total < best_total:
                        best_total = total
                        best_plan = (tuple(sets), assignment, ranges, tuple(parts))

    if best_plan is None:
        raise OracleLimitError("no feasible mapping exists for this instance")

    sets, assignment, ranges, parts = best_plan
    strategies: list[ParallelismStrategy] = []
    for part in parts:
        strategies.extend(part)
    mapping = Mapping(
        accsets=sets,
        config=tuple(assignment),
        ranges=ranges,
        strategies=tuple(strategies),
    )
    report = evaluator.evaluate(mapping)
    if not report.valid:
        raise OracleLimitError(
            "oracle optimum violates memory limits; exact search under memory "
            "constraints is unsupported"
        )
    return SearchResult(mapping, report)
