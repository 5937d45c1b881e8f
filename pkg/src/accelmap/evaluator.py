"""End-to-end latency of a complete mapping.

A mapping assigns disjoint accelerator sets a design each and a contiguous
layer range each; every layer carries one parallelism strategy. Sets execute
sequentially in layer order (single-image inference, no pipelining): the
total is the sum of per-set compute, collective and intra-set redistribution
costs plus the boundary activation transfers between consecutive sets.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import comm
from .designs import AcceleratorDesign, layer_cycles
from .errors import ValidationError
from .sharding import (
    ParallelismStrategy,
    in_partition_key,
    out_partition_key,
    shard_layout,
)
from .topology import AccSetCandidate, SystemTopology, inter_set_path_bandwidth
from .workload import ConvLayer, Workload


@dataclass(frozen=True)
class Mapping:
    """Full solution: set partition, per-set design, layer ranges, strategies."""

    accsets: tuple[AccSetCandidate, ...]
    config: tuple[AcceleratorDesign, ...]          # design per accset
    ranges: tuple[tuple[int, int], ...]            # half-open [lo, hi) per accset
    strategies: tuple[ParallelismStrategy, ...]    # one per layer

    def owner_of(self, layer_index: int) -> int:
        for s, (lo, hi) in enumerate(self.ranges):
            if lo <= layer_index < hi:
                return s
        raise ValidationError(f"layer {layer_index} not covered by any range")


@dataclass(frozen=True)
class SetCost:
    members: tuple[int, ...]
    design_id: str
    layers: tuple[int, int]
    compute_s: float
    allreduce_s: float
    ss_ring_s: float
    redistribution_s: float
    memory_bytes: int
    mem_ok: bool

    @property
    def total_s(self) -> float:
        return self.compute_s + self.allreduce_s + self.ss_ring_s + self.redistribution_s


@dataclass(frozen=True)
class LatencyReport:
    total_s: float
    per_set: tuple[SetCost, ...]
    inter_set_s: float
    memory_per_acc: int     # worst set's per-accelerator footprint
    valid: bool

    @property
    def total_ms(self) -> float:
        return self.total_s * 1e3


def validate_mapping(mapping: Mapping, workload: Workload) -> None:
    n = len(workload)
    if not (len(mapping.accsets) == len(mapping.config) == len(mapping.ranges)):
        raise ValidationError("accsets, config and ranges must have equal length")
    if len(mapping.strategies) != n:
        raise ValidationError(f"need one strategy per layer ({n}), got {len(mapping.strategies)}")
    used: set[int] = set()
    for accset in mapping.accsets:
        overlap = used & set(accset.members)
        if overlap:
            raise ValidationError(f"accelerator sets overlap on {sorted(overlap)}")
        used.update(accset.members)
    cursor = 0
    for idx, (lo, hi) in enumerate(mapping.ranges):
        if lo != cursor or hi <= lo:
            raise ValidationError(
                f"ranges must be contiguous non-empty segments; set {idx} has [{lo},{hi})"
            )
        cursor = hi
    if cursor != n:
        raise ValidationError(f"ranges cover layers 0..{cursor - 1}, workload has {n}")
    for idx, ((lo, hi), accset) in enumerate(zip(mapping.ranges, mapping.accsets)):
        for l in range(lo, hi):
            if mapping.strategies[l].p != len(accset):
                raise ValidationError(
                    f"layer {l}: strategy degree {mapping.strategies[l].p} "
                    f"!= |accset {idx}| = {len(accset)}"
                )


def heterogeneous_set_compute(
    designs: list[AcceleratorDesign], layer: ConvLayer, strategy: ParallelismStrategy,
    elem_bytes: int = 2,
) -> float:
    """Compute seconds for one layer on a set with per-member designs.

    Members stall on the slowest accelerator: each phase takes the max over
    members of that member's shard latency under its own design.
    """
    if len(designs) != strategy.p:
        raise ValidationError("need exactly one design per set member")
    layout = shard_layout(layer, strategy, elem_bytes)
    phase = max(layer_cycles(d, layout.per_phase_layer) / d.freq for d in designs)
    return layout.phases * phase


class MappingEvaluator:
    """Latency evaluator bound to one workload/topology/precision.

    Pure with respect to its inputs; per-layer costs are memoized internally
    (idempotent writes, safe to share across threads).
    """

    def __init__(self, workload: Workload, topo: SystemTopology, elem_bytes: int = 2):
        if elem_bytes < 1:
            raise ValidationError("elem_bytes must be >= 1")
        self.workload = workload
        self.topo = topo
        self.elem_bytes = elem_bytes
        self._layer_cache: dict = {}

    # -- per-layer building block ------------------------------------------

    def layer_cost(
        self, design: AcceleratorDesign, layer: ConvLayer,
        strategy: ParallelismStrategy, intra_bw: float,
    ) -> tuple[float, float, float, int, int]:
        """(compute_s, allreduce_s, ss_ring_s, weight_bytes, transient_bytes)."""
        key = (design.id, layer.index, strategy.key(), intra_bw)
        hit = self._layer_cache.get(key)
        if hit is not None:
            return hit
        layout = shard_layout(layer, strategy, self.elem_bytes)
        compute = layout.phases * layer_cycles(design, layout.per_phase_layer) / design.freq
        allreduce = 0.0
        if layout.needs_allreduce:
            allreduce = comm.allreduce_cost(
                layout.out_shard * self.elem_bytes, layout.reduce_group,
                intra_bw, self.topo.msg_latency,
            ).seconds
        ring = 0.0
        if layout.phases > 1:
            ring = comm.ss_ring_cost(
                layout.ss_circulating * self.elem_bytes, strategy.p,
                intra_bw, self.topo.msg_latency,
            ).seconds
        weight_bytes = layout.weight_shard * self.elem_bytes
        transient = (layout.in_shard + layout.out_shard + layout.ss_circulating) * self.elem_bytes
        result = (compute, allreduce, ring, weight_bytes, transient)
        self._layer_cache[key] = result
        return result

    def redistribution_seconds(
        self, accset: AccSetCandidate, prev_layer: ConvLayer,
        prev_strategy: ParallelismStrategy, next_strategy: ParallelismStrategy,
    ) -> float:
        """Cost of re-laying out prev_layer's output inside the same set."""
        bw = accset.intra_bw if accset.intra_bw > 0 else self.topo.bw_host[accset.members[0]]
        return comm.redistribute_cost(
            prev_layer.out_elems() * self.elem_bytes,
            same_set=True,
            same_partitioning=out_partition_key(prev_strategy) == in_partition_key(next_strategy),
            bandwidth=bw,
            msg_latency=self.topo.msg_latency,
        ).seconds

    # -- one accelerator set over a contiguous range ------------------------

    def set_cost(
        self, accset: AccSetCandidate, design: AcceleratorDesign,
        layer_range: tuple[int, int], strategies: tuple[ParallelismStrategy, ...],
    ) -> SetCost:
        lo, hi = layer_range
        if hi - lo != len(strategies):
            raise ValidationError("one strategy per layer in the range")
        compute = allreduce = ring = redist = 0.0
        weights = 0
        peak_transient = 0
        for offset, layer_idx in enumerate(range(lo, hi)):
            layer = self.workload.layers[layer_idx]
            strategy = strategies[offset]
            c, a, r, wb, tb = self.layer_cost(design, layer, strategy, accset.intra_bw)
            compute += c
            allreduce += a
            ring += r
            weights += wb
            peak_transient = max(peak_transient, tb)
            if offset > 0:
                redist += self.redistribution_seconds(
                    accset, self.workload.layers[layer_idx - 1],
                    strategies[offset - 1], strategy,
                )
        memory = weights + peak_transient
        limit = min(self.topo.mem[m] for m in accset.members)
        return SetCost(
            members=accset.members,
            design_id=design.id,
            layers=(lo, hi),
            compute_s=compute,
            allreduce_s=allreduce,
            ss_ring_s=ring,
            redistribution_s=redist,
            memory_bytes=memory,
            mem_ok=memory <= limit,
        )

    # -- whole mapping -------------------------------------------------------

    def evaluate(self, mapping: Mapping) -> LatencyReport:
        validate_mapping(mapping, self.workload)
        per_set = []
        for accset, design, rng in zip(mapping.accsets, mapping.config, mapping.ranges):
            strategies = mapping.strategies[rng[0]:rng[1]]
            per_set.append(self.set_cost(accset, design, rng, strategies))

        inter = 0.0
        for prev in range(len(per_set) - 1):
            boundary_layer = self.workload.layers[mapping.ranges[prev][1] - 1]
            n_bytes = boundary_layer.out_elems() * self.elem_bytes
            bw, via_host = inter_set_path_bandwidth(
                self.topo, mapping.accsets[prev], mapping.accsets[prev + 1]
            )
            inter += comm.p2p_cost(n_bytes, bw, self.topo.msg_latency, via_host).seconds

        total = sum(s.total_s for s in per_set) + inter
        return LatencyReport(
            total_s=total,
            per_set=tuple(per_set),
            inter_set_s=inter,
            memory_per_acc=max(s.memory_bytes for s in per_set),
            valid=all(s.mem_ok for s in per_set),
        )
