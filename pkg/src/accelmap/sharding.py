"""Intra-layer parallelism strategies over the six convolution loop dims.

Two sharding modes compose:

* Exclusive shards (ES): up to two loop dimensions are split across the
  accelerators of a set; the split factors multiply to the set size p.
  Splitting a reduction dimension (Cin, Kh, Kw) leaves partial outputs that
  must be all-reduced.
* Shared shards (SS): one additional dimension is cut into p shards that
  circulate around a logical ring; computation then runs in p phases, each
  accelerator holding one shared shard at a time.

Tensor membership decides which shards shrink: the input feature map spans
{Cin, H, W}, weights span {Cout, Cin, Kh, Kw}, the output spans {Cout, H, W}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import IntEnum

from .errors import ValidationError
from .topology import AccSetCandidate, SystemTopology
from .workload import ConvLayer


class Dim(IntEnum):
    COUT = 0
    CIN = 1
    H = 2
    W = 3
    KH = 4
    KW = 5

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {Dim.COUT: "Cout", Dim.CIN: "Cin", Dim.H: "H", Dim.W: "W",
           Dim.KH: "Kh", Dim.KW: "Kw"}
_BY_LABEL = {label.lower(): dim for dim, label in _LABELS.items()}

REDUCTION_DIMS = frozenset({Dim.CIN, Dim.KH, Dim.KW})
IN_DIMS = frozenset({Dim.CIN, Dim.H, Dim.W})
WEIGHT_DIMS = frozenset({Dim.COUT, Dim.CIN, Dim.KH, Dim.KW})
OUT_DIMS = frozenset({Dim.COUT, Dim.H, Dim.W})


def dim_size(layer: ConvLayer, dim: Dim) -> int:
    return (layer.c_out, layer.c_in, layer.h, layer.w, layer.k_h, layer.k_w)[dim]


def parse_dim(name: str) -> Dim:
    try:
        return _BY_LABEL[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown dimension {name!r}") from None


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class ParallelismStrategy:
    """(ES, SS) choice for one layer on a set of p accelerators.

    es keeps the dimensions as generated (factors of 1 allowed, so the
    enumeration's 15/90 family bookkeeping survives); effective_es drops
    the no-op entries.
    """

    es: tuple[tuple[Dim, int], ...] = ()
    ss: Dim | None = None
    p: int = 1

    def __post_init__(self):
        if not _is_pow2(self.p):
            raise ValidationError(f"parallelism degree must be a power of two, got {self.p}")
        if len(self.es) > 2:
            raise ValidationError("at most two ES dimensions")
        dims = [d for d, _ in self.es]
        if len(set(dims)) != len(dims):
            raise ValidationError("ES dimensions must be distinct")
        product = 1
        for d, f in self.es:
            if f < 1:
                raise ValidationError(f"ES factor for {d.label} must be >= 1")
            product *= f
        if product != self.p:
            raise ValidationError(
                f"ES factors multiply to {product}, expected p={self.p}"
            )
        if self.ss is not None and self.p == 1:
            raise ValidationError("SS requires p > 1")

    @property
    def effective_es(self) -> tuple[tuple[Dim, int], ...]:
        return tuple((d, f) for d, f in self.es if f > 1)

    @property
    def family(self) -> tuple[frozenset, Dim | None]:
        return frozenset(d for d, _ in self.es), self.ss

    def es_factor(self, dim: Dim) -> int:
        for d, f in self.es:
            if d == dim:
                return f
        return 1

    def total_factor(self, dim: Dim) -> int:
        """Combined split count for a dimension (ES times SS when both hit it)."""
        f = self.es_factor(dim)
        if self.ss == dim:
            f *= self.p
        return f

    def key(self) -> tuple:
        """Canonical semantic identity, used for cost memoization."""
        return (tuple(sorted(self.effective_es)), self.ss, self.p)

    def needs_allreduce(self) -> bool:
        return any(d in REDUCTION_DIMS for d, f in self.es if f > 1)

    def reduce_group(self) -> int:
        group = 1
        for d, f in self.es:
            if d in REDUCTION_DIMS:
                group *= f
        return group

    def violations(self, layer: ConvLayer) -> list[str]:
        """Constraint violations of this strategy bound to a concrete layer."""
        problems = []
        for d, f in self.effective_es:
            if f > dim_size(layer, d):
                problems.append(f"ES factor {f} exceeds {d.label}={dim_size(layer, d)}")
        if self.ss is not None:
            total = self.total_factor(self.ss)
            if total > dim_size(layer, self.ss):
                problems.append(
                    f"SS split {total} exceeds {self.ss.label}={dim_size(layer, self.ss)}"
                )
        return problems


EMPTY_STRATEGY = ParallelismStrategy()


def format_strategy(strategy: ParallelismStrategy) -> str:
    """Human form matching the report notation, e.g. "ES={H,W}, SS=<none>"."""
    es = ",".join(d.label for d, _ in strategy.effective_es)
    ss = strategy.ss.label if strategy.ss is not None else "∅"
    return f"ES={{{es}}}, SS={ss}"


@dataclass(frozen=True)
class ShardLayout:
    """Per-accelerator shard sizes and phase structure of one sharded layer."""

    in_shard: int          # elements, halo included
    weight_shard: int      # elements resident at any time
    out_shard: int         # elements owned after the layer completes
    needs_allreduce: bool
    reduce_group: int      # accelerators sharing one output region
    phases: int
    per_phase_layer: ConvLayer
    ss_circulating: int    # elements sent per ring step (0 without SS)

    def per_phase_flops(self) -> int:
        return self.per_phase_layer.flops()


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def shard_layout(
    layer: ConvLayer, strategy: ParallelismStrategy, elem_bytes: int = 2
) -> ShardLayout:
    """Compute shard sizes and the shrunken per-phase loop bounds.

    Raises ValidationError when the strategy cannot bind to the layer
    (a split factor exceeding its dimension).
    """
    problems = strategy.violations(layer)
    if problems:
        raise ValidationError(f"invalid strategy for layer {layer.index}: {problems[0]}")

    def bound(dim: Dim) -> int:
        return _ceil_div(dim_size(layer, dim), strategy.total_factor(dim))

    per_phase = ConvLayer(
        index=layer.index,
        c_out=bound(Dim.COUT),
        c_in=bound(Dim.CIN),
        h=bound(Dim.H),
        w=bound(Dim.W),
        k_h=bound(Dim.KH),
        k_w=bound(Dim.KW),
        stride=layer.stride,
    )

    def in_spatial(dim: Dim, k: int) -> int:
        out = bound(dim)
        rows = out * layer.stride
        if strategy.total_factor(dim) > 1 and k > 1:
            rows += (k - 1) * layer.stride  # halo border duplicated per shard
        return rows

    in_shard = bound(Dim.CIN) * in_spatial(Dim.H, layer.k_h) * in_spatial(Dim.W, layer.k_w)
    weight_shard = bound(Dim.COUT) * bound(Dim.CIN) * bound(Dim.KH) * bound(Dim.KW)

    # Output ownership is set by ES only: an SS-split output dim is fully
    # covered locally once all phases ran.
    out_shard = 1
    for dim in (Dim.COUT, Dim.H, Dim.W):
        out_shard *= _ceil_div(dim_size(layer, dim), strategy.es_factor(dim))

    circ = 0
    if strategy.ss is not None:
        if strategy.ss in IN_DIMS:
            circ += in_shard
        if strategy.ss in WEIGHT_DIMS:
            circ += weight_shard

    return ShardLayout(
        in_shard=in_shard,
        weight_shard=weight_shard,
        out_shard=out_shard,
        needs_allreduce=strategy.needs_allreduce(),
        reduce_group=strategy.reduce_group(),
        phases=strategy.p if strategy.ss is not None else 1,
        per_phase_layer=per_phase,
        ss_circulating=circ,
    )


def _ceil_chunk(total: int, parts: int, idx: int) -> tuple[int, int]:
    size = _ceil_div(total, parts)
    lo = min(idx * size, total)
    return lo, min(lo + size, total)


def shard_bounds(
    layer: ConvLayer, strategy: ParallelismStrategy, acc: int, phase: int
) -> dict[Dim, tuple[int, int]]:
    """Index ranges of the loop nest executed by accelerator `acc` in `phase`.

    ES shard indices come from the accelerator id in mixed radix over the
    effective factors; the SS shard circulates one step per phase.
    """
    if not 0 <= acc < strategy.p:
        raise ValidationError(f"accelerator index {acc} out of range for p={strategy.p}")
    phases = strategy.p if strategy.ss is not None else 1
    if not 0 <= phase < phases:
        raise ValidationError(f"phase {phase} out of range")

    factors = strategy.effective_es
    es_index: dict[Dim, int] = {}
    rem = acc
    radix = strategy.p
    for d, f in factors:
        radix //= f
        es_index[d] = rem // radix
        rem = rem % radix

    bounds: dict[Dim, tuple[int, int]] = {}
    for dim in Dim:
        total = dim_size(layer, dim)
        lo, hi = _ceil_chunk(total, strategy.es_factor(dim), es_index.get(dim, 0))
        if strategy.ss == dim:
            shard = (acc + phase) % strategy.p
            slo, shi = _ceil_chunk(hi - lo, strategy.p, shard)
            lo, hi = lo + slo, lo + shi
        bounds[dim] = (lo, hi)
    return bounds


# --------------------------------------------------------------------------
# Strategy enumeration.
# --------------------------------------------------------------------------

def factorizations(p: int) -> list[tuple[int, int]]:
    """Ordered two-factor splits of p: (1, p), ..., (p, 1)."""
    return [(f, p // f) for f in range(1, p + 1) if p % f == 0]


def enumerate_strategies(layer: ConvLayer, p: int) -> list[ParallelismStrategy]:
    """All (ES, SS) strategies for a layer on p accelerators.

    For p > 1: every unordered pair of the six dims (15 families) with every
    factorization of p over the pair, alone and combined with each of the six
    possible SS dims (90 families). Strategies whose split factors exceed the
    layer dimensions are dropped. p = 1 yields the single empty strategy.
    """
    if not _is_pow2(p):
        raise ValidationError(f"parallelism degree must be a power of two, got {p}")
    if p == 1:
        return [EMPTY_STRATEGY]

    out: list[ParallelismStrategy] = []
    for d1, d2 in itertools.combinations(Dim, 2):
        for f1, f2 in factorizations(p):
            base = ParallelismStrategy(es=((d1, f1), (d2, f2)), p=p)
            if not base.violations(layer):
                out.append(base)
            for ss in Dim:
                cand = ParallelismStrategy(es=((d1, f1), (d2, f2)), ss=ss, p=p)
                if not cand.violations(layer):
                    out.append(cand)
    return out


def feasible_strategies_exist(layer: ConvLayer, p: int) -> bool:
    """True if at least one valid ES assignment exists for this layer at p."""
    if p == 1:
        return True
    for f1, f2 in factorizations(p):
        for d1, d2 in itertools.permutations(Dim, 2):
            if f1 <= dim_size(layer, d1) and f2 <= dim_size(layer, d2):
                return True
    return False


# --------------------------------------------------------------------------
# Memory accounting.
# --------------------------------------------------------------------------

def memory_footprint(
    layers_with_strategies: list[tuple[ConvLayer, ParallelismStrategy]],
    elem_bytes: int = 2,
) -> int:
    """Bytes of DRAM needed per accelerator to host these sharded layers.

    Weight shards stay resident for the whole inference; activations are
    transient, so only the largest layer's input + output (plus one receive
    buffer for an in-flight shared shard) is charged.
    """
    weights = 0
    peak_act = 0
    for layer, strategy in layers_with_strategies:
        layout = shard_layout(layer, strategy, elem_bytes)
        weights += layout.weight_shard
        act = layout.in_shard + layout.out_shard + layout.ss_circulating
        peak_act = max(peak_act, act)
    return (weights + peak_act) * elem_bytes


def is_valid(
    layers_with_strategies: list[tuple[ConvLayer, ParallelismStrategy]],
    accset: AccSetCandidate,
    topo: SystemTopology,
    elem_bytes: int = 2,
) -> bool:
    """Memory feasibility plus degree agreement for a set assignment."""
    if any(s.p != len(accset) for _, s in layers_with_strategies):
        return False
    limit = min(topo.mem[m] for m in accset.members)
    return memory_footprint(layers_with_strategies, elem_bytes) <= limit


# --------------------------------------------------------------------------
# Partition keys for redistribution matching between consecutive layers.
# --------------------------------------------------------------------------

def out_partition_key(strategy: ParallelismStrategy) -> tuple:
    """How a layer's output is spread over its set once it completes."""
    parts = []
    for dim, tag in ((Dim.COUT, "c"), (Dim.H, "h"), (Dim.W, "w")):
        f = strategy.es_factor(dim)
        if f > 1:
            parts.append((tag, f))
    return tuple(parts)


def in_partition_key(strategy: ParallelismStrategy) -> tuple:
    """How a layer wants its input spread before it starts (SS included:
    a shared-sharded input dim only needs the matching 1/p slice up front)."""
    parts = []
    for dim, tag in ((Dim.CIN, "c"), (Dim.H, "h"), (Dim.W, "w")):
        f = strategy.es_factor(dim)
        if strategy.ss == dim:
            f *= strategy.p
        if f > 1:
            parts.append((tag, f))
    return tuple(parts)
