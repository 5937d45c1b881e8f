"""Latency-driven mapper for DNN inference on adaptive multi-accelerator systems.

Given a system topology, a set of configurable accelerator designs and a
convolutional workload, the search picks accelerator sets, per-set designs,
contiguous layer allocations and per-layer sharding strategies minimizing
end-to-end inference latency under per-accelerator memory limits.
"""

from .comm import CommCost, allreduce_cost, p2p_cost, redistribute_cost, ss_ring_cost
from .designs import (
    AcceleratorDesign,
    builtin_designs,
    layer_cycles,
    layer_latency,
    profile_designs,
)
from .errors import (
    AccelMapError,
    BaselineError,
    FormatError,
    NotFoundError,
    OracleLimitError,
    UnreachableError,
    ValidationError,
)
from .evaluator import (
    LatencyReport,
    Mapping,
    MappingEvaluator,
    heterogeneous_set_compute,
)
from .oracle import OracleLimits, run_oracle
from .search import (
    GAConfig,
    SearchResult,
    run_baseline,
    run_inner_ga,
    run_outer_ga,
)
from .sharding import (
    Dim,
    ParallelismStrategy,
    ShardLayout,
    enumerate_strategies,
    is_valid,
    memory_footprint,
    shard_layout,
)
from .topology import (
    AccSetCandidate,
    SystemTopology,
    build_f1_topology,
    enumerate_accset_candidates,
    inter_set_path_bandwidth,
)
from .workload import ConvLayer, Workload, catalog, layer_flops, load_workload

__version__ = "0.1.0"
