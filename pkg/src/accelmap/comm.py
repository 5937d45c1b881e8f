"""Analytical communication costs over the accelerator interconnect.

Every transfer pays a fixed per-message latency plus bytes over bandwidth.
Collectives use the ring schedule: bandwidth-optimal for all-reduce and the
literal shape of shared-shard circulation. Computation and communication are
never overlapped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnreachableError, ValidationError


@dataclass(frozen=True)
class CommCost:
    seconds: float
    bytes_moved: float  # aggregate traffic over all links
    via_host: bool = False

    def __post_init__(self):
        if self.seconds < 0 or self.bytes_moved < 0:
            raise ValidationError("communication cost cannot be negative")


ZERO_COST = CommCost(0.0, 0.0)


def p2p_cost(n_bytes: float, bandwidth: float, msg_latency: float,
             via_host: bool = False) -> CommCost:
    """One point-to-point message: msg_latency + bytes*8/bandwidth."""
    if bandwidth <= 0:
        raise UnreachableError("no path between accelerators (bandwidth 0)")
    return CommCost(msg_latency + n_bytes * 8.0 / bandwidth, n_bytes, via_host)


def allreduce_cost(bytes_per_member: float, p: int, intra_bw: float,
                   msg_latency: float) -> CommCost:
    """Ring all-reduce of equal-shaped buffers across p members.

    2*(p-1) steps (reduce-scatter then all-gather), each moving a 1/p slice:
    seconds = 2*(p-1)*(msg_latency + (bytes/p)*8/intra_bw).
    """
    if p < 1:
        raise ValidationError("p must be >= 1")
    if p == 1:
        return ZERO_COST
    if intra_bw <= 0:
        raise UnreachableError("all-reduce across unconnected members")
    slice_bytes = bytes_per_member / p
    seconds = 2 * (p - 1) * (msg_latency + slice_bytes * 8.0 / intra_bw)
    return CommCost(seconds, 2 * (p - 1) * slice_bytes * p)


def ss_ring_cost(shared_shard_bytes: float, p: int, intra_bw: float,
                 msg_latency: float) -> CommCost:
    """Shared-shard circulation: p-1 ring steps, one shard per step.

    Serialized with computation; a phase's shard must fully arrive before the
    next compute phase starts.
    """
    if p < 1:
        raise ValidationError("p must be >= 1")
    if p == 1 or shared_shard_bytes == 0:
        return ZERO_COST
    if intra_bw <= 0:
        raise UnreachableError("ring circulation across unconnected members")
    step = msg_latency + shared_shard_bytes * 8.0 / intra_bw
    return CommCost((p - 1) * step, (p - 1) * shared_shard_bytes * p)


def redistribute_cost(out_bytes_total: float, same_set: bool,
                      same_partitioning: bool, bandwidth: float,
                      msg_latency: float, via_host: bool = False) -> CommCost:
    """Re-layout of one layer's output for the next layer's consumption.

    Matching partitionings on the same set cost nothing; any other case is
    charged the all-gather-then-scatter upper bound: the full tensor once
    over the given bandwidth.
    """
    if same_set and same_partitioning:
        return ZERO_COST
    return p2p_cost(out_bytes_total, bandwidth, msg_latency, via_host)
