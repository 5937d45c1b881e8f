"""Multi-accelerator system graphs and accelerator-set candidate generation.

The system is a weighted undirected graph: vertices are accelerators, edge
weights are direct link bandwidths in bits/s. Every accelerator also has a
host link (used when no direct path exists) and its own DRAM.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .errors import FormatError, NotFoundError, ValidationError

GBPS = 1e9  # bits per second
GB = 1e9    # bytes

DEFAULT_MSG_LATENCY = 1e-6  # seconds per point-to-point message


@dataclass(frozen=True)
class SystemTopology:
    """Accelerator interconnect graph with host links and DRAM sizes."""

    n_acc: int
    bw: tuple[tuple[float, ...], ...]      # bits/s, 0 = no direct link
    bw_host: tuple[float, ...]             # bits/s per accelerator
    mem: tuple[float, ...]                 # bytes per accelerator
    msg_latency: float = DEFAULT_MSG_LATENCY
    name: str = "custom"
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_acc < 1:
            raise ValidationError("topology must have at least one accelerator")
        if len(self.bw) != self.n_acc or any(len(row) != self.n_acc for row in self.bw):
            raise ValidationError("bw must be an n_acc x n_acc matrix")
        for i in range(self.n_acc):
            if self.bw[i][i] != 0:
                raise ValidationError(f"bw[{i}][{i}] must be 0")
            for j in range(i):
                if self.bw[i][j] != self.bw[j][i]:
                    raise ValidationError(f"bw must be symmetric (entry {i},{j})")
                if self.bw[i][j] < 0:
                    raise ValidationError("bandwidths must be non-negative")
        if len(self.bw_host) != self.n_acc or any(b <= 0 for b in self.bw_host):
            raise ValidationError("bw_host must be positive for every accelerator")
        if len(self.mem) != self.n_acc or any(m <= 0 for m in self.mem):
            raise ValidationError("mem must be positive for every accelerator")
        if self.msg_latency < 0:
            raise ValidationError("msg_latency must be non-negative")

    def edges(self) -> list[tuple[int, int, float]]:
        """All direct links as (i, j, bandwidth) with i < j."""
        return [
            (i, j, self.bw[i][j])
            for i in range(self.n_acc)
            for j in range(i + 1, self.n_acc)
            if self.bw[i][j] > 0
        ]

    def direct_groups(self) -> list[tuple[int, ...]]:
        """Connected components of the direct-link graph, each sorted."""
        return _components(range(self.n_acc), self.edges())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_acc": self.n_acc,
            "links": [
                {"a": i, "b": j, "gbps": bw / GBPS} for i, j, bw in self.edges()
            ],
            "bw_host_gbps": [b / GBPS for b in self.bw_host],
            "mem_gb": [m / GB for m in self.mem],
            "msg_latency_us": self.msg_latency * 1e6,
        }


@dataclass(frozen=True)
class AccSetCandidate:
    """A candidate accelerator set with its bottleneck internal bandwidth."""

    members: tuple[int, ...]
    intra_bw: float  # bits/s; 0 for singletons (no internal traffic)

    def __post_init__(self):
        if not self.members:
            raise ValidationError("candidate must have at least one member")
        if tuple(sorted(set(self.members))) != self.members:
            raise ValidationError("members must be sorted and unique")

    def __len__(self) -> int:
        return len(self.members)


def _components(nodes, edges) -> list[tuple[int, ...]]:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    comps: dict[int, list[int]] = {}
    for n in nodes:
        comps.setdefault(find(n), []).append(n)
    return sorted(tuple(sorted(c)) for c in comps.values())


def bottleneck_bandwidth(topo: SystemTopology, members: tuple[int, ...]) -> float:
    """Bandwidth of the weakest edge in the widest spanning structure.

    Kruskal on descending bandwidth over the induced subgraph; the last edge
    that joins the set is the max-min bottleneck. Singletons return 0.
    """
    if len(members) == 1:
        return 0.0
    member_set = set(members)
    edges = sorted(
        (e for e in topo.edges() if e[0] in member_set and e[1] in member_set),
        key=lambda e: -e[2],
    )
    parent = {m: m for m in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    joined = 1
    bottleneck = 0.0
    for i, j, bw in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            joined += 1
            bottleneck = bw
            if joined == len(members):
                return bottleneck
    raise ValidationError(f"members {members} do not induce a connected subgraph")


def _is_connected(topo: SystemTopology, members: tuple[int, ...]) -> bool:
    if len(members) == 1:
        return True
    member_set = set(members)
    edges = [e for e in topo.edges() if e[0] in member_set and e[1] in member_set]
    return len(_components(members, edges)) == 1


def enumerate_accset_candidates(topo: SystemTopology) -> list[AccSetCandidate]:
    """Generate accelerator-set candidates by lowest-bandwidth edge removal.

    Starting from the full graph, every connected component is recorded; then
    all edges tied at the current minimum bandwidth are removed and the new
    components recorded, until no edges remain. Recorded components are
    additionally closed under connected subsets of power-of-two size, so that
    uniform-bandwidth groups still yield 2- and 4-member sets.
    """
    recorded: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()

    def record(component: tuple[int, ...]) -> None:
        if component not in seen:
            seen.add(component)
            recorded.append(component)

    edges = topo.edges()
    for comp in _components(range(topo.n_acc), edges):
        record(comp)
    while edges:
        low = min(bw for _, _, bw in edges)
        edges = [e for e in edges if e[2] > low]
        for comp in _components(range(topo.n_acc), edges):
            record(comp)

    # Power-of-two subset closure over the recorded components.
    closure: list[tuple[int, ...]] = []
    for comp in list(recorded):
        size = 2
        while size < len(comp):
            for subset in itertools.combinations(comp, size):
                if subset not in seen and _is_connected(topo, subset):
                    seen.add(subset)
                    closure.append(subset)
            size *= 2
    closure.sort(key=lambda s: (len(s), s))

    return [
        AccSetCandidate(members, bottleneck_bandwidth(topo, members))
        for members in recorded + closure
    ]


def inter_set_path_bandwidth(
    topo: SystemTopology, a: AccSetCandidate, b: AccSetCandidate
) -> tuple[float, bool]:
    """Effective bandwidth between two disjoint sets: (bits/s, via_host).

    A direct edge between any pair of members wins (max such edge); otherwise
    the transfer bounces through the host at min(sender, receiver) host-link
    bandwidth, best pair chosen.
    """
    if set(a.members) & set(b.members):
        raise ValidationError("inter-set path requires disjoint sets")
    best_direct = 0.0
    for i in a.members:
        for j in b.members:
            best_direct = max(best_direct, topo.bw[i][j])
    if best_direct > 0:
        return best_direct, False
    best_host = max(
        min(topo.bw_host[i], topo.bw_host[j])
        for i in a.members
        for j in b.members
    )
    return best_host, True


# --------------------------------------------------------------------------
# Builders and document I/O.
# --------------------------------------------------------------------------

def grouped_topology(
    group_sizes: list[int],
    intra_gbps: float = 8.0,
    host_gbps: float = 2.0,
    mem_gb: float = 1.0,
    msg_latency: float = DEFAULT_MSG_LATENCY,
    name: str = "custom",
) -> SystemTopology:
    """All-to-all links inside each group, no direct links across groups."""
    n = sum(group_sizes)
    bw = [[0.0] * n for _ in range(n)]
    start = 0
    for size in group_sizes:
        for i in range(start, start + size):
            for j in range(start, start + size):
                if i != j:
                    bw[i][j] = intra_gbps * GBPS
        start += size
    return SystemTopology(
        n_acc=n,
        bw=tuple(tuple(row) for row in bw),
        bw_host=(host_gbps * GBPS,) * n,
        mem=(mem_gb * GB,) * n,
        msg_latency=msg_latency,
        name=name,
    )


def build_f1_topology() -> SystemTopology:
    """Eight accelerators in two groups of four: 8 Gbps all-to-all within a
    group, no direct inter-group links, 2 Gbps host links, 1 GB DRAM each."""
    return grouped_topology([4, 4], intra_gbps=8.0, host_gbps=2.0, mem_gb=1.0, name="f1")


BUILTIN_TOPOLOGIES = ("f1",)


def builtin_topology(name: str) -> SystemTopology:
    if name == "f1":
        return build_f1_topology()
    raise NotFoundError(
        f"unknown topology {name!r}; available: {', '.join(BUILTIN_TOPOLOGIES)}"
    )


def topology_from_dict(doc: dict) -> SystemTopology:
    if not isinstance(doc, dict):
        raise FormatError("topology document must be an object")
    name = doc.get("name", "custom")
    if "groups" in doc:
        groups = doc["groups"]
        if not isinstance(groups, list) or not groups:
            raise FormatError("topology: 'groups' must be a non-empty list")
        flat = [a for g in groups for a in g]
        n = len(flat)
        if sorted(flat) != list(range(n)):
            raise FormatError("topology: groups must partition 0..n_acc-1")
        intra = _num(doc, "intra_bw_gbps", 8.0) * GBPS
        bw = [[0.0] * n for _ in range(n)]
        for g in groups:
            for i in g:
                for j in g:
                    if i != j:
                        bw[i][j] = intra
        return SystemTopology(
            n_acc=n,
            bw=tuple(tuple(row) for row in bw),
            bw_host=(_scalar_host(doc) * GBPS,) * n,
            mem=(_scalar_mem(doc) * GB,) * n,
            msg_latency=_num(doc, "msg_latency_us", 1.0) * 1e-6,
            name=name,
        )
    if "links" not in doc or "n_acc" not in doc:
        raise FormatError("topology: need either 'groups' or 'n_acc' + 'links'")
    n = doc["n_acc"]
    if not isinstance(n, int) or n < 1:
        raise FormatError("topology: 'n_acc' must be a positive integer")
    bw = [[0.0] * n for _ in range(n)]
    for k, link in enumerate(doc["links"]):
        try:
            i, j, gbps = link["a"], link["b"], link["gbps"]
        except (TypeError, KeyError) as exc:
            raise FormatError(f"topology: links[{k}] needs fields a, b, gbps") from exc
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise FormatError(f"topology: links[{k}] endpoints out of range")
        bw[i][j] = bw[j][i] = float(gbps) * GBPS
    host = _per_acc(doc, "bw_host_gbps", n, 2.0)
    mem = _per_acc(doc, "mem_gb", n, 1.0)
    return SystemTopology(
        n_acc=n,
        bw=tuple(tuple(row) for row in bw),
        bw_host=tuple(g * GBPS for g in host),
        mem=tuple(m * GB for m in mem),
        msg_latency=_num(doc, "msg_latency_us", 1.0) * 1e-6,
        name=name,
    )


def _num(doc: dict, key: str, default: float) -> float:
    value = doc.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
        raise FormatError(f"topology: {key!r} must be a non-negative number")
    return float(value)


def _scalar_host(doc: dict) -> float:
    value = doc.get("bw_host_gbps", 2.0)
    if isinstance(value, list):
        raise FormatError("topology: per-accelerator bw_host_gbps requires 'links' form")
    return float(value)


def _scalar_mem(doc: dict) -> float:
    value = doc.get("mem_gb", 1.0)
    if isinstance(value, list):
        raise FormatError("topology: per-accelerator mem_gb requires 'links' form")
    return float(value)


def _per_acc(doc: dict, key: str, n: int, default: float) -> list[float]:
    value = doc.get(key, default)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)] * n
    if isinstance(value, list) and len(value) == n:
        return [float(v) for v in value]
    raise FormatError(f"topology: {key!r} must be a number or a list of {n} numbers")


def load_topology(text: str) -> SystemTopology:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"topology: invalid JSON ({exc})") from exc
    return topology_from_dict(doc)


def dump_topology(topo: SystemTopology) -> str:
    return json.dumps(topo.to_dict(), indent=2, sort_keys=True) + "\n"
