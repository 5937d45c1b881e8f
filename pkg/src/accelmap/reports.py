"""Report documents: canonical JSON serialization and human rendering.

Machine reports embed the fully resolved inputs (topology, workload, designs,
GA settings, seed, cycle-model tag) so a saved report can be re-loaded and
re-scored on its own. Serialization is canonical (sorted keys, fixed indent)
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json

from .designs import AcceleratorDesign, design_by_id
from .errors import FormatError
from .evaluator import LatencyReport, Mapping
from .sharding import ParallelismStrategy, format_strategy, parse_dim
from .topology import AccSetCandidate, SystemTopology, bottleneck_bandwidth
from .workload import Workload

REPORT_FORMAT = "accelmap-report-v1"


def strategy_to_dict(layer_index: int, strategy: ParallelismStrategy) -> dict:
    return {
        "layer": layer_index,
        "p": strategy.p,
        "es": [[d.label.lower(), f] for d, f in strategy.effective_es],
        "ss": strategy.ss.label.lower() if strategy.ss is not None else None,
    }


def strategy_from_dict(doc: dict) -> ParallelismStrategy:
    try:
        p = doc["p"]
        es = tuple((parse_dim(name), int(f)) for name, f in doc["es"])
        ss = parse_dim(doc["ss"]) if doc.get("ss") else None
    except (KeyError, TypeError) as exc:
        raise FormatError(f"strategy: malformed entry ({exc})") from exc
    if p > 1 and not es:
        raise FormatError("strategy: p > 1 requires ES factors")
    return ParallelismStrategy(es=es, ss=ss, p=p)


def result_to_dict(mapping: Mapping, report: LatencyReport, algorithm: str) -> dict:
    sets = []
    for accset, design, (lo, hi), cost in zip(
        mapping.accsets, mapping.config, mapping.ranges, report.per_set
    ):
        sets.append({
            "members": list(accset.members),
            "design": design.id,
            "layers": [lo, hi],
            "compute_ms": cost.compute_s * 1e3,
            "allreduce_ms": cost.allreduce_s * 1e3,
            "ss_ring_ms": cost.ss_ring_s * 1e3,
            "redistribution_ms": cost.redistribution_s * 1e3,
            "memory_bytes": cost.memory_bytes,
            "mem_ok": cost.mem_ok,
            "strategies": [
                strategy_to_dict(l, mapping.strategies[l]) for l in range(lo, hi)
            ],
        })
    return {
        "algorithm": algorithm,
        "total_ms": report.total_ms,
        "inter_set_ms": report.inter_set_s * 1e3,
        "memory_per_acc_bytes": report.memory_per_acc,
        "valid": report.valid,
        "sets": sets,
    }


def mapping_from_result(
    result: dict, workload: Workload, topo: SystemTopology,
    designs: list[AcceleratorDesign],
) -> Mapping:
    if "sets" not in result:
        raise FormatError("result: missing 'sets'")
    accsets, config, ranges = [], [], []
    strategies: dict[int, ParallelismStrategy] = {}
    for entry in result["sets"]:
        try:
            members = tuple(sorted(int(m) for m in entry["members"]))
            lo, hi = entry["layers"]
            design_id = entry["design"]
            strat_docs = entry["strategies"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"result set entry malformed ({exc})") from exc
        accsets.append(AccSetCandidate(members, bottleneck_bandwidth(topo, members)))
        config.append(design_by_id(designs, design_id))
        ranges.append((int(lo), int(hi)))
        for doc in strat_docs:
            strategies[int(doc["layer"])] = strategy_from_dict(doc)
    if sorted(strategies) != list(range(len(workload))):
        raise FormatError("result: strategies do not cover every layer exactly once")
    return Mapping(
        accsets=tuple(accsets),
        config=tuple(config),
        ranges=tuple(ranges),
        strategies=tuple(strategies[l] for l in range(len(workload))),
    )


def build_report(command: str, config: dict, body: dict) -> dict:
    doc = {"format": REPORT_FORMAT, "command": command, "config": config}
    doc.update(body)
    return doc


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def loads_report(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"report: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise FormatError(f"report: expected format {REPORT_FORMAT!r}")
    return doc


# --------------------------------------------------------------------------
# Human rendering.
# --------------------------------------------------------------------------

def _design_label(designs: list[AcceleratorDesign], design_id: str) -> str:
    return design_by_id(designs, design_id).display_name


def mapping_lines(result: dict, designs: list[AcceleratorDesign],
                  verbose: bool = False) -> list[str]:
    """Mapping table in "Conv1-2→4×Design 1" notation (1-based layers)."""
    lines = []
    for entry in result["sets"]:
        lo, hi = entry["layers"]
        label = _design_label(designs, entry["design"])
        members = entry["members"]
        span = f"Conv{lo + 1}" if hi - lo == 1 else f"Conv{lo + 1}-{hi}"
        lines.append(
            f"{span}→{len(members)}×{label}   [accs {','.join(map(str, members))}]"
        )
        strat_docs = entry["strategies"] if verbose else entry["strategies"][:1]
        for doc in strat_docs:
            strategy = strategy_from_dict(doc)
            lines.append(f"    Conv{doc['layer'] + 1}: {format_strategy(strategy)}")
    return lines


def render_result(result: dict, designs: list[AcceleratorDesign],
                  verbose: bool = False) -> str:
    validity = "valid" if result["valid"] else "MEMORY-INVALID"
    header = (
        f"{result['algorithm']}: total {result['total_ms']:.4g} ms "
        f"({validity}, inter-set {result['inter_set_ms']:.4g} ms)"
    )
    return "\n".join([header] + mapping_lines(result, designs, verbose))


def reduction_pct(baseline_ms: float, other_ms: float) -> float:
    return (baseline_ms - other_ms) / baseline_ms * 100.0


def render_compare(baseline: dict, optimized: dict,
                   designs: list[AcceleratorDesign], model: str) -> str:
    pct = reduction_pct(baseline["total_ms"], optimized["total_ms"])
    lines = [
        f"{'Model':<12}{'Algorithm':<12}{'Latency/ms':<16}",
        f"{model:<12}{'baseline':<12}{baseline['total_ms']:<16.4g}",
        f"{'':<12}{'ga':<12}{optimized['total_ms']:.4g}({-pct:+.1f}%)",
        "",
        "Mapping found by the search:",
    ]
    lines += mapping_lines(optimized, designs)
    return "\n".join(lines)
