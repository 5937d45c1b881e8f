"""Analytical cycle models for the configurable accelerator designs.

Closed-form approximations: the only utilization effect modeled is tile
underutilization through ceiling division of loop bounds by tile parameters.
The three builtin designs cover a loop-tiled engine, a GEMM-style systolic
array, and a Winograd engine. All formulas live here so they can be swapped
as one unit; CYCLE_MODEL_VERSION tags reports with the formula revision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil

from .errors import FormatError, NotFoundError, ValidationError
from .workload import ConvLayer, Workload

CYCLE_MODEL_VERSION = "v1"

MHZ = 1e6

_KINDS = ("tiled", "systolic", "winograd")

_REQUIRED_PARAMS = {
    "tiled": ("tm", "tn", "tr", "tc"),
    "systolic": ("row", "col", "vec"),
    "winograd": ("n", "pn", "pm"),
}

# GEMM-style systolic arrays stage spatial kernels through an im2col-like
# path; the duplicated input traffic throttles the pipeline. 1x1 kernels are
# native GEMM and pay nothing.
_SYSTOLIC_STAGING_FACTOR = 3


@dataclass(frozen=True)
class AcceleratorDesign:
    id: str
    kind: str
    freq: float          # Hz
    n_pe: int
    params: dict
    display_name: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"design {self.id!r}: unknown kind {self.kind!r}")
        if self.freq <= 0:
            raise ValidationError(f"design {self.id!r}: freq must be positive")
        if self.n_pe <= 0:
            raise ValidationError(f"design {self.id!r}: n_pe must be positive")
        for name in _REQUIRED_PARAMS[self.kind]:
            value = self.params.get(name)
            if not isinstance(value, int) or value < 1:
                raise ValidationError(
                    f"design {self.id!r}: param {name!r} must be an integer >= 1"
                )
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.display_name,
            "kind": self.kind,
            "freq_mhz": self.freq / MHZ,
            "n_pe": self.n_pe,
            "params": dict(self.params),
        }


def builtin_designs() -> list[AcceleratorDesign]:
    """The three builtin designs, 200 MHz each with comparable PE counts."""
    return [
        AcceleratorDesign(
            "design1", "tiled", 200 * MHZ, 438,
            {"tm": 64, "tn": 7, "tr": 7, "tc": 14}, "Design 1",
        ),
        AcceleratorDesign(
            "design2", "systolic", 200 * MHZ, 572,
            {"row": 11, "col": 13, "vec": 8}, "Design 2",
        ),
        AcceleratorDesign(
            "design3", "winograd", 200 * MHZ, 576,
            {"n": 6, "pn": 2, "pm": 8}, "Design 3",
        ),
    ]


def layer_cycles(design: AcceleratorDesign, layer: ConvLayer) -> int:
    """Cycle count of one (possibly sharded) convolution on one accelerator."""
    p = design.params
    if design.kind == "tiled":
        tiles = (
            ceil(layer.c_out / p["tm"])
            * ceil(layer.c_in / p["tn"])
            * ceil(layer.h / p["tr"])
            * ceil(layer.w / p["tc"])
        )
        return tiles * p["tr"] * p["tc"] * layer.k_h * layer.k_w
    if design.kind == "systolic":
        passes = (
            ceil(layer.c_out / p["row"])
            * ceil(layer.h * layer.w / p["col"])
            * ceil(layer.c_in / p["vec"])
        )
        staging = 1 if layer.k_h == 1 and layer.k_w == 1 else _SYSTOLIC_STAGING_FACTOR
        return passes * layer.k_h * layer.k_w * staging
    # winograd
    n = p["n"]
    m = n - 2  # output elements per transform tile, F(m x m, 3x3)
    base = ceil(layer.c_out / p["pm"]) * ceil(layer.c_in / p["pn"])
    if layer.k_h == 3 and layer.k_w == 3:
        return base * ceil(layer.h / m) * ceil(layer.w / m) * n
    # No transform gain off the 3x3 path.
    return base * layer.h * layer.w * layer.k_h * layer.k_w


def layer_latency(design: AcceleratorDesign, layer: ConvLayer) -> float:
    """Seconds to run the layer on one accelerator of this design."""
    return layer_cycles(design, layer) / design.freq


def profile_designs(
    designs: list[AcceleratorDesign], workload: Workload
) -> tuple[list[list[int]], list[float]]:
    """Per-design cycle counts for every layer plus normalized scores.

    score[d] = (sum over layers of the per-layer minimum cycles) /
               (sum of design d's cycles); 1.0 means d is nowhere beaten.
    Scores seed the first-generation design genes of the outer search.
    """
    if not designs or not workload.layers:
        raise ValidationError("profile_designs needs at least one design and one layer")
    matrix = [[layer_cycles(d, l) for l in workload.layers] for d in designs]
    best = [min(matrix[d][i] for d in range(len(designs))) for i in range(len(workload))]
    best_total = sum(best)
    scores = [best_total / sum(row) for row in matrix]
    return matrix, scores


# --------------------------------------------------------------------------
# Document I/O for custom design sets.
# --------------------------------------------------------------------------

def design_from_dict(doc: dict) -> AcceleratorDesign:
    if not isinstance(doc, dict):
        raise FormatError("design document must be an object")
    for key in ("id", "kind", "freq_mhz", "n_pe", "params"):
        if key not in doc:
            raise FormatError(f"design: missing field {key!r}")
    params = doc["params"]
    if not isinstance(params, dict):
        raise FormatError("design: 'params' must be an object")
    try:
        return AcceleratorDesign(
            id=str(doc["id"]),
            kind=str(doc["kind"]),
            freq=float(doc["freq_mhz"]) * MHZ,
            n_pe=int(doc["n_pe"]),
            params={str(k): v for k, v in params.items()},
            display_name=str(doc.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"design: {exc}") from exc


def load_designs(text: str) -> list[AcceleratorDesign]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"designs: invalid JSON ({exc})") from exc
    if isinstance(doc, dict) and "designs" in doc:
        doc = doc["designs"]
    if not isinstance(doc, list) or not doc:
        raise FormatError("designs: expected a non-empty list")
    designs = [design_from_dict(d) for d in doc]
    ids = [d.id for d in designs]
    if len(set(ids)) != len(ids):
        raise FormatError("designs: ids must be unique")
    return designs


def design_by_id(designs: list[AcceleratorDesign], design_id: str) -> AcceleratorDesign:
    for d in designs:
        if d.id == design_id:
            return d
    raise NotFoundError(f"unknown design {design_id!r}")
