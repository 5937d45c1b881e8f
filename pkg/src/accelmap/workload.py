"""DNN inference workloads as flat sequences of convolution layers.

Pooling, activation and normalization layers are folded away: the catalog
keeps one entry per convolution, in topological order, carrying the
output-centric loop bounds the cycle models consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import FormatError, NotFoundError, ValidationError

_LAYER_FIELDS = ("c_out", "c_in", "h", "w", "k_h", "k_w", "stride")


@dataclass(frozen=True, slots=True)
class ConvLayer:
    """One convolution described by its six loop bounds plus stride.

    h and w are *output* feature-map sizes; the input map is h*stride by
    w*stride ("same" padding folded away).
    """

    index: int
    c_out: int
    c_in: int
    h: int
    w: int
    k_h: int
    k_w: int
    stride: int = 1

    def __post_init__(self):
        for name in _LAYER_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValidationError(
                    f"layer {self.index}: {name} must be a positive integer, got {value!r}"
                )

    def macs(self) -> int:
        """Multiply-accumulate count of the full layer."""
        return self.c_out * self.c_in * self.h * self.w * self.k_h * self.k_w

    def flops(self) -> int:
        return 2 * self.macs()

    def weight_elems(self) -> int:
        return self.c_out * self.c_in * self.k_h * self.k_w

    def in_elems(self) -> int:
        return self.c_in * self.h * self.stride * self.w * self.stride

    def out_elems(self) -> int:
        return self.c_out * self.h * self.w

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _LAYER_FIELDS}


def layer_flops(layer: ConvLayer) -> int:
    """2 * c_out * c_in * h * w * k_h * k_w."""
    return layer.flops()


@dataclass(frozen=True)
class Workload:
    name: str
    layers: tuple[ConvLayer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValidationError(f"workload {self.name!r} has no layers")
        for pos, layer in enumerate(self.layers):
            if layer.index != pos:
                raise ValidationError(
                    f"workload {self.name!r}: layer at position {pos} has index {layer.index}"
                )

    def __len__(self) -> int:
        return len(self.layers)

    def total_macs(self) -> int:
        return sum(l.macs() for l in self.layers)

    def total_flops(self) -> int:
        return sum(l.flops() for l in self.layers)

    def total_weight_params(self) -> int:
        return sum(l.weight_elems() for l in self.layers)

    def to_dict(self) -> dict:
        return {"name": self.name, "layers": [l.to_dict() for l in self.layers]}


def _layer_from_dict(pos: int, doc: dict) -> ConvLayer:
    if not isinstance(doc, dict):
        raise FormatError(f"layers[{pos}]: expected an object, got {type(doc).__name__}")
    kwargs = {}
    for name in _LAYER_FIELDS:
        if name not in doc:
            if name == "stride":
                continue  # optional, defaults to 1
            raise FormatError(f"layers[{pos}]: missing field {name!r}")
        value = doc[name]
        if not isinstance(value, int) or isinstance(value, bool):
            raise FormatError(f"layers[{pos}].{name}: expected an integer, got {value!r}")
        kwargs[name] = value
    unknown = set(doc) - set(_LAYER_FIELDS)
    if unknown:
        raise FormatError(f"layers[{pos}]: unknown fields {sorted(unknown)}")
    return ConvLayer(index=pos, **kwargs)


def workload_from_dict(doc: dict) -> Workload:
    if not isinstance(doc, dict):
        raise FormatError("workload document must be an object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise FormatError("workload: missing or empty field 'name'")
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise FormatError("workload: field 'layers' must be a non-empty list")
    return Workload(name=name, layers=tuple(_layer_from_dict(i, l) for i, l in enumerate(layers)))


def load_workload(text: str) -> Workload:
    """Parse a workload from its JSON document form."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"workload: invalid JSON ({exc})") from exc
    return workload_from_dict(doc)


def dump_workload(workload: Workload) -> str:
    return json.dumps(workload.to_dict(), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# Builtin model catalog.
#
# Shapes transcribed from the standard ImageNet (224x224) architecture
# definitions. Counting convention: the 7x7 stem is a layer, residual
# projection (downsample) 1x1 convolutions are not; this is the only
# convention under which the conv counts come out at 5/13/33/100/49.
# --------------------------------------------------------------------------

def _conv(layers: list, c_out, c_in, h, k, stride=1) -> None:
    layers.append((c_out, c_in, h, h, k, k, stride))


def _alexnet() -> list:
    layers: list = []
    _conv(layers, 64, 3, 55, 11, 4)
    _conv(layers, 192, 64, 27, 5)
    _conv(layers, 384, 192, 13, 3)
    _conv(layers, 256, 384, 13, 3)
    _conv(layers, 256, 256, 13, 3)
    return layers


def _vgg16() -> list:
    layers: list = []
    plan = [(64, 224, 2), (128, 112, 2), (256, 56, 3), (512, 28, 3), (512, 14, 3)]
    c_in = 3
    for width, h, reps in plan:
        for _ in range(reps):
            _conv(layers, width, c_in, h, 3)
            c_in = width
    return layers


def _resnet_basic(stage_blocks: tuple[int, ...]) -> list:
    layers: list = []
    _conv(layers, 64, 3, 112, 7, 2)
    c_in, h = 64, 56
    for stage, blocks in enumerate(stage_blocks):
        planes = 64 * 2**stage
        for b in range(blocks):
            stride = 2 if (b == 0 and stage > 0) else 1
            h //= stride
            _conv(layers, planes, c_in, h, 3, stride)
            _conv(layers, planes, planes, h, 3)
            c_in = planes
    return layers


def _resnet_bottleneck(stage_blocks: tuple[int, ...], width_mult: int = 1) -> list:
    layers: list = []
    _conv(layers, 64, 3, 112, 7, 2)
    c_in, h = 64, 56
    for stage, blocks in enumerate(stage_blocks):
        planes = 64 * 2**stage
        width = planes * width_mult
        for b in range(blocks):
            stride = 2 if (b == 0 and stage > 0) else 1
            _conv(layers, width, c_in, h, 1)  # 1x1 runs at the incoming resolution
            h //= stride
            _conv(layers, width, width, h, 3, stride)
            _conv(layers, planes * 4, width, h, 1)
            c_in = planes * 4
    return layers


_CATALOG = {
    "alexnet": _alexnet,
    "vgg16": _vgg16,
    "resnet34": lambda: _resnet_basic((3, 4, 6, 3)),
    "resnet101": lambda: _resnet_bottleneck((3, 4, 23, 3)),
    "wrn-50-2": lambda: _resnet_bottleneck((3, 4, 6, 3), width_mult=2),
}

CATALOG_MODELS = tuple(sorted(_CATALOG))


def catalog(model_name: str) -> Workload:
    """Return a builtin benchmark model by name."""
    try:
        build = _CATALOG[model_name]
    except KeyError:
        raise NotFoundError(
            f"unknown model {model_name!r}; available: {', '.join(CATALOG_MODELS)}"
        ) from None
    layers = tuple(
        ConvLayer(i, c_out, c_in, h, w, k_h, k_w, stride)
        for i, (c_out, c_in, h, w, k_h, k_w, stride) in enumerate(build())
    )
    # Catalog models are chains: channel widths line up layer to layer
    # (residual adds and pooling preserve channel counts).
    for prev, cur in zip(layers, layers[1:]):
        if cur.c_in != prev.c_out:
            raise ValidationError(
                f"{model_name}: layer {cur.index} c_in={cur.c_in} != "
                f"predecessor c_out={prev.c_out}"
            )
    return Workload(name=model_name, layers=layers)
