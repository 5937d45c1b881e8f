import json

import pytest

from accelmap.errors import FormatError, NotFoundError, ValidationError
from accelmap.workload import (
    CATALOG_MODELS,
    ConvLayer,
    catalog,
    dump_workload,
    layer_flops,
    load_workload,
)

MINIMAL_DOC = {
    "name": "one",
    "layers": [
        {"c_out": 64, "c_in": 3, "h": 224, "w": 224, "k_h": 3, "k_w": 3, "stride": 1}
    ],
}


def test_load_minimal_workload():
    w = load_workload(json.dumps(MINIMAL_DOC))
    assert w.name == "one"
    assert len(w) == 1
    assert w.layers[0].c_out == 64
    assert w.layers[0].index == 0


def test_zero_dimension_rejected():
    doc = {"name": "bad", "layers": [dict(MINIMAL_DOC["layers"][0], c_in=0)]}
    with pytest.raises(ValidationError, match="c_in"):
        load_workload(json.dumps(doc))


def test_missing_field_named_in_error():
    layer = dict(MINIMAL_DOC["layers"][0])
    del layer["k_h"]
    with pytest.raises(FormatError, match=r"layers\[0\].*k_h"):
        load_workload(json.dumps({"name": "bad", "layers": [layer]}))


def test_unknown_field_rejected():
    layer = dict(MINIMAL_DOC["layers"][0], groups=2)
    with pytest.raises(FormatError, match="unknown"):
        load_workload(json.dumps({"name": "bad", "layers": [layer]}))


def test_stride_defaults_to_one():
    layer = dict(MINIMAL_DOC["layers"][0])
    del layer["stride"]
    w = load_workload(json.dumps({"name": "ok", "layers": [layer]}))
    assert w.layers[0].stride == 1


def test_round_trip():
    for name in CATALOG_MODELS:
        w = catalog(name)
        assert load_workload(dump_workload(w)) == w


def test_layer_flops_unit():
    assert layer_flops(ConvLayer(0, 1, 1, 1, 1, 1, 1)) == 2


def test_layer_flops_formula():
    layer = ConvLayer(0, 64, 3, 55, 55, 11, 11, stride=4)
    assert layer_flops(layer) == 2 * 64 * 3 * 55 * 55 * 11 * 11


def test_catalog_conv_counts():
    expected = {
        "alexnet": 5,
        "vgg16": 13,
        "resnet34": 33,
        "resnet101": 100,
        "wrn-50-2": 49,
    }
    for name, count in expected.items():
        assert len(catalog(name)) == count, name


def test_catalog_unknown_model():
    with pytest.raises(NotFoundError, match="alexnet"):
        catalog("lenet5")


# Published whole-model MAC counts; the conv-only transcription must land
# within 10% (the slack covers pooling/FC ops the tables include).
TABLE_MACS = {
    "alexnet": 727e6,
    "vgg16": 15.5e9,
    "resnet34": 3.68e9,
    "resnet101": 7.85e9,
    "wrn-50-2": 11.4e9,
}


@pytest.mark.parametrize("name", sorted(TABLE_MACS))
def test_catalog_mac_totals(name):
    w = catalog(name)
    macs = w.total_macs()
    assert abs(macs - TABLE_MACS[name]) / TABLE_MACS[name] < 0.10


def test_catalog_channel_chain():
    for name in CATALOG_MODELS:
        layers = catalog(name).layers
        for prev, cur in zip(layers, layers[1:]):
            assert cur.c_in == prev.c_out, f"{name} layer {cur.index}"


def test_alexnet_first_layer_shape():
    first = catalog("alexnet").layers[0]
    assert (first.c_out, first.c_in, first.h, first.w) == (64, 3, 55, 55)
    assert (first.k_h, first.k_w, first.stride) == (11, 11, 4)


def test_helper_element_counts():
    layer = ConvLayer(0, 8, 4, 6, 6, 3, 3, stride=2)
    assert layer.weight_elems() == 8 * 4 * 9
    assert layer.in_elems() == 4 * 12 * 12
    assert layer.out_elems() == 8 * 6 * 6
    assert layer.macs() == 8 * 4 * 6 * 6 * 9
