import json

import pytest

from accelmap.cli import main

TINY = ["--outer-pop", "8", "--outer-gens", "5", "--inner-pop", "8", "--inner-gens", "5"]


@pytest.fixture()
def tiny_workload_file(tmp_path):
    doc = {
        "name": "pair",
        "layers": [
            {"c_out": 32, "c_in": 16, "h": 14, "w": 14, "k_h": 3, "k_w": 3, "stride": 1},
            {"c_out": 32, "c_in": 32, "h": 14, "w": 14, "k_h": 3, "k_w": 3, "stride": 1},
        ],
    }
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture()
def quad_topology_file(tmp_path):
    path = tmp_path / "quad.json"
    path.write_text(json.dumps({"name": "quad", "groups": [[0, 1, 2, 3]]}))
    return str(path)


def test_map_writes_report_with_mapping_lines(tmp_path, capsys):
    out = tmp_path / "r.json"
    rc = main(["map", "--model", "alexnet", "--seed", "7", "--out", str(out), *TINY])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "Conv1" in printed and "Design" in printed and "ES={" in printed
    doc = json.loads(out.read_text())
    assert doc["command"] == "map"
    assert doc["result"]["total_ms"] > 0


def test_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["map", "--model", "alexnet", "--seed", "7", "--out", str(out), *TINY]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_workload_file_exits_2(capsys):
    rc = main(["map", "--workload", "/does/not/exist.json", *TINY])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_no_model_or_workload_exits_2(capsys):
    assert main(["map", *TINY]) == 2


def test_baseline_single_group_exits_2(quad_topology_file, capsys):
    rc = main(["baseline", "--model", "alexnet", "--topology", quad_topology_file])
    assert rc == 2
    assert "two groups" in capsys.readouterr().err


def test_compare_prints_reduction_column(tmp_path, capsys):
    rc = main(["compare", "--model", "alexnet", "--seed", "3", *TINY])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "baseline" in printed
    assert "%)" in printed  # the (-X.X%) column


def test_oracle_subcommand(tmp_path, tiny_workload_file, quad_topology_file, capsys):
    designs = tmp_path / "two_designs.json"
    designs.write_text(json.dumps([
        {"id": "design1", "kind": "tiled", "freq_mhz": 200, "n_pe": 438,
         "params": {"tm": 64, "tn": 7, "tr": 7, "tc": 14}},
        {"id": "design2", "kind": "systolic", "freq_mhz": 200, "n_pe": 572,
         "params": {"row": 11, "col": 13, "vec": 8}},
    ]))
    rc = main([
        "oracle", "--workload", tiny_workload_file, "--topology", quad_topology_file,
        "--designs", str(designs),
        "--seed", "1", "--outer-pop", "16", "--outer-gens", "15",
        "--inner-pop", "12", "--inner-gens", "12",
    ])
    assert rc == 0
    assert "GA matches oracle within 1%:" in capsys.readouterr().out


def test_oracle_refuses_catalog_model(capsys):
    rc = main(["oracle", "--model", "resnet101", *TINY])
    assert rc == 2
    assert "too large" in capsys.readouterr().err


def test_evaluate_round_trip(tmp_path, tiny_workload_file, capsys):
    saved = tmp_path / "saved.json"
    assert main(["map", "--workload", tiny_workload_file, "--seed", "5",
                 "--out", str(saved), *TINY]) == 0
    rc = main(["evaluate", "--report", str(saved)])
    assert rc == 0
    assert "matches saved report: yes" in capsys.readouterr().out


def test_server_flag_accepted_after_subcommand(capsys):
    # unreachable URL: the client must fail cleanly with a config error
    rc = main(["catalog", "--server", "http://127.0.0.1:1", "--model", "vgg16"])
    assert rc == 2
    assert "cannot reach service" in capsys.readouterr().err


def test_explicit_links_topology(tmp_path, capsys):
    topo = tmp_path / "line.json"
    topo.write_text(json.dumps({
        "name": "line",
        "n_acc": 3,
        "links": [{"a": 0, "b": 1, "gbps": 1}, {"a": 1, "b": 2, "gbps": 2}],
        "bw_host_gbps": 2,
        "mem_gb": 1,
    }))
    rc = main(["map", "--model", "alexnet", "--topology", str(topo), "--seed", "2", *TINY])
    assert rc == 0
    assert "Design" in capsys.readouterr().out


def test_elem_bytes_flag_changes_transfers(tmp_path):
    outs = {}
    for eb in ("2", "4"):
        out = tmp_path / f"eb{eb}.json"
        rc = main(["map", "--model", "alexnet", "--seed", "4",
                   "--elem-bytes", eb, "--out", str(out), *TINY])
        assert rc == 0
        outs[eb] = json.loads(out.read_text())
    assert outs["2"]["config"]["elem_bytes"] == 2
    assert outs["4"]["config"]["elem_bytes"] == 4
    assert outs["2"]["result"]["total_ms"] != outs["4"]["result"]["total_ms"]


def test_invalid_ga_params_exit_2(capsys):
    rc = main(["map", "--model", "alexnet", "--outer-pop", "1"])
    assert rc == 2
    assert "population" in capsys.readouterr().err


def test_catalog_dump(tmp_path, capsys):
    assert main(["catalog"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert len(body["models"]) == 5

    out = tmp_path / "vgg.json"
    assert main(["catalog", "--model", "vgg16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["layers"]) == 13

    assert main(["catalog", "--model", "nope"]) == 2
