"""Command line front end: a thin client of the mapping service.

By default requests run against an in-process instance of the FastAPI app
(no server needed); --server points the same commands at a remote instance.
Reports are written as canonical JSON so identical runs produce identical
bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from . import reports
from .designs import design_from_dict
from .errors import AccelMapError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2


class CliError(Exception):
    """User/configuration problem; maps to exit status 2."""


class ServiceError(Exception):
    """Server-side failure; maps to exit status 1."""


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process mode: drive the ASGI app directly through the sync portal,
    # so the CLI works without a running server.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from exc


def _topology_arg(value: str):
    return _read_json(value) if Path(value).is_file() else value


def _search_request(args) -> dict:
    if args.workload:
        workload = _read_json(args.workload)
    elif args.model:
        workload = args.model
    else:
        raise CliError("need --model <catalog name> or --workload <file>")
    req: dict = {
        "topology": _topology_arg(args.topology),
        "workload": workload,
        "seed": args.seed,
        "elem_bytes": args.elem_bytes,
        "outer": {"population": args.outer_pop, "generations": args.outer_gens},
        "inner": {"population": args.inner_pop, "generations": args.inner_gens},
    }
    if args.designs:
        doc = _read_json(args.designs)
        req["designs"] = doc["designs"] if isinstance(doc, dict) else doc
    return req


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach service: {exc}") from exc
    if response.status_code >= 500:
        raise ServiceError(response.text)
    if response.status_code >= 400:
        detail = response.json().get("detail", response.text)
        raise CliError(str(detail))
    return response.json()


def _emit(doc: dict, out: str | None) -> None:
    text = reports.dumps_report(doc)
    if out:
        Path(out).write_text(text)
        print(f"report written to {out}")


def _designs_of(doc: dict):
    return [design_from_dict(d) for d in doc["config"]["designs"]]


def _cmd_map(args, client) -> int:
    doc = _post(client, "/map", _search_request(args))
    print(reports.render_result(doc["result"], _designs_of(doc), args.verbose))
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_baseline(args, client) -> int:
    doc = _post(client, "/baseline", _search_request(args))
    print(reports.render_result(doc["result"], _designs_of(doc), args.verbose))
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_compare(args, client) -> int:
    doc = _post(client, "/compare", _search_request(args))
    model = doc["config"]["workload"]["name"]
    print(reports.render_compare(doc["baseline"], doc["optimized"], _designs_of(doc), model))
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_oracle(args, client) -> int:
    req = _search_request(args)
    doc = _post(client, "/oracle", req)
    designs = _designs_of(doc)
    print(reports.render_result(doc["oracle"], designs, args.verbose))
    print(reports.render_result(doc["ga"], designs, args.verbose))
    print(f"GA matches oracle within 1%: {'yes' if doc['ga_within_1pct'] else 'NO'}")
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_evaluate(args, client) -> int:
    saved = _read_json(args.report)
    doc = _post(client, "/evaluate", {"report": saved})
    print(reports.render_result(doc["result"], _designs_of(doc), args.verbose))
    match = doc.get("matches_saved_total")
    print(f"re-evaluated total: {doc['reevaluated_total_ms']:.6g} ms "
          f"(matches saved report: {'yes' if match else 'NO'})")
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_catalog(args, client) -> int:
    if args.model:
        try:
            response = client.get(f"/catalog/models/{args.model}")
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach service: {exc}") from exc
    elif args.topology_name:
        try:
            response = client.get(f"/catalog/topologies/{args.topology_name}")
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach service: {exc}") from exc
    else:
        response = client.get("/catalog")
    if response.status_code >= 400:
        raise CliError(str(response.json().get("detail", response.text)))
    text = json.dumps(response.json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"written to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_serve(args, client) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _add_search_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topology", default="f1",
                        help="builtin topology name or JSON file (default: f1)")
    parser.add_argument("--model", help="catalog model name")
    parser.add_argument("--workload", help="workload JSON file")
    parser.add_argument("--designs", help="designs JSON file (default: builtins)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--elem-bytes", type=int, default=2)
    parser.add_argument("--outer-pop", type=int, default=32)
    parser.add_argument("--outer-gens", type=int, default=50)
    parser.add_argument("--inner-pop", type=int, default=16)
    parser.add_argument("--inner-gens", type=int, default=30)
    parser.add_argument("--out", help="write the machine-readable report here")
    parser.add_argument("--verbose", action="store_true",
                        help="print every layer's strategy, not one per set")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", default=None,
                        help="remote service URL (default: in-process)")
    parser = argparse.ArgumentParser(
        prog="accelmap",
        description="Map DNN inference onto a multi-accelerator system",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in [
        ("map", _cmd_map, "search a mapping with the two-level GA"),
        ("baseline", _cmd_baseline, "run the group-aligned baseline mapper"),
        ("compare", _cmd_compare, "baseline vs GA with reduction percentage"),
        ("oracle", _cmd_oracle, "exhaustive optimum on a tiny instance plus GA check"),
    ]:
        p = sub.add_parser(name, help=doc, parents=[common])
        _add_search_args(p)
        p.set_defaults(handler=fn)

    p = sub.add_parser("evaluate", help="re-score the mapping saved in a report",
                       parents=[common])
    p.add_argument("--report", required=True, help="report JSON file")
    p.add_argument("--out", help="write the re-evaluation report here")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("catalog", help="dump builtin models, designs and topologies",
                       parents=[common])
    p.add_argument("--model", help="dump one catalog model as a workload document")
    p.add_argument("--topology-name", help="dump one builtin topology document")
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_catalog)

    p = sub.add_parser("serve", help="run the mapping service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return args.handler(args, None)
        with _client(args.server) as client:
            return args.handler(args, client)
    except (CliError, AccelMapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ServiceError as exc:
        print(f"internal service error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
