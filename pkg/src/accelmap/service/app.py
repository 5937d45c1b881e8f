"""FastAPI service exposing the mapper: search, baseline, oracle, evaluate.

The CLI is a thin client of this app; requests carry builtin names or full
documents, responses are self-describing report documents.
"""

from __future__ import annotations

from fastapi import FastAPI

from .. import reports
from ..designs import (
    CYCLE_MODEL_VERSION,
    builtin_designs,
    design_from_dict,
)
from ..errors import AccelMapError, FormatError, NotFoundError
from ..evaluator import MappingEvaluator
from ..oracle import OracleLimits, run_oracle
from ..search import GAConfig, run_baseline, run_outer_ga
from ..topology import (
    BUILTIN_TOPOLOGIES,
    builtin_topology,
    topology_from_dict,
)
from ..workload import CATALOG_MODELS, catalog, workload_from_dict
from .schemas import (
    CatalogDoc,
    CatalogModelInfo,
    EvaluateRequest,
    GAParams,
    OracleRequest,
    ReportDoc,
    SearchRequest,
)


def _ga_config(params: GAParams) -> GAConfig:
    return GAConfig(
        population=params.population,
        generations=params.generations,
        mutation_rate=params.mutation_rate,
        mutation_sigma=params.mutation_sigma,
        crossover_rate=params.crossover_rate,
        elites=params.elites,
        seed=params.seed,
    )


def _resolve(req: SearchRequest):
    topo = (
        builtin_topology(req.topology)
        if isinstance(req.topology, str)
        else topology_from_dict(req.topology)
    )
    workload = (
        catalog(req.workload)
        if isinstance(req.workload, str)
        else workload_from_dict(req.workload)
    )
    designs = (
        builtin_designs()
        if req.designs is None
        else [design_from_dict(d) for d in req.designs]
    )
    if not designs:
        raise FormatError("designs: need at least one design")
    return topo, workload, designs


def _config_doc(req: SearchRequest, topo, workload, designs) -> dict:
    return {
        "seed": req.seed,
        "elem_bytes": req.elem_bytes,
        "outer_ga": req.outer.model_dump(),
        "inner_ga": req.inner.model_dump(),
        "cycle_model": CYCLE_MODEL_VERSION,
        "topology": topo.to_dict(),
        "workload": workload.to_dict(),
        "designs": [d.to_dict() for d in designs],
    }


def create_app() -> FastAPI:
    app = FastAPI(
        title="accelmap",
        description="Mapping search for DNN inference on multi-accelerator systems",
        version="0.1.0",
    )

    @app.exception_handler(AccelMapError)
    async def _domain_error(request, exc: AccelMapError):
        from fastapi.responses import JSONResponse

        status = 404 if isinstance(exc, NotFoundError) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "cycle_model": CYCLE_MODEL_VERSION}

    @app.get("/catalog", response_model=CatalogDoc)
    def catalog_index():
        models = []
        for name in CATALOG_MODELS:
            w = catalog(name)
            models.append(CatalogModelInfo(
                name=name,
                n_convs=len(w),
                total_macs=w.total_macs(),
                weight_params=w.total_weight_params(),
            ))
        return CatalogDoc(
            models=models,
            designs=[d.to_dict() for d in builtin_designs()],
            topologies=list(BUILTIN_TOPOLOGIES),
        )

    @app.get("/catalog/models/{name}")
    def catalog_model(name: str):
        return catalog(name).to_dict()

    @app.get("/catalog/topologies/{name}")
    def catalog_topology(name: str):
        return builtin_topology(name).to_dict()

    @app.post("/map", response_model=ReportDoc, response_model_exclude_none=True)
    def map_endpoint(req: SearchRequest):
        topo, workload, designs = _resolve(req)
        result = run_outer_ga(
            workload, topo, designs,
            cfg_outer=_ga_config(req.outer), cfg_inner=_ga_config(req.inner),
            seed=req.seed, elem_bytes=req.elem_bytes,
        )
        body = {"result": reports.result_to_dict(result.mapping, result.report, "two-level-ga")}
        return reports.build_report("map", _config_doc(req, topo, workload, designs), body)

    @app.post("/baseline", response_model=ReportDoc, response_model_exclude_none=True)
    def baseline_endpoint(req: SearchRequest):
        topo, workload, designs = _resolve(req)
        result = run_baseline(workload, topo, designs, elem_bytes=req.elem_bytes)
        body = {"result": reports.result_to_dict(result.mapping, result.report, "baseline")}
        return reports.build_report("baseline", _config_doc(req, topo, workload, designs), body)

    @app.post("/compare", response_model=ReportDoc, response_model_exclude_none=True)
    def compare_endpoint(req: SearchRequest):
        topo, workload, designs = _resolve(req)
        base = run_baseline(workload, topo, designs, elem_bytes=req.elem_bytes)
        best = run_outer_ga(
            workload, topo, designs,
            cfg_outer=_ga_config(req.outer), cfg_inner=_ga_config(req.inner),
            seed=req.seed, elem_bytes=req.elem_bytes,
        )
        body = {
            "baseline": reports.result_to_dict(base.mapping, base.report, "baseline"),
            "optimized": reports.result_to_dict(best.mapping, best.report, "two-level-ga"),
            "reduction_pct": reports.reduction_pct(
                base.report.total_ms, best.report.total_ms
            ),
        }
        return reports.build_report("compare", _config_doc(req, topo, workload, designs), body)

    @app.post("/oracle", response_model=ReportDoc, response_model_exclude_none=True)
    def oracle_endpoint(req: OracleRequest):
        topo, workload, designs = _resolve(req)
        limits = OracleLimits(req.max_layers, req.max_accs, req.max_designs)
        best = run_oracle(workload, topo, designs, limits, elem_bytes=req.elem_bytes)
        ga = run_outer_ga(
            workload, topo, designs,
            cfg_outer=_ga_config(req.outer), cfg_inner=_ga_config(req.inner),
            seed=req.seed, elem_bytes=req.elem_bytes,
        )
        body = {
            "oracle": reports.result_to_dict(best.mapping, best.report, "oracle"),
            "ga": reports.result_to_dict(ga.mapping, ga.report, "two-level-ga"),
            "ga_within_1pct": ga.report.total_s <= best.report.total_s * 1.01,
        }
        return reports.build_report("oracle", _config_doc(req, topo, workload, designs), body)

    @app.post("/evaluate", response_model=ReportDoc, response_model_exclude_none=True)
    def evaluate_endpoint(req: EvaluateRequest):
        doc = req.report
        if not isinstance(doc, dict) or doc.get("format") != reports.REPORT_FORMAT:
            raise FormatError(f"report: expected format {reports.REPORT_FORMAT!r}")
        config = doc.get("config") or {}
        try:
            topo = topology_from_dict(config["topology"])
            workload = workload_from_dict(config["workload"])
            designs = [design_from_dict(d) for d in config["designs"]]
        except KeyError as exc:
            raise FormatError(f"report config missing {exc}") from exc
        saved = doc.get("result") or doc.get("optimized") or doc.get("ga")
        if saved is None:
            raise FormatError("report carries no mapping result to re-evaluate")
        elem_bytes = int(config.get("elem_bytes", 2))
        mapping = reports.mapping_from_result(saved, workload, topo, designs)
        evaluator = MappingEvaluator(workload, topo, elem_bytes)
        rescored = evaluator.evaluate(mapping)
        body = {
            "result": reports.result_to_dict(mapping, rescored, saved.get("algorithm", "saved")),
            "reevaluated_total_ms": rescored.total_ms,
            "matches_saved_total": rescored.total_ms == saved.get("total_ms"),
        }
        return reports.build_report("evaluate", config, body)

    return app


app = create_app()
