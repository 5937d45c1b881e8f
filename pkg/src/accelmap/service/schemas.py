"""Pydantic request/response models for the mapping service."""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field


class GAParams(BaseModel):
    population: int = 32
    generations: int = 50
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    crossover_rate: float = 0.8
    elites: int = 2
    seed: Optional[int] = None


DEFAULT_INNER_PARAMS = GAParams(population=16, generations=30)


class SearchRequest(BaseModel):
    """Inputs of one mapping run; builtins are referenced by name."""

    topology: Union[str, dict] = "f1"
    workload: Union[str, dict]
    designs: Optional[list[dict]] = None
    seed: int = 0
    elem_bytes: int = Field(default=2, ge=1)
    outer: GAParams = Field(default_factory=GAParams)
    inner: GAParams = Field(default_factory=lambda: DEFAULT_INNER_PARAMS.model_copy())


class OracleRequest(SearchRequest):
    max_layers: int = 4
    max_accs: int = 4
    max_designs: int = 2


class EvaluateRequest(BaseModel):
    """Re-score the mapping embedded in a previously produced report."""

    report: dict


class StrategyDoc(BaseModel):
    layer: int
    p: int
    es: list[list[Any]]
    ss: Optional[str] = None


class SetResultDoc(BaseModel):
    members: list[int]
    design: str
    layers: list[int]
    compute_ms: float
    allreduce_ms: float
    ss_ring_ms: float
    redistribution_ms: float
    memory_bytes: int
    mem_ok: bool
    strategies: list[StrategyDoc]


class ResultDoc(BaseModel):
    algorithm: str
    total_ms: float
    inter_set_ms: float
    memory_per_acc_bytes: int
    valid: bool
    sets: list[SetResultDoc]


class ReportDoc(BaseModel):
    format: str
    command: str
    config: dict
    result: Optional[ResultDoc] = None
    baseline: Optional[ResultDoc] = None
    optimized: Optional[ResultDoc] = None
    oracle: Optional[ResultDoc] = None
    ga: Optional[ResultDoc] = None
    reduction_pct: Optional[float] = None
    ga_within_1pct: Optional[bool] = None
    reevaluated_total_ms: Optional[float] = None
    matches_saved_total: Optional[bool] = None


class CatalogModelInfo(BaseModel):
    name: str
    n_convs: int
    total_macs: int
    weight_params: int


class CatalogDoc(BaseModel):
    models: list[CatalogModelInfo]
    designs: list[dict]
    topologies: list[str]
