"""JSON run configuration (schema version 1).

Example::

    {
      "schema": 1,
      "model": {
        "margins": [{"family": "pareto", "alpha": 0.3333333333333333},
                    {"family": "pareto", "alpha": 0.2}],
        "copula": {"family": "clayton", "theta": 1.5},
        "tail_distortion": {"family": "power_tail", "params": {"rho_inverse": 1.2}},
        "copula_distortion": {"family": "power_copula", "params": {"delta": 4}}
      },
      "quadrature": {"abs_tol": 1e-8},
      "delta_grid": [1, 1.5, 2, 2.5, 3, 3.5, 4, 5, 6],
      "seed": 42,
      "output_path": "table.csv"
    }

The document's structure is checked here; parameter ranges are checked by
the modules that own them, and their errors are relabelled with the path of
the offending config field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, StrictInt, ValidationError

from . import distortion as dist
from . import margins as marg
from .aggregate import PortfolioModel, QuadratureConfig, delta_distortion
from .copula import ArchimedeanCopula, generator_from_spec
from .errors import CdrmError, ConfigError

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _DistortionDoc(_Strict):
    family: str
    params: dict[str, float] = Field(default_factory=dict)


class _ModelDoc(_Strict):
    margins: list[dict[str, Any]]
    copula: dict[str, Any]
    tail_distortion: _DistortionDoc
    copula_distortion: _DistortionDoc | None = None


class _QuadratureDoc(_Strict):
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: StrictInt = 2000
    tail_truncation_prob: float = 1e-10


class _RunDoc(_Strict):
    schema_version: Literal[1] = Field(alias="schema")
    model: _ModelDoc
    quadrature: _QuadratureDoc = Field(default_factory=_QuadratureDoc)
    delta_grid: list[float] = Field(default_factory=list)
    seed: StrictInt = 0
    output_path: str | None = None
    sample_size: StrictInt = 100_000


@dataclass(frozen=True)
class RunConfig:
    model: PortfolioModel
    quadrature: QuadratureConfig
    delta_grid: tuple[float, ...] = ()
    seed: int = 0
    output_path: str | None = None
    sample_size: int = 100_000

    @property
    def delta_family(self) -> str:
        gamma = self.model.copula_distortion
        return "power_copula" if gamma is None else gamma.family


def _relabel(exc: CdrmError, path: str) -> ConfigError:
    where = path if exc.field is None else f"{path}.{exc.field}"
    return ConfigError(str(exc), field=where)


def _build(doc: _RunDoc) -> RunConfig:
    m = doc.model
    if not m.margins:
        raise ConfigError("at least one margin is required", field="model.margins")
    margins = []
    for i, spec in enumerate(m.margins):
        try:
            margins.append(marg.from_spec(spec))
        except CdrmError as exc:
            raise _relabel(exc, f"model.margins[{i}]") from None
    try:
        copula = ArchimedeanCopula(generator_from_spec(m.copula), len(margins))
    except CdrmError as exc:
        raise _relabel(exc, "model.copula") from None
    try:
        psi = dist.from_spec(m.tail_distortion.model_dump())
    except CdrmError as exc:
        raise _relabel(exc, "model.tail_distortion") from None
    gamma = None
    if m.copula_distortion is not None:
        try:
            gamma = dist.from_spec(m.copula_distortion.model_dump())
        except CdrmError as exc:
            raise _relabel(exc, "model.copula_distortion") from None
    try:
        model = PortfolioModel(tuple(margins), copula, psi, gamma)
    except CdrmError as exc:
        raise _relabel(exc, "model") from None
    try:
        q = QuadratureConfig(**doc.quadrature.model_dump())
    except CdrmError as exc:
        raise _relabel(exc, "quadrature") from None
    cfg = RunConfig(model, q, tuple(doc.delta_grid), doc.seed, doc.output_path, doc.sample_size)
    for i, d in enumerate(cfg.delta_grid):
        try:
            delta_distortion(cfg.delta_family, d)
        except CdrmError as exc:
            raise ConfigError(str(exc), field=f"delta_grid[{i}]") from None
    if cfg.sample_size < 1:
        raise ConfigError("sample_size must be positive", field="sample_size")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a JSON run configuration."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          field=f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(raw, dict):
        raise ConfigError("the configuration must be a JSON object")
    try:
        doc = _RunDoc.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) if isinstance(p, str) else f"[{p}]" for p in err["loc"]).replace(".[", "[")
        raise ConfigError(f"{err['msg']}", field=loc or None) from None
    return _build(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    m = cfg.model
    q = cfg.quadrature
    return {
        "schema": SCHEMA_VERSION,
        "model": {
            "margins": [x.to_spec() for x in m.margins],
            "copula": m.copula.generator.to_spec(),
            "tail_distortion": m.tail_distortion.to_spec(),
            "copula_distortion": None if m.copula_distortion is None else m.copula_distortion.to_spec(),
        },
        "quadrature": {"abs_tol": q.abs_tol, "rel_tol": q.rel_tol, "max_subdivisions": q.max_subdivisions,
                       "tail_truncation_prob": q.tail_truncation_prob},
        "delta_grid": list(cfg.delta_grid),
        "seed": cfg.seed,
        "output_path": cfg.output_path,
        "sample_size": cfg.sample_size,
    }


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2)
