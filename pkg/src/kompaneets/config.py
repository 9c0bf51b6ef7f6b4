"""Run configuration: strict JSON schema, presets and parsing."""
from __future__ import annotations

import copy
import json
from importlib import resources
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ParseError, SchemaError
from .grid import CANONICAL_LAST_SPACING, CANONICAL_M, CANONICAL_R

PRESETS = ("canonical", "slope", "shock", "subplanck", "superplanck")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MeshSpec(_Strict):
    M: int = Field(CANONICAL_M, ge=3)
    R: float = Field(CANONICAL_R, gt=0)
    last_spacing: float = Field(CANONICAL_LAST_SPACING, gt=0)


class SchemeSpec(_Strict):
    dt: Union[Literal["auto"], Annotated[float, Field(gt=0)]] = "auto"
    nonlinearity: Literal["ExplicitQuadratic", "SemiImplicitProduct"] = "ExplicitQuadratic"
    t_end: Optional[float] = Field(None, ge=0)
    steps: Optional[int] = Field(None, ge=0)
    record_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _one_horizon(self):
        if (self.t_end is None) == (self.steps is None):
            raise ValueError("give exactly one of t_end or steps")
        return self


class PlanckMultiple(_Strict):
    family: Literal["planck_multiple"]
    c: float = Field(ge=0)


class BoseEinstein(_Strict):
    family: Literal["bose_einstein"]
    mu: float = Field(ge=0)
    c: float = Field(1.0, ge=0)


class TruncatedLinear(_Strict):
    family: Literal["truncated_linear"]
    a: float = Field(ge=0)
    b: float = Field(ge=0)


class Bump(_Strict):
    family: Literal["bump"]
    A: float = Field(ge=0)
    x_c: float
    sigma: float = Field(gt=0)


class SuperSolution(_Strict):
    family: Literal["super_solution"]
    gamma: float = Field(ge=0)


class Custom(_Strict):
    family: Literal["custom"]
    x: list[float] = Field(min_length=2)
    n: list[float] = Field(min_length=2)


Component = Annotated[
    Union[PlanckMultiple, BoseEinstein, TruncatedLinear, Bump, SuperSolution, Custom],
    Field(discriminator="family"),
]


class DiagnosticsSpec(_Strict):
    entropy: bool = False
    energy: bool = False
    rate: bool = False
    oleinik: bool = False
    onset_threshold: Optional[float] = Field(None, gt=0)
    loss_tolerance: float = Field(5e-3, gt=0)


class PairedSpec(_Strict):
    initial: list[Component] = Field(min_length=1)
    audits: list[Literal["contraction", "comparison"]] = ["contraction", "comparison"]


class RunConfig(_Strict):
    name: str = "run"
    mesh: MeshSpec = MeshSpec()
    scheme: SchemeSpec
    initial: list[Component] = Field(min_length=1)
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()
    snapshot_times: Optional[list[float]] = None
    output_dir: str = "out"
    paired: Optional[PairedSpec] = None
    exp_decay_assertion: bool = False


def _format_loc(loc) -> str:
    parts = []
    for p in loc:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts)


def validate_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = _format_loc(err["loc"])
            if err["type"] == "extra_forbidden":
                msgs.append(f"unknown key {loc!r}")
            else:
                msgs.append(f"{loc or '<root>'}: {err['msg']}")
        raise SchemaError("; ".join(msgs)) from None


def load_json(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError("line 1: top-level JSON value must be an object")
    return data


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a JSON run configuration.

    Raises :class:`ParseError` for malformed JSON and :class:`SchemaError`
    for unknown keys or invalid values.
    """
    return validate_config(load_json(text))


def preset_data(name: str) -> dict:
    if name not in PRESETS:
        raise SchemaError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("kompaneets.presets").joinpath(f"{name}.json").read_text()
    return load_json(text)


def load_preset(name: str) -> RunConfig:
    return validate_config(preset_data(name))


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(data: dict, dotted: str, value) -> dict:
    """Copy of ``data`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(data)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        if k.isdigit() and isinstance(node, list):
            node = node[int(k)]
            continue
        node = node.setdefault(k, {})
    last = keys[-1]
    if last.isdigit() and isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


def json_schema() -> dict:
    return RunConfig.model_json_schema()
