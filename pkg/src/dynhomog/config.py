"""Run configuration: schema, loading and conversion to model objects.

Configs are YAML (JSON is accepted since it is a YAML subset).  Unknown keys
are rejected.  Validation failures carry the offending field path and, when
the file was parsed from text, its line number.
"""
from __future__ import annotations

import hashlib
import math
import os
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dispersion import DEFAULT_STEPS_PER_UNIT, DEFAULT_TOL_ROOT
from .spectral import DEFAULT_EPS_POLE, SpectralBasis
from .unit_cell import (
    DEFAULT_EPS_MAT,
    DiscretizedCell,
    Layer,
    Material,
    ReferenceMedium,
    UnitCell,
    discretize,
    reference_from_average,
    reference_from_layer,
)

SEED_ENV = "DYNHOMOG_SEED"


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` lists every problem with its location."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LayerSpec(_Strict):
    density: float = Field(gt=0)
    compliance: Optional[float] = Field(default=None, gt=0)
    modulus: Optional[float] = Field(default=None, gt=0)
    thickness: float = Field(gt=0)

    @model_validator(mode="after")
    def _one_stiffness(self):
        if (self.compliance is None) == (self.modulus is None):
            raise ValueError("give exactly one of 'compliance' or 'modulus'")
        return self

    def material(self) -> Material:
        if self.compliance is not None:
            return Material(self.density, self.compliance)
        return Material.from_modulus(self.density, self.modulus)


class CellSpec(_Strict):
    layers: list[LayerSpec] = Field(min_length=1)


class ExplicitReference(_Strict):
    rho0: float = Field(gt=0)
    D0: float = Field(gt=0)


class FourierSpec(_Strict):
    n_max: Optional[int] = Field(default=None, ge=1)


class ScanSpec(_Strict):
    q_points: int = Field(default=32, ge=1)
    q_range: tuple[float, float] = (0.0, 1.0)
    omega_max: Optional[float] = Field(default=None, gt=0)
    n_branches: int = Field(default=3, ge=1)
    steps_per_unit: float = Field(default=DEFAULT_STEPS_PER_UNIT, gt=0)

    @field_validator("q_range")
    @classmethod
    def _range(cls, v):
        lo, hi = v
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("q_range must satisfy 0 <= start < end <= 1 (fractions of pi/a)")
        return v


class ToleranceSpec(_Strict):
    eps_mat: float = Field(default=DEFAULT_EPS_MAT, gt=0, lt=1)
    eps_pole: float = Field(default=DEFAULT_EPS_POLE, gt=0, lt=1)
    tol_root: float = Field(default=DEFAULT_TOL_ROOT, gt=0, lt=1)


class OutputSpec(_Strict):
    directory: str = "out"
    format: Literal["csv", "json"] = "csv"
    precision: int = Field(default=12, ge=1, le=17)


class VerifySpec(_Strict):
    samples: int = Field(default=64, ge=1)
    branch_q_points: int = Field(default=4, ge=1)


class FieldsSpec(_Strict):
    q: float = Field(default=0.5, gt=0, le=1)
    branch: int = Field(default=1, ge=1)
    points_per_subregion: int = Field(default=16, ge=1)


class RunConfig(_Strict):
    cell: CellSpec
    reference: Union[str, ExplicitReference] = "layer-average"
    discretization: list[int]
    fourier: FourierSpec = FourierSpec()
    scan: ScanSpec = ScanSpec()
    tolerances: ToleranceSpec = ToleranceSpec()
    output: OutputSpec = OutputSpec()
    seed: int = 0
    verify: VerifySpec = VerifySpec()
    fields: FieldsSpec = FieldsSpec()

    @field_validator("reference")
    @classmethod
    def _reference(cls, v):
        if isinstance(v, str) and v != "layer-average":
            head, _, idx = v.partition(":")
            if head != "layer" or not idx.isdigit() or int(idx) < 1:
                raise ValueError("reference must be 'layer-average', 'layer:<n>' (1-based) or {rho0, D0}")
        return v

    @field_validator("discretization")
    @classmethod
    def _counts(cls, v):
        if any(c < 1 for c in v):
            raise ValueError("subregion counts must be positive integers")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        n = len(self.cell.layers)
        if len(self.discretization) != n:
            raise ValueError(f"discretization: has {len(self.discretization)} entries but cell.layers has {n}")
        if isinstance(self.reference, str) and self.reference.startswith("layer:"):
            if int(self.reference.split(":")[1]) > n:
                raise ValueError(f"reference: {self.reference!r} exceeds the {n} layers")
        return self

    # ---------------------------------------------------------------- model objects

    def unit_cell(self) -> UnitCell:
        return UnitCell(tuple(Layer(spec.material(), spec.thickness) for spec in self.cell.layers))

    def reference_medium(self, cell: UnitCell | None = None) -> ReferenceMedium:
        cell = cell or self.unit_cell()
        if isinstance(self.reference, ExplicitReference):
            return ReferenceMedium(self.reference.rho0, self.reference.D0)
        if self.reference == "layer-average":
            return reference_from_average(cell)
        return reference_from_layer(cell, int(self.reference.split(":")[1]) - 1)

    def discretized(self, ref: ReferenceMedium | None = None) -> DiscretizedCell:
        cell = self.unit_cell()
        return discretize(cell, self.discretization, ref or self.reference_medium(cell), self.tolerances.eps_mat)

    def basis(self, dcell: DiscretizedCell) -> SpectralBasis:
        return SpectralBasis.for_cell(dcell, self.fourier.n_max)

    def q_values(self) -> list[float]:
        """``q_points`` wavenumbers evenly spaced in ``(start, end]`` times pi/a."""
        a = self.unit_cell().period
        lo, hi = self.scan.q_range
        n = self.scan.q_points
        return [(lo + (hi - lo) * k / n) * math.pi / a for k in range(1, n + 1)]

    def effective_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        if env is not None and env.strip():
            try:
                return int(env)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
        return self.seed


def _node_line(root, loc) -> Optional[int]:
    """1-based line of the YAML node at pydantic location ``loc``."""
    node, line = root, None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            pair = next(((k, v) for k, v in node.value if k.value == str(key)), None)
            if pair is None:
                break
            line = pair[0].start_mark.line + 1
            node = pair[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


# pydantic inserts the union member name into error locations
_UNION_TAGS = {"str", "ExplicitReference"}


def _format_errors(exc: ValidationError, root) -> str:
    lines = []
    for err in exc.errors():
        loc = tuple(p for p in err["loc"] if p not in _UNION_TAGS and not str(p).startswith("function-"))
        msg = err["msg"].removeprefix("Value error, ")
        head, sep, rest = msg.partition(": ")
        if not loc and sep and head in RunConfig.model_fields:
            # cross-field checks name their field first
            loc, msg = (head,), rest
        path = ".".join(str(p) for p in loc) or "<root>"
        where = _node_line(root, loc) if root is not None else None
        prefix = f"line {where}: " if where else ""
        lines.append(f"{prefix}{path}: {msg}")
    return "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root)) from None


def load_config(path: str | os.PathLike) -> tuple[RunConfig, str]:
    """Parsed config and the SHA-256 of the file bytes."""
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text") from exc
    return parse_config(text), hashlib.sha256(raw).hexdigest()
