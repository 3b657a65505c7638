"""
Run configuration schema.

A run is described by one TOML document; unknown keys are rejected so typos
surface as errors instead of silently falling back to defaults.

    mode = "compare"
    seed = 7

    [dataset]
    kind = "haar-unitary"
    n_qubits = 1
    size = 10

    [gs1]
    label = "HT"
    gates = ["H1", "T1"]

    [gs2]
    label = "P1P1"
    gates = ["P1", "P1"]
    params = [1.0, 2.0, 3.0, 0.5, 1.5, 2.5]
"""

import json
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.errors import ConfigError
from src.services.datasets import DatasetKind
from src.services.decomposition import FidelityMetric
from src.services.discover_service import SearchMethod
from src.services.gatelib import CATALOG, GateId, GateSpec
from src.services.pipeline_service import MultiQubitMethod, OneQubitMethod, PipelineConfig, TwoQubitMethod


class Mode(str, Enum):
    COMPILE = "compile"
    COMPARE = "compare"
    DISCOVER = "discover"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class GateConfig(StrictModel):
    id: GateId
    cost: float = Field(1.0, ge=0, description="Fabrication cost used by the c_agf metric")
    file: Optional[str] = Field(None, description="Matrix file for F1/F2 gates")

    def to_spec(self) -> GateSpec:
        return GateSpec(self.id, self.cost, self.file)


class GateSetConfig(StrictModel):
    label: str
    gates: List[GateConfig] = Field(..., min_length=1)
    params: List[float] = Field(default_factory=list)
    include_daggers: bool = False

    @field_validator("gates", mode="before")
    @classmethod
    def gate_shorthand(cls, v):
        # "H1" is shorthand for {id = "H1"}
        if isinstance(v, list):
            return [{"id": g} if isinstance(g, str) else g for g in v]
        return v

    @model_validator(mode="after")
    def file_gates_have_paths(self):
        for g in self.gates:
            if g.id in (GateId.F1, GateId.F2) and not g.file:
                raise ValueError(f"{g.id.value} gate needs a 'file'")
        return self

    @property
    def param_count(self) -> int:
        return sum(CATALOG[g.id][2] for g in self.gates)

    def specs(self) -> List[GateSpec]:
        return [g.to_spec() for g in self.gates]


class DatasetConfig(StrictModel):
    kind: DatasetKind
    n_qubits: int = Field(1, ge=1, le=6)
    size: int = Field(10, ge=1)
    seed: Optional[int] = Field(None, description="Defaults to the run seed")
    resolution: int = Field(2, ge=1, description="Grid points per axis for u3-grid")
    paths: List[str] = Field(default_factory=list, description="Matrix files for from-files")

    @model_validator(mode="after")
    def files_listed(self):
        if self.kind == DatasetKind.FROM_FILES and not self.paths:
            raise ValueError("from-files dataset needs 'paths'")
        return self


class PipelineSettings(StrictModel):
    oneq: OneQubitMethod = OneQubitMethod.SKD
    twoq: TwoQubitMethod = TwoQubitMethod.KAK
    nq: MultiQubitMethod = MultiQubitMethod.QSD
    basis_depth: int = Field(6, ge=1)
    recursion: int = Field(2, ge=0)
    rd_trials: int = Field(500, ge=1)
    rd_max_length: int = Field(20, ge=1)
    kak_max_apps: int = Field(3, ge=0)
    metric: FidelityMetric = FidelityMetric.PROCESS

    def to_config(self) -> PipelineConfig:
        return PipelineConfig(**self.model_dump())


class SearchSettings(StrictModel):
    method: SearchMethod = SearchMethod.LOCAL
    max_evals: int = Field(500, ge=1)
    restarts: int = Field(1, ge=1)
    initial_point: Optional[List[float]] = None
    bounds: Optional[List[Tuple[float, float]]] = Field(
        None, description="Per-parameter [lo, hi]; defaults to the catalog parameter domains"
    )


class RunConfig(StrictModel):
    mode: Mode
    label: str = "run"
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    output_dir: Optional[str] = None
    dataset: DatasetConfig
    gs1: Optional[GateSetConfig] = None
    gs2: Optional[GateSetConfig] = None
    ansatz: Optional[GateSetConfig] = None
    pipeline: PipelineSettings = Field(default_factory=PipelineSettings)
    weights: List[float] = Field(default_factory=lambda: [50.0, 1.0, 1.0, 1.0, 0.0], min_length=5, max_length=5)
    search: SearchSettings = Field(default_factory=SearchSettings)
    export_coords: bool = True

    @model_validator(mode="after")
    def mode_requirements(self):
        if self.gs1 is None:
            raise ValueError(f"{self.mode.value} mode needs 'gs1'")
        if self.mode == Mode.COMPILE and (self.gs2 is not None or self.ansatz is not None):
            raise ValueError("compile mode takes exactly one gate set ('gs1')")
        if self.mode == Mode.COMPARE and self.gs2 is None:
            raise ValueError("compare mode needs 'gs2'")
        if self.mode == Mode.DISCOVER and self.ansatz is None:
            raise ValueError("discover mode needs 'ansatz'")
        for name in ("gs1", "gs2", "ansatz"):
            gs = getattr(self, name)
            if gs is None or (name == "ansatz" and not gs.params):
                continue
            if len(gs.params) != gs.param_count:
                raise ValueError(f"{name}.params has {len(gs.params)} values, the gates take {gs.param_count}")
        if any(w < 0 for w in self.weights) or not any(w > 0 for w in self.weights):
            raise ValueError("weights must be >= 0 and not all zero")
        return self

    def effective(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _line_of(text: str, loc: Tuple[Union[str, int], ...]) -> Optional[int]:
    """Best-effort line of the innermost named key of a validation error."""
    keys = [k for k in loc if isinstance(k, str)]
    if not keys:
        return None
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        header = re.match(r"^\[+\s*([^\]]+?)\s*\]+$", stripped)
        if header:
            section = header.group(1)
            if section == ".".join(keys):
                return lineno
            continue
        if re.match(rf"^{re.escape(keys[-1])}\s*=", stripped):
            expected = ".".join(keys[:-1]) or None
            if section == expected or expected is None:
                return lineno
    return None


def _validation_error(e: ValidationError, text: str) -> ConfigError:
    err = e.errors()[0]
    loc = tuple(err["loc"])
    field = ".".join(str(k) for k in loc) or None
    msg = err["msg"]
    if err["type"] == "missing":
        msg = "field required"
    elif err["type"] == "extra_forbidden":
        msg = "unknown key"
    return ConfigError(msg, field=field, line=_line_of(text, loc))


def load_config_dict(data: Dict[str, Any], text: str = "") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e, text)


def parse_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Parse a TOML run config, or the ``config`` block of a run manifest (JSON).

    ``overrides`` (command-line flags) replace top-level values before
    validation, so the returned config is the merged effective one.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path} ({e.strerror})")

    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, line=e.lineno)
        data = data.get("config", data)
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(str(e))

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return load_config_dict(data, text)


def config_schema() -> Dict[str, Any]:
    return RunConfig.model_json_schema()
