from __future__ import annotations

import hashlib
from typing import List, Literal, Optional

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..services.errors import BudgetExceededError, ConfigError, LabError

SCHEMA_TAG = 'twoterm-lab/config-v1'

Problem = Literal['shannon', 'conditional', 'wynerZiv', 'sideInfo', 'bergerYeung', 'joint', 'partial',
                  'slepianWolf', 'singleLetter', 'corners', 'point', 'binned']


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


class SourceSpec(_Strict):
    table: Optional[List[List[float]]] = None
    dsbs: Optional[float] = None

    @model_validator(mode='after')
    def _one_kind(self):
        if (self.table is None) == (self.dsbs is None):
            raise ValueError('indica exactamente uno de "table" o "dsbs"')
        return self


class ChannelSpec(_Strict):
    kind: Literal['identity', 'constant', 'bsc', 'table'] = 'identity'
    crossover: Optional[float] = None
    matrix: Optional[List[List[float]]] = None

    @model_validator(mode='after')
    def _fields_for_kind(self):
        if self.kind == 'bsc' and self.crossover is None:
            raise ValueError('kind "bsc" necesita "crossover"')
        if self.kind == 'table' and self.matrix is None:
            raise ValueError('kind "table" necesita "matrix"')
        return self


class DistortionSpec(_Strict):
    target: Literal['joint', 'x1', 'x2'] = 'x1'
    hamming: bool = False
    matrix: Optional[List[List[float]]] = None
    d_max: Optional[float] = Field(default=None, alias='dMax')

    @model_validator(mode='after')
    def _one_kind(self):
        if self.hamming == (self.matrix is not None):
            raise ValueError('indica "hamming": true o una "matrix", no ambos')
        return self


class AuxSpecModel(_Strict):
    card_z1: Optional[int] = Field(default=None, alias='cardZ1', ge=1)
    card_z2: Optional[int] = Field(default=None, alias='cardZ2', ge=1)
    grid_step: float = Field(default=0.0625, alias='gridStep', gt=0, le=0.5)
    restarts: int = Field(default=32, ge=1)
    max_iterations: int = Field(default=2000, alias='maxIterations', ge=1)
    tolerance: float = Field(default=1e-9, gt=0)


class EpsilonSpec(_Strict):
    epsilon: float = Field(gt=0)
    epsilon1: Optional[float] = Field(default=None, gt=0)
    epsilon4: Optional[float] = Field(default=None, gt=0)
    support_restricted: bool = Field(default=False, alias='supportRestricted')


class LabConfig(_Strict):
    schema_tag: Literal['twoterm-lab/config-v1'] = Field(default=SCHEMA_TAG, alias='$schema')
    problem: Problem
    source: SourceSpec
    aux1: ChannelSpec = ChannelSpec()
    aux2: ChannelSpec = ChannelSpec()
    distortion: Optional[DistortionSpec] = None
    order: int = Field(default=1, ge=1)
    aux: AuxSpecModel = AuxSpecModel()
    epsilons: Optional[EpsilonSpec] = None
    schedule: List[int] = []
    targets: List[float] = []
    trials: int = Field(default=1000, ge=1)
    seed: int
    corner: Optional[Literal[0, 1]] = None
    lam: Optional[float] = Field(default=None, alias='lambda', ge=0, le=1)
    blocks: int = Field(default=10, ge=1)
    psi: Optional[List[List[int]]] = None
    output: Optional[str] = None

    @model_validator(mode='after')
    def _schedule_positive(self):
        if any(n < 1 for n in self.schedule):
            raise ValueError('schedule: cada n\' debe ser >= 1')
        if any(t < 0 for t in self.targets):
            raise ValueError('targets: los objetivos deben ser >= 0')
        return self


def _format_error(err: dict) -> str:
    loc = '.'.join(str(p) for p in err.get('loc', ())) or 'config'
    if err.get('type') == 'extra_forbidden':
        return f'{loc}: unknown field'
    if err.get('type') == 'missing':
        return f'{loc}: campo obligatorio ausente'
    return f'{loc}: {err.get("msg", "valor inválido")}'


def parse_config(text) -> LabConfig:
    """Valida el texto JSON y comprueba la coherencia de tablas y dimensiones.

    Raises:
        ConfigError: con un mensaje por campo problemático.
    """
    try:
        cfg = LabConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError([_format_error(e) for e in exc.errors()]) from exc
    from ..services.pipeline import build_inputs
    try:
        build_inputs(cfg)
    except (ConfigError, BudgetExceededError):
        raise
    except (LabError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc
    return cfg


def dump_config(cfg: LabConfig) -> bytes:
    payload = cfg.model_dump(mode='json', by_alias=True, exclude_none=True)
    return orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)


def config_hash(cfg: LabConfig) -> str:
    return hashlib.sha256(dump_config(cfg)).hexdigest()[:16]

