from enum import Enum
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .constructions import ParamSchedule
from .error import ConfigError
from .rip import DEFAULT_SAMPLES, DEFAULT_SUBSET_BUDGET

__all__ = ['Command', 'Lemma', 'LevelSize', 'ScheduleSpec', 'Budgets', 'RunConfig']

SEED_LIMIT = 2 ** 64


class Command(str, Enum):
    RIP_GEN = "rip-gen"
    RIP_CERTIFY = "rip-certify"
    BUILD = "build"
    FACTORIZE = "factorize"
    SEPARATE = "separate"
    REMARK = "remark"
    FSS_PROBE = "fss-probe"
    SCHEDULE_CHECK = "schedule-check"


class Lemma(str, Enum):
    FORMAL_IDENTITY = "formal-identity"
    IDENTITY = "identity"
    EMBEDDING = "embedding"
    LARGE_IDEAL = "large-ideal"
    WITNESSED = "witnessed"


class LevelSize(BaseModel):
    model_config = ConfigDict(extra='forbid')

    u: int = Field(gt=0)
    v: int = Field(gt=0)


class ScheduleSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    p: Union[int, float, str]
    levels: List[LevelSize]
    name: Optional[str] = None


class Budgets(BaseModel):
    model_config = ConfigDict(extra='forbid')

    subsets: int = Field(DEFAULT_SUBSET_BUDGET, gt=0)
    rip_samples: int = Field(DEFAULT_SAMPLES, gt=0)
    lp_tolerance: float = Field(1e-9, gt=0)
    norm_restarts: int = Field(64, gt=0)
    samples: int = Field(100, ge=0)
    trials: int = Field(8, gt=0)
    max_tries: int = Field(1000, gt=0)
    milman: int = Field(10 ** 6, gt=0)


class RunConfig(BaseModel):
    """Everything a run depends on; a report is a function of this object alone."""
    model_config = ConfigDict(extra='forbid')

    command: Command
    schedule: Union[str, ScheduleSpec] = "tiny"
    seed: int = Field(0, ge=0, lt=SEED_LIMIT)
    threads: Optional[int] = Field(None, gt=0)
    budgets: Budgets = Field(default_factory=Budgets)
    mask_m: List[int] = Field(default_factory=list)
    mask_n: List[int] = Field(default_factory=list)
    m: Optional[int] = Field(None, gt=0)
    level: Optional[int] = Field(None, gt=0)
    m_cols: Optional[int] = Field(None, gt=0)
    lemma: Lemma = Lemma.FORMAL_IDENTITY
    orders: Optional[List[int]] = None
    dims: List[int] = Field(default_factory=list)
    q: Optional[float] = Field(None, ge=1)
    lq_dim: int = Field(8, gt=0)
    margin: Optional[float] = None
    out: Optional[str] = None
    csv: Optional[str] = None

    @field_validator('mask_m', 'mask_n', 'dims')
    @classmethod
    def sorted_positive(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("levels and dimensions are 1-based positive integers")
        return sorted(set(value))

    @field_validator('orders')
    @classmethod
    def positive_orders(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and any(k < 1 for k in value):
            raise ValueError("orders must be positive")
        return value

    @classmethod
    def load(cls, text: str) -> 'RunConfig':
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    def param_schedule(self) -> ParamSchedule:
        if isinstance(self.schedule, str):
            return ParamSchedule.from_preset(self.schedule)
        return ParamSchedule.from_dict(self.schedule.model_dump())

    def masks_within(self, count: int):
        outside = [n for n in self.mask_m + self.mask_n if n > count]
        if outside:
            raise ConfigError(f"mask levels {outside} exceed the {count} schedule levels")
