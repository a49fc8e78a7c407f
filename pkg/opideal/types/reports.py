from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from .certificates import LevelCheck, NormRecord, RipCertificate

__all__ = [
    'VerdictStatus', 'Verdict', 'FactorizationRecord', 'IdentityRecord', 'EmbeddingRecord',
    'PigeonholeRecord', 'SeparationReport', 'RemarkReport', 'FssPoint', 'FssProfile',
    'CorollaryRecord', 'ScheduleReport', 'ExperimentReport',
]


class VerdictStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    CONDITIONAL = "conditional"
    INFORMATIONAL = "informational"


class Verdict(BaseModel):
    name: str
    status: VerdictStatus
    relies_on: List[str] = Field(default_factory=list)
    detail: str = ""

    @property
    def binding(self) -> bool:
        return self.status in (VerdictStatus.PASSED, VerdictStatus.FAILED)


class ScheduleReport(BaseModel):
    p: str
    levels: List[LevelCheck]


class FactorizationRecord(BaseModel):
    m: int
    index_sets: Dict[int, List[int]]
    residual_norm: float
    p_norm: NormRecord
    r_norm: NormRecord
    budget_s_m: int
    p_reduced: bool = False


class IdentityRecord(BaseModel):
    m: int
    level: int
    m_cols: int
    subset: List[int]
    reconstruction_error: float
    gram_energy: float
    energy_limit: float
    tries: int
    a_norm: float
    b_norm: float


class EmbeddingRecord(BaseModel):
    rows: int
    a_norm: float
    t_norm: float
    max_error: float


class PigeonholeRecord(BaseModel):
    m: int
    h_indices: List[int]
    h_size: int
    target: float
    holds: bool
    cluster_size: int
    cluster_gram_sq: float
    cluster_gram_limit: float
    cluster_sum_norm: float
    cluster_sum_target: float
    net_log10: float


class SeparationReport(BaseModel):
    m: int
    mask_m: List[int]
    mask_n: List[int]
    n0: Optional[int]
    samples: int
    phi_t_m: float
    identity_composite: float
    max_random: float
    max_adversarial: float
    bound_6_over_m: float
    bound_status: VerdictStatus
    vacuous: bool
    within_unit_norm: bool
    within_bound: bool
    margin: Optional[float] = None
    within_margin: Optional[bool] = None
    hypothesis_certificates: List[RipCertificate] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class RemarkReport(BaseModel):
    m: int
    p: str
    psi_inclusion: float
    per_level: Dict[int, float]
    non_increasing: bool
    samples: int
    note: str = ""


class FssPoint(BaseModel):
    d: int
    estimate: float
    envelope: float
    best_subspace: float
    trials: int
    method: str


class FssProfile(BaseModel):
    points: List[FssPoint]

    @property
    def dims(self) -> List[int]:
        return [point.d for point in self.points]

    @property
    def estimates(self) -> List[float]:
        return [point.envelope for point in self.points]


class CorollaryRecord(BaseModel):
    m: int
    q: float
    witness_norm: float
    image_norm: float
    bound: float
    bound_holds: bool
    via_kernel: bool
    certified: bool
    tied: int


class ExperimentReport(BaseModel):
    command: str
    config: Dict[str, Any]
    tool_version: str
    certificates: List[RipCertificate] = Field(default_factory=list)
    results: Dict[str, Any] = Field(default_factory=dict)
    verdicts: List[Verdict] = Field(default_factory=list)
    wall_clock_ms: float = 0.0

    @property
    def exit_code(self) -> int:
        failed = any(v.status is VerdictStatus.FAILED for v in self.verdicts)
        return 1 if failed else 0
