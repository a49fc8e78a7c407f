from enum import Enum

from pydantic import BaseModel, ConfigDict

__all__ = ['CertMode', 'RipCertificate', 'NormRecord', 'LevelCheck']

# Slack for floating eigenvalues sitting exactly on 1/2 or 2.
BOUND_TOLERANCE = 1e-9


class CertMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    SAMPLED = "sampled"


class RipCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: int
    order: int
    lambda_min: float
    lambda_max: float
    mode: CertMode
    samples: int
    elapsed_ms: float = 0.0
    besselian_only: bool = False

    @property
    def id(self) -> str:
        kind = "besselian" if self.besselian_only else "almost-on"
        return f"{kind}:level={self.level}:order={self.order}"

    @property
    def is_exhaustive(self) -> bool:
        return self.mode is CertMode.EXHAUSTIVE

    @property
    def besselian_holds(self) -> bool:
        return self.lambda_max <= 2.0 + BOUND_TOLERANCE

    @property
    def almost_on_holds(self) -> bool:
        return self.lambda_min >= 0.5 - BOUND_TOLERANCE and self.besselian_holds

    @property
    def holds(self) -> bool:
        return self.besselian_holds if self.besselian_only else self.almost_on_holds

    @property
    def certifies(self) -> bool:
        """Whether this certificate may back an unconditional claim."""
        return self.is_exhaustive and self.holds


class NormRecord(BaseModel):
    lower: float
    upper: float
    mode: str


class LevelCheck(BaseModel):
    level: int
    u: int
    v: int
    s: int
    s_exact: bool
    growth_holds: bool
    growth_required_log10: float
    width_holds: bool
    width_required: int
    ordered: bool
