"""Perceived-risk scoring and the evacuate/stay rule.

Three coded factor groups drive the decision: attributes of the household
head (CDM), hazard drivers (HRF), and the household's coping capacity
(CRF). Perceived risk is their weighted sum plus a small bounded-
rationality noise term; a household evacuates when that sum strictly
exceeds a threshold fraction of the highest score the weights allow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InputError
from .geo import ProximityClass
from .population import HouseholdProfile

__all__ = [
    "STORM_CODES",
    "RAINFALL_CODES",
    "TIME_OF_DAY_CODES",
    "SOURCE_CODES",
    "Scenario",
    "Weights",
    "RiskContext",
    "RiskBreakdown",
    "Decision",
    "WarningSource",
    "CDM_MAX",
    "HRF_MAX",
    "CRF_MAX",
    "cdm_score",
    "hrf_score",
    "crf_score",
    "highest_possible_score",
    "perceived_risk",
    "decide",
]

STORM_CODES = {1: 0.25, 2: 0.5, 3: 1.0}  # PSWS level -> code
RAINFALL_CODES = {"yellow": 0.25, "orange": 0.5, "red": 1.0}
TIME_OF_DAY_CODES = {"daytime": 0.5, "nighttime": 1.0}
SOURCE_CODES = {"friends": 0.25, "media": 0.5, "authorities": 1.0}

CDM_MAX = 8.0  # eight decision-maker attributes, each coded at most 1.0
HRF_MAX = 5.0  # five hazard factors
CRF_MAX = 3.0  # three capacity factors

EPSILON_MAX = 0.05


class WarningSource(enum.Enum):
    FRIENDS = 0.25
    MEDIA = 0.5
    AUTHORITIES = 1.0

    @property
    def code(self) -> float:
        return self.value


class Decision(enum.Enum):
    EVACUATE = "evacuate"
    STAY = "stay"


@dataclass(frozen=True)
class Scenario:
    """Exogenous drivers, stored as their numeric codes."""

    storm_severity: float
    rainfall_severity: float
    time_of_day: float

    def __post_init__(self) -> None:
        if self.storm_severity not in STORM_CODES.values():
            raise InputError(
                f"storm severity code {self.storm_severity!r} is not one of "
                f"{sorted(STORM_CODES.values())} (PSWS 4-5 are not representable)"
            )
        if self.rainfall_severity not in RAINFALL_CODES.values():
            raise InputError(f"rainfall code {self.rainfall_severity!r} invalid")
        if self.time_of_day not in TIME_OF_DAY_CODES.values():
            raise InputError(f"time-of-day code {self.time_of_day!r} invalid")

    @property
    def storm_level(self) -> int:
        """The PSWS integer the storm code corresponds to."""
        for level, code in STORM_CODES.items():
            if code == self.storm_severity:
                return level
        raise InputError(f"no PSWS level for code {self.storm_severity}")

    @classmethod
    def from_names(cls, storm_level: int, rainfall: str, time_of_day: str) -> "Scenario":
        if storm_level not in STORM_CODES:
            raise InputError(f"PSWS level {storm_level} is outside the supported range {sorted(STORM_CODES)}")
        if rainfall not in RAINFALL_CODES:
            raise InputError(f"rainfall advisory {rainfall!r} must be one of {sorted(RAINFALL_CODES)}")
        if time_of_day not in TIME_OF_DAY_CODES:
            raise InputError(f"time of day {time_of_day!r} must be one of {sorted(TIME_OF_DAY_CODES)}")
        return cls(STORM_CODES[storm_level], RAINFALL_CODES[rainfall], TIME_OF_DAY_CODES[time_of_day])


@dataclass(frozen=True)
class Weights:
    w_cdm: float
    w_hrf: float
    w_crf: float

    def __post_init__(self) -> None:
        for name, w in (("w_cdm", self.w_cdm), ("w_hrf", self.w_hrf), ("w_crf", self.w_crf)):
            if not (0.0 < w <= 1.0) or not math.isfinite(w):
                raise InputError(f"{name} must be in (0, 1], got {w!r}")

    def sums_to_one(self) -> bool:
        return abs(self.w_cdm + self.w_hrf + self.w_crf - 1.0) <= 1e-9


@dataclass(frozen=True)
class RiskContext:
    """Per-household, per-run context: who warned them, how close the hazard
    is, and the bounded-rationality draw."""

    source_of_warning: WarningSource
    proximity: ProximityClass
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= EPSILON_MAX:
            raise InputError(f"epsilon {self.epsilon!r} outside [0, {EPSILON_MAX}]")


@dataclass(frozen=True)
class RiskBreakdown:
    cdm: float
    hrf: float
    crf: float
    perceived_risk: float
    highest_possible: float


def cdm_score(p: HouseholdProfile) -> float:
    """Sum of the eight decision-maker codes; computed once per run."""
    return (
        p.head_gender
        + p.income_level
        + p.educ_level
        + p.has_children
        + p.has_elderly
        + p.with_disability
        + p.house_ownership
        + p.years_of_residency
    )


def hrf_score(s: Scenario, ctx: RiskContext) -> float:
    """Sum of the five hazard codes."""
    return (
        s.storm_severity
        + s.rainfall_severity
        + ctx.proximity.code
        + ctx.source_of_warning.code
        + s.time_of_day
    )


def crf_score(p: HouseholdProfile) -> float:
    """Sum of the three capacity codes."""
    return p.house_quality + p.floor_levels + p.typhoon_experience


def highest_possible_score(w: Weights) -> float:
    return CDM_MAX * w.w_cdm + CRF_MAX * w.w_crf + HRF_MAX * w.w_hrf


def perceived_risk(
    p: HouseholdProfile, s: Scenario, ctx: RiskContext, w: Weights
) -> RiskBreakdown:
    cdm = cdm_score(p)
    hrf = hrf_score(s, ctx)
    crf = crf_score(p)
    value = cdm * w.w_cdm + hrf * w.w_hrf + crf * w.w_crf + ctx.epsilon
    return RiskBreakdown(
        cdm=cdm,
        hrf=hrf,
        crf=crf,
        perceived_risk=value,
        highest_possible=highest_possible_score(w),
    )


def decide(b: RiskBreakdown, threshold: float) -> Decision:
    """Evacuate only when perceived risk strictly exceeds threshold x highest
    possible score; ties mean Stay."""
    if not 0.0 <= threshold <= 1.0:
        raise InputError(f"threshold {threshold!r} outside [0, 1]")
    if b.perceived_risk > threshold * b.highest_possible:
        return Decision.EVACUATE
    return Decision.STAY
