import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

NORM_TOLERANCE = 1e-12

DETECTORS: tuple[int, ...] = (1, 2, 3, 4)

# Unordered detector pairs, i < j.
ALL_PAIRS: tuple[tuple[int, int], ...] = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))

# Pairs that herald a Bell outcome: D12/D34 -> psi+, D14/D23 -> psi-.
BSM_PAIRS: tuple[tuple[int, int], ...] = ((1, 2), (3, 4), (1, 4), (2, 3))

# A click pattern is the set of detectors (1..4) that fired.
ClickPattern = frozenset[int]

Occupation = tuple[int, int, int, int]


def pair_label(i: int, j: int) -> str:
    """Label of the unordered pair {D_i, D_j}, e.g. pair_label(3, 1) == "D13"."""
    lo, hi = sorted((i, j))
    return f"D{lo}{hi}"


ALL_PAIR_LABELS: tuple[str, ...] = tuple(pair_label(i, j) for i, j in ALL_PAIRS)
BSM_PAIR_LABELS: tuple[str, ...] = tuple(pair_label(i, j) for i, j in BSM_PAIRS)


class CoincidenceRule(str, Enum):
    INCLUSIVE = "inclusive"
    EXCLUSIVE = "exclusive"


class PolarizationState(BaseModel):
    """Jones vector (amp_h, amp_v) of a pure polarization state."""

    model_config = ConfigDict(frozen=True)

    amp_h: complex
    amp_v: complex

    @property
    def norm_error(self) -> float:
        return abs(abs(self.amp_h) ** 2 + abs(self.amp_v) ** 2 - 1.0)

    @model_validator(mode="after")
    def _check_normalized(self) -> "PolarizationState":
        if self.norm_error > NORM_TOLERANCE:
            raise ValueError(
                f"polarization state is not normalized (|h|^2+|v|^2 off by {self.norm_error:.3e})"
            )
        return self


class TransferVectors(BaseModel):
    """Amplitudes routing arm a (u) and arm b (v) onto detector modes D1..D4."""

    model_config = ConfigDict(frozen=True)

    u: tuple[complex, complex, complex, complex]
    v: tuple[complex, complex, complex, complex]

    @model_validator(mode="after")
    def _check_unitary_rows(self) -> "TransferVectors":
        norm_u = sum(abs(x) ** 2 for x in self.u)
        norm_v = sum(abs(x) ** 2 for x in self.v)
        overlap = sum(a * b.conjugate() for a, b in zip(self.u, self.v))
        if abs(norm_u - 1) > NORM_TOLERANCE or abs(norm_v - 1) > NORM_TOLERANCE:
            raise ValueError("transfer rows must have unit norm")
        if abs(overlap) > NORM_TOLERANCE:
            raise ValueError("transfer rows must be orthogonal")
        return self


class OccupationDistribution(BaseModel):
    """Probability of each photon-number tuple (n1, n2, n3, n4) at the detectors."""

    model_config = ConfigDict(frozen=True)

    entries: dict[Occupation, float]

    @property
    def total(self) -> float:
        return math.fsum(self.entries.values())

    @model_validator(mode="after")
    def _check_probabilities(self) -> "OccupationDistribution":
        for occupation, p in self.entries.items():
            if len(occupation) != 4 or any(n < 0 for n in occupation):
                raise ValueError(f"invalid occupation tuple {occupation}")
            if not -NORM_TOLERANCE <= p <= 1 + NORM_TOLERANCE:
                raise ValueError(f"probability {p} out of range for {occupation}")
        if self.total > 1 + NORM_TOLERANCE:
            raise ValueError(f"distribution mass {self.total} exceeds 1")
        return self


class DetectorModel(BaseModel):
    """Threshold detectors D1..D4 and the coincidence-counting convention."""

    model_config = ConfigDict(frozen=True)

    kappa: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    truncation_total_photons: int = Field(4, ge=2)
    coincidence_rule: CoincidenceRule = CoincidenceRule.INCLUSIVE

    @model_validator(mode="after")
    def _check_efficiencies(self) -> "DetectorModel":
        if any(not 0.0 <= k <= 1.0 for k in self.kappa):
            raise ValueError(f"detector efficiencies must lie in [0, 1], got {self.kappa}")
        return self

    def with_unit_efficiency(self) -> "DetectorModel":
        return self.model_copy(update={"kappa": (1.0, 1.0, 1.0, 1.0)})
