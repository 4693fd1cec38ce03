from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.optics_models import BSM_PAIR_LABELS
from app.source_models import Basis

BASIS_PAIRS: tuple[str, ...] = ("ZZ", "XX", "YY", "XY", "YX")
EQUATORIAL_PAIRS: tuple[str, ...] = ("XX", "YY", "XY", "YX")


class BellOutcome(str, Enum):
    PSI_PLUS = "psi_plus"
    PSI_MINUS = "psi_minus"


# Heralding detector pairs of each outcome; phi+/- leave no coincidence signature.
PAIR_MAP: dict[BellOutcome, tuple[str, str]] = {
    BellOutcome.PSI_PLUS: ("D12", "D34"),
    BellOutcome.PSI_MINUS: ("D14", "D23"),
}


class Relation(str, Enum):
    EQUAL = "equal"
    DIFFERENT = "different"


class Provenance(str, Enum):
    WCP_RAW = "wcp_raw"
    DEDUCED = "deduced"
    SINGLE_PHOTON = "single_photon"


class CorrelationTable(BaseModel):
    """Bit relation announced by each Bell outcome, per basis pair ("XX", "XY", ...)."""

    model_config = ConfigDict(frozen=True)

    relations: dict[str, dict[BellOutcome, Relation]]

    @model_validator(mode="after")
    def _check_complete(self) -> "CorrelationTable":
        for basis_pair in BASIS_PAIRS:
            outcomes = self.relations.get(basis_pair)
            if outcomes is None or set(outcomes) != set(BellOutcome):
                raise ValueError(f"correlation table lacks outcomes for {basis_pair}")
        return self

    def expected(self, basis_pair: str, outcome: BellOutcome) -> Relation:
        return self.relations[basis_pair][outcome]


DEFAULT_TABLE = CorrelationTable(
    relations={
        "ZZ": {BellOutcome.PSI_PLUS: Relation.DIFFERENT, BellOutcome.PSI_MINUS: Relation.DIFFERENT},
        "XX": {BellOutcome.PSI_PLUS: Relation.EQUAL, BellOutcome.PSI_MINUS: Relation.DIFFERENT},
        "YY": {BellOutcome.PSI_PLUS: Relation.EQUAL, BellOutcome.PSI_MINUS: Relation.DIFFERENT},
        "XY": {BellOutcome.PSI_PLUS: Relation.EQUAL, BellOutcome.PSI_MINUS: Relation.DIFFERENT},
        "YX": {BellOutcome.PSI_PLUS: Relation.EQUAL, BellOutcome.PSI_MINUS: Relation.DIFFERENT},
    }
)


class BellProjection(BaseModel):
    model_config = ConfigDict(frozen=True)

    psi_plus: float
    psi_minus: float
    phi_plus: float
    phi_minus: float


class BsmObservation(BaseModel):
    """Heralding-pair coincidences of one basis/bit choice (rates, counts or deduced values)."""

    model_config = ConfigDict(frozen=True)

    basis_a: Basis
    basis_b: Basis
    bit_a: int = Field(ge=0, le=1)
    bit_b: int = Field(ge=0, le=1)
    coincidences: dict[str, float]

    @model_validator(mode="after")
    def _check_pairs(self) -> "BsmObservation":
        missing = set(BSM_PAIR_LABELS) - set(self.coincidences)
        if missing:
            raise ValueError(f"observation lacks heralding pairs {sorted(missing)}")
        return self

    @property
    def basis_pair(self) -> str:
        return f"{self.basis_a.value}{self.basis_b.value}"

    @property
    def relation(self) -> Relation:
        return Relation.EQUAL if self.bit_a == self.bit_b else Relation.DIFFERENT

    def outcome_mass(self, outcome: BellOutcome) -> float:
        return sum(self.coincidences[label] for label in PAIR_MAP[outcome])


class QberSet(BaseModel):
    provenance: Provenance
    q_zz: Optional[float] = Field(None, ge=0, le=1)
    q_xx: Optional[float] = Field(None, ge=0, le=1)
    q_yy: Optional[float] = Field(None, ge=0, le=1)
    q_xy: Optional[float] = Field(None, ge=0, le=1)
    q_yx: Optional[float] = Field(None, ge=0, le=1)

    def get(self, basis_pair: str) -> Optional[float]:
        return getattr(self, f"q_{basis_pair.lower()}")


class DeducedStatus(str, Enum):
    DEDUCED = "deduced"
    # Z inputs: calibration-free deduction does not apply, raw both-arm coincidences are used
    RAW_Z = "raw_z"


class DeducedRow(BaseModel):
    setting_a: str
    setting_b: str
    beta: float
    mu_a: float
    mu_b: float
    status: DeducedStatus
    method: Optional[str] = None
    raw: dict[str, float]
    normalized: dict[str, float]
    clamped_pairs: list[str] = []


class ReportRow(BaseModel):
    provenance: Provenance
    beta: float
    qbers: QberSet
    c: Optional[float] = None
    errors: dict[str, Optional[float]] = {}


class Report(BaseModel):
    rows: list[ReportRow]
    bootstrap_trials: int = 0
    seed: Optional[int] = None


class SweepRow(BaseModel):
    axis_value: float
    values: dict[str, Optional[float]]


class SweepResult(BaseModel):
    scenario: str
    axis: str
    columns: list[str]
    rows: list[SweepRow]
    # visibility of Q_XX(axis) per provenance; beta sweeps only
    visibility: dict[str, Optional[float]] = {}
