import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, model_validator

from app.optics_models import BSM_PAIR_LABELS
from app.source_models import BasisSetting


class DeductionMethod(str, Enum):
    UNCALIBRATED = "uncalibrated"
    CALIBRATED = "calibrated"


class DeducedBsm(BaseModel):
    """
    Single-photon coincidence behaviour recovered from a both/a_only/b_only triple.

    `raw` covers all six detector pairs; the uncalibrated estimator carries a
    constant factor of 16 relative to P(D_ij | 1, 1). `normalized` restricts raw
    to the four heralding pairs and rescales them to unit sum.
    """

    model_config = ConfigDict(frozen=True)

    method: DeductionMethod
    setting_a: BasisSetting
    setting_b: BasisSetting
    beta: float = 0.0
    raw: dict[str, float]
    normalized: dict[str, float]
    clamped_pairs: list[str] = []

    @model_validator(mode="after")
    def _check_normalized(self) -> "DeducedBsm":
        if set(self.normalized) != set(BSM_PAIR_LABELS):
            raise ValueError(f"normalized values must cover {BSM_PAIR_LABELS}")
        total = math.fsum(self.normalized.values())
        if total and abs(total - 1.0) > 1e-9:
            raise ValueError(f"normalized values sum to {total}, expected 1")
        return self
