import math
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.optics_models import NORM_TOLERANCE, PolarizationState


class Basis(str, Enum):
    Z = "Z"
    X = "X"
    Y = "Y"

    @property
    def equatorial(self) -> bool:
        return self != Basis.Z


class BasisSetting(BaseModel):
    model_config = ConfigDict(frozen=True)

    basis: Basis
    bit: int = Field(ge=0, le=1)

    def __str__(self) -> str:
        return f"{self.basis.value}{self.bit}"

    @classmethod
    def parse(cls, text: str) -> "BasisSetting":
        """"X1" -> BasisSetting(basis=X, bit=1)."""
        if len(text) != 2:
            raise ValueError(f"basis setting must look like X0, got {text!r}")
        return cls(basis=text[0], bit=int(text[1]))


class PhotonNumberMixture(BaseModel):
    """Diagonal photon-number distribution of one arm; the tail beyond truncation is kept as truncated_mass."""

    model_config = ConfigDict(frozen=True)

    weights: dict[int, float]
    mean: float = Field(ge=0)
    truncated_mass: float = 0.0

    @model_validator(mode="after")
    def _check_mass(self) -> "PhotonNumberMixture":
        if any(n < 0 for n in self.weights):
            raise ValueError("photon numbers must be non-negative")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("mixture weights must be non-negative")
        if self.truncated_mass < -NORM_TOLERANCE:
            raise ValueError(f"negative truncated mass {self.truncated_mass}")
        total = math.fsum(self.weights.values()) + self.truncated_mass
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"mixture mass {total} differs from 1")
        return self


class SourceKind(str, Enum):
    WCP = "wcp"
    SINGLE_PHOTON = "single_photon"
    BLOCKED = "blocked"


class ArmConfig(BaseModel):
    """
    One sender arm. The polarization defaults to the encoding of `setting`;
    a blocked arm carries no photons whatever its other fields say.
    """

    model_config = ConfigDict(frozen=True)

    source_kind: SourceKind = SourceKind.WCP
    mean_photon: float = Field(0.25, ge=0)
    setting: BasisSetting = BasisSetting(basis=Basis.Z, bit=0)
    polarization: PolarizationState
    misalignment_angle: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _encode_setting(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("polarization") is None:
            from app.source_service import encode

            setting = data.get("setting") or cls.model_fields["setting"].default
            if isinstance(setting, dict):
                setting = BasisSetting(**setting)
            data = {**data, "polarization": encode(setting)}
        return data

    def with_setting(self, setting: BasisSetting) -> "ArmConfig":
        from app.source_service import encode

        return self.model_copy(update={"setting": setting, "polarization": encode(setting)})

    def blocked(self) -> "ArmConfig":
        return self.model_copy(update={"source_kind": SourceKind.BLOCKED})
