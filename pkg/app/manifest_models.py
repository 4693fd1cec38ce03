import itertools
import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.experiment_models import ExperimentConfig, ProtocolSetting
from app.qkd_models import BASIS_PAIRS
from app.source_models import Basis, BasisSetting, SourceKind


class SweepAxis(str, Enum):
    NONE = "none"
    BETA = "beta"
    MU = "mu"


class SweepRange(BaseModel):
    """Axis values from `start` towards `stop`, given either a `step` or a point count `num`."""

    start: float
    stop: float
    step: Optional[float] = Field(None, gt=0)
    num: Optional[int] = Field(None, ge=1)
    endpoint: bool = False

    @model_validator(mode="after")
    def _check_range(self) -> "SweepRange":
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("sweep bounds must be finite")
        if (self.step is None) == (self.num is None):
            raise ValueError("give exactly one of step or num")
        if self.step is not None and not math.isfinite(self.step):
            raise ValueError("sweep step must be finite")
        if len(self.values()) == 0:
            raise ValueError(f"sweep range [{self.start}, {self.stop}] is empty")
        return self

    def values(self) -> list[float]:
        if self.num is not None:
            return [float(v) for v in np.linspace(self.start, self.stop, self.num, endpoint=self.endpoint)]
        span = self.stop - self.start
        if span < 0:
            return []
        count = int(math.floor(span / self.step + 1e-9))
        points = [self.start + k * self.step for k in range(count + 1)]
        tolerance = 1e-12 * max(1.0, abs(self.stop))
        if not self.endpoint:
            points = [p for p in points if p < self.stop - tolerance]
        return points


def default_settings() -> list[ProtocolSetting]:
    """All five basis pairs with their four bit combinations."""
    settings = []
    for basis_pair in BASIS_PAIRS:
        for bit_a, bit_b in itertools.product((0, 1), repeat=2):
            settings.append(
                ProtocolSetting(
                    setting_a=BasisSetting(basis=Basis(basis_pair[0]), bit=bit_a),
                    setting_b=BasisSetting(basis=Basis(basis_pair[1]), bit=bit_b),
                )
            )
    return settings


class RunManifest(BaseModel):
    scenario: str = "default"
    experiment: ExperimentConfig = ExperimentConfig()
    settings: list[ProtocolSetting] = Field(default_factory=default_settings, min_length=1)
    # also run ideal single-photon pairs through the same channel
    include_single_photon: bool = False
    sweep_axis: SweepAxis = SweepAxis.NONE
    sweep: Optional[SweepRange] = None
    bootstrap_trials: int = Field(0, ge=0)
    bootstrap_seed: Optional[int] = None
    output_dir: str = "out"

    @model_validator(mode="after")
    def _check_sweep(self) -> "RunManifest":
        if self.sweep_axis != SweepAxis.NONE and self.sweep is None:
            raise ValueError(f"sweep_axis={self.sweep_axis.value} needs a sweep range")
        if self.bootstrap_trials == 1:
            raise ValueError("bootstrap_trials must be 0 (off) or at least 2")
        return self

    @property
    def resolved_bootstrap_seed(self) -> int:
        if self.bootstrap_seed is not None:
            return self.bootstrap_seed
        return self.experiment.seed if self.experiment.seed is not None else 0

    def single_photon_experiment(self) -> ExperimentConfig:
        arms = {
            "arm_a": self.experiment.arm_a.model_copy(update={"source_kind": SourceKind.SINGLE_PHOTON}),
            "arm_b": self.experiment.arm_b.model_copy(update={"source_kind": SourceKind.SINGLE_PHOTON}),
        }
        if self.experiment.seed is not None:
            # keep single-photon streams apart from the WCP ones
            arms["seed"] = self.experiment.seed + 1
        return self.experiment.model_copy(update=arms)
