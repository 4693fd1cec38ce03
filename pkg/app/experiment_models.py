from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.optics_models import ALL_PAIR_LABELS, DETECTORS, DetectorModel
from app.source_models import ArmConfig, BasisSetting, SourceKind


class RunMode(str, Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


class ConfigTag(str, Enum):
    BOTH = "both"
    A_ONLY = "a_only"
    B_ONLY = "b_only"


class ExperimentConfig(BaseModel):
    """Alice (arm a) and Bob (arm b) sending into Charlie's analyzer."""

    model_config = ConfigDict(frozen=True)

    arm_a: ArmConfig = ArmConfig()
    arm_b: ArmConfig = ArmConfig()
    loss_db_a: float = Field(15.0, ge=0)
    loss_db_b: float = Field(15.0, ge=0)
    beta: float = 0.0
    detector: DetectorModel = DetectorModel()
    mode: RunMode = RunMode.EXACT
    pulses: int = Field(100_000_000, ge=1)
    seed: Optional[int] = None
    # Which arms send; None means "derive from the arms' source kinds".
    config_tag: Optional[ConfigTag] = None

    @property
    def effective_tag(self) -> ConfigTag:
        if self.config_tag is not None:
            return self.config_tag
        a_blocked = self.arm_a.source_kind == SourceKind.BLOCKED
        b_blocked = self.arm_b.source_kind == SourceKind.BLOCKED
        if b_blocked and not a_blocked:
            return ConfigTag.A_ONLY
        if a_blocked and not b_blocked:
            return ConfigTag.B_ONLY
        return ConfigTag.BOTH


class ProtocolSetting(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting_a: BasisSetting
    setting_b: BasisSetting

    @property
    def basis_pair(self) -> str:
        return f"{self.setting_a.basis.value}{self.setting_b.basis.value}"

    def __str__(self) -> str:
        return f"{self.setting_a}{self.setting_b}"

    @classmethod
    def parse(cls, text: str) -> "ProtocolSetting":
        """"X0Y1" -> both arms' settings."""
        if len(text) != 4:
            raise ValueError(f"protocol setting must look like X0Y1, got {text!r}")
        return cls(setting_a=BasisSetting.parse(text[:2]), setting_b=BasisSetting.parse(text[2:]))


# (source_a, source_b, setting_a, setting_b, beta, mu_a_source, mu_b_source)
TripleKey = tuple[str, str, str, str, float, float, float]


class CountRecord(BaseModel):
    """
    Coincidence and singles statistics of one configuration.

    Exact mode holds expected events per pulse; sampled mode holds integer counts
    over `pulses` pulses. `source_a`/`source_b` are the arms' configured source
    kinds; `config_tag` says which of them actually sent (mu of a silent arm is 0).
    """

    model_config = ConfigDict(frozen=True)

    config_tag: ConfigTag
    mode: RunMode
    setting_a: BasisSetting
    setting_b: BasisSetting
    beta: float = 0.0
    source_a: SourceKind
    source_b: SourceKind
    mu_a: float = Field(ge=0)
    mu_b: float = Field(ge=0)
    mu_a_source: float = Field(ge=0)
    mu_b_source: float = Field(ge=0)
    pulses: int = Field(ge=1)
    coincidences: dict[str, float]
    singles: dict[int, float]
    truncated_mass: float = 0.0

    @model_validator(mode="after")
    def _check_counts(self) -> "CountRecord":
        if set(self.coincidences) != set(ALL_PAIR_LABELS):
            raise ValueError(
                f"coincidences must cover exactly {ALL_PAIR_LABELS}, got {sorted(self.coincidences)}"
            )
        if set(self.singles) != set(DETECTORS):
            raise ValueError(f"singles must cover detectors {DETECTORS}, got {sorted(self.singles)}")
        for value in (*self.coincidences.values(), *self.singles.values()):
            if value < 0:
                raise ValueError(f"negative rate or count {value}")
            if self.mode == RunMode.EXACT and value > 1:
                raise ValueError(f"rate per pulse {value} exceeds 1")
            if self.mode == RunMode.SAMPLED and value != int(value):
                raise ValueError(f"sampled count {value} is not an integer")
        return self

    @property
    def protocol_setting(self) -> ProtocolSetting:
        return ProtocolSetting(setting_a=self.setting_a, setting_b=self.setting_b)

    @property
    def triple_key(self) -> TripleKey:
        """Records sharing this key form one both/a_only/b_only measurement."""
        return (
            self.source_a.value,
            self.source_b.value,
            str(self.setting_a),
            str(self.setting_b),
            self.beta,
            self.mu_a_source,
            self.mu_b_source,
        )

    def coincidence_rates(self) -> dict[str, float]:
        if self.mode == RunMode.EXACT:
            return dict(self.coincidences)
        return {label: count / self.pulses for label, count in self.coincidences.items()}

    def single_rates(self) -> dict[int, float]:
        if self.mode == RunMode.EXACT:
            return dict(self.singles)
        return {d: count / self.pulses for d, count in self.singles.items()}

    def with_counts(self, coincidences: dict[str, float], singles: dict[int, float]) -> "CountRecord":
        return self.model_copy(update={"coincidences": coincidences, "singles": singles})
