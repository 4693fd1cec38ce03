"""
Recover single-photon coincidence probabilities from weak-coherent-pulse count records.

The two-arm term of the coincidence rate is isolated by subtracting the records
taken with one arm blocked. The calibration-free estimator divides by the product
of summed singles so detector efficiencies cancel; the calibrated one divides by
kappa_i kappa_j mu^2 e^{-2 mu} and needs both known.
"""
import logging
import math
from typing import Sequence

from app.deduction_models import DeducedBsm, DeductionMethod
from app.errors import (
    ConfigurationMismatchError,
    DegenerateDeductionError,
    InvalidCalibrationError,
    UnsupportedBasisError,
)
from app.experiment_models import ConfigTag, CountRecord
from app.optics_models import ALL_PAIRS, BSM_PAIR_LABELS, DETECTORS, pair_label

logger = logging.getLogger(__name__)


def _require_same_setting(*records: CountRecord) -> None:
    first = records[0]
    for record in records[1:]:
        if (record.setting_a, record.setting_b) != (first.setting_a, first.setting_b):
            raise ConfigurationMismatchError(
                f"records mix settings {first.setting_a}{first.setting_b} "
                f"and {record.setting_a}{record.setting_b}"
            )
        if record.beta != first.beta:
            raise ConfigurationMismatchError(
                f"records mix frame rotations {first.beta} and {record.beta}"
            )


def _require_tags(both: CountRecord, a_only: CountRecord, b_only: CountRecord) -> None:
    for record, tag in ((both, ConfigTag.BOTH), (a_only, ConfigTag.A_ONLY), (b_only, ConfigTag.B_ONLY)):
        if record.config_tag != tag:
            raise ConfigurationMismatchError(
                f"expected a {tag.value} record, got {record.config_tag.value}"
            )


def singles_sum(a_only: CountRecord, b_only: CountRecord) -> dict[int, float]:
    """N(D_i) = N(D_i) with only arm a sending + N(D_i) with only arm b sending, per pulse."""
    _require_same_setting(a_only, b_only)
    rates_a = a_only.single_rates()
    rates_b = b_only.single_rates()
    return {d: rates_a[d] + rates_b[d] for d in DETECTORS}


def _two_arm_excess(
    both: CountRecord, a_only: CountRecord, b_only: CountRecord
) -> tuple[dict[str, float], list[str]]:
    rates_both = both.coincidence_rates()
    rates_a = a_only.coincidence_rates()
    rates_b = b_only.coincidence_rates()
    excess: dict[str, float] = {}
    clamped: list[str] = []
    for i, j in ALL_PAIRS:
        label = pair_label(i, j)
        value = rates_both[label] - rates_a[label] - rates_b[label]
        if value < 0:
            clamped.append(label)
            value = 0.0
        excess[label] = value
    if clamped:
        logger.debug(
            "%s%s: negative two-arm excess clamped to 0 on %s",
            both.setting_a, both.setting_b, ", ".join(clamped),
        )
    return excess, clamped


def _normalize(raw: dict[str, float]) -> dict[str, float]:
    total = math.fsum(raw[label] for label in BSM_PAIR_LABELS)
    if total <= 0:
        return {label: 0.0 for label in BSM_PAIR_LABELS}
    return {label: raw[label] / total for label in BSM_PAIR_LABELS}


def deduce_uncalibrated(both: CountRecord, a_only: CountRecord, b_only: CountRecord) -> DeducedBsm:
    """
    raw(ij) = [N_ij(both) - N_ij(a_only) - N_ij(b_only)] / [(1/4) N(D_i) N(D_j)].

    Only valid when both arms use an equatorial basis (X or Y), where a single
    photon reaches every detector with probability 1/4.
    """
    _require_tags(both, a_only, b_only)
    _require_same_setting(both, a_only, b_only)
    for setting in (both.setting_a, both.setting_b):
        if not setting.basis.equatorial:
            raise UnsupportedBasisError(
                f"calibration-free deduction needs X or Y bases, got {both.setting_a}{both.setting_b}; "
                "use the raw both-arm coincidences for Z-basis inputs"
            )

    singles = singles_sum(a_only, b_only)
    for d in DETECTORS:
        if singles[d] <= 0:
            raise DegenerateDeductionError(f"summed singles at D{d} are zero")

    excess, clamped = _two_arm_excess(both, a_only, b_only)
    raw = {
        pair_label(i, j): excess[pair_label(i, j)] / (0.25 * singles[i] * singles[j])
        for i, j in ALL_PAIRS
    }
    return DeducedBsm(
        method=DeductionMethod.UNCALIBRATED,
        setting_a=both.setting_a,
        setting_b=both.setting_b,
        beta=both.beta,
        raw=raw,
        normalized=_normalize(raw),
        clamped_pairs=clamped,
    )


def deduce_calibrated(
    both: CountRecord,
    a_only: CountRecord,
    b_only: CountRecord,
    kappa: Sequence[float],
    mu: float,
) -> DeducedBsm:
    """raw(ij) = [N_ij(both) - N_ij(a_only) - N_ij(b_only)] / (kappa_i kappa_j mu^2 e^{-2 mu}); any basis."""
    if len(kappa) != len(DETECTORS) or any(not k > 0 for k in kappa):
        raise InvalidCalibrationError(f"need four positive detector efficiencies, got {tuple(kappa)}")
    if not mu > 0:
        raise InvalidCalibrationError(f"mean photon number must be positive, got {mu}")
    _require_tags(both, a_only, b_only)
    _require_same_setting(both, a_only, b_only)

    excess, clamped = _two_arm_excess(both, a_only, b_only)
    two_photon_weight = mu**2 * math.exp(-2 * mu)
    raw = {
        pair_label(i, j): excess[pair_label(i, j)] / (kappa[i - 1] * kappa[j - 1] * two_photon_weight)
        for i, j in ALL_PAIRS
    }
    return DeducedBsm(
        method=DeductionMethod.CALIBRATED,
        setting_a=both.setting_a,
        setting_b=both.setting_b,
        beta=both.beta,
        raw=raw,
        normalized=_normalize(raw),
        clamped_pairs=clamped,
    )
