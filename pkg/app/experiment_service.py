"""Compose sources and the analyzer into count records: both arms sending, or one arm blocked."""
import logging
import math
from functools import lru_cache

import numpy as np

from app.errors import InvalidConfigError
from app.experiment_models import (
    ConfigTag,
    CountRecord,
    ExperimentConfig,
    ProtocolSetting,
    RunMode,
)
from app.optics_models import (
    ALL_PAIRS,
    DETECTORS,
    ClickPattern,
    DetectorModel,
    PolarizationState,
    pair_label,
)
from app.optics_service import (
    click_pattern_probs,
    coincidence_prob,
    output_distribution,
    single_click_prob,
)
from app.source_models import SourceKind
from app.source_service import arm_photon_mixture, arm_polarization

logger = logging.getLogger(__name__)

MAX_PULSES = 10**15

_EMPTY_ARM = PolarizationState(amp_h=1 + 0j, amp_v=0j)


@lru_cache(maxsize=4096)
def sector_click_patterns(
    m: int,
    pol_a: PolarizationState,
    n: int,
    pol_b: PolarizationState,
    det: DetectorModel,
) -> dict[ClickPattern, float]:
    """Click-pattern distribution of the (m, n) photon-number sector. Treat as read-only."""
    return click_pattern_probs(output_distribution(m, pol_a, n, pol_b), det)


def _sending_arms(config: ExperimentConfig):
    tag = config.effective_tag
    arm_a, arm_b = config.arm_a, config.arm_b
    if tag == ConfigTag.A_ONLY:
        arm_b = arm_b.blocked()
    elif tag == ConfigTag.B_ONLY:
        arm_a = arm_a.blocked()
    return tag, arm_a, arm_b


def _source_mu(kind: SourceKind, mean_photon: float) -> float:
    return 1.0 if kind == SourceKind.SINGLE_PHOTON else mean_photon


def _exact_record(config: ExperimentConfig) -> CountRecord:
    det = config.detector
    truncation = det.truncation_total_photons
    if truncation < 2:
        raise InvalidConfigError(f"truncation {truncation} cannot hold a two-photon sector")

    tag, arm_a, arm_b = _sending_arms(config)
    mix_a = arm_photon_mixture(arm_a, config.loss_db_a, truncation)
    mix_b = arm_photon_mixture(arm_b, config.loss_db_b, truncation)
    pol_a = arm_polarization(arm_a)
    pol_b = arm_polarization(arm_b, config.beta)

    coincidences = {pair_label(i, j): 0.0 for i, j in ALL_PAIRS}
    singles = {d: 0.0 for d in DETECTORS}
    kept = []
    for m, weight_a in mix_a.weights.items():
        for n, weight_b in mix_b.weights.items():
            if m + n > truncation:
                continue
            weight = weight_a * weight_b
            kept.append(weight)
            if weight == 0 or m + n == 0:
                continue
            # an empty arm contributes no polarization
            patterns = sector_click_patterns(
                m, pol_a if m else _EMPTY_ARM, n, pol_b if n else _EMPTY_ARM, det
            )
            for i, j in ALL_PAIRS:
                coincidences[pair_label(i, j)] += weight * coincidence_prob(
                    patterns, i, j, det.coincidence_rule
                )
            for d in DETECTORS:
                singles[d] += weight * single_click_prob(patterns, d)

    truncated = max(0.0, 1.0 - math.fsum(kept))
    logger.debug(
        "exact %s %s%s beta=%.4f: mu=(%.3e, %.3e), truncated mass %.3e",
        tag.value, config.arm_a.setting, config.arm_b.setting,
        config.beta, mix_a.mean, mix_b.mean, truncated,
    )
    return CountRecord(
        config_tag=tag,
        mode=RunMode.EXACT,
        setting_a=config.arm_a.setting,
        setting_b=config.arm_b.setting,
        beta=config.beta,
        source_a=config.arm_a.source_kind,
        source_b=config.arm_b.source_kind,
        mu_a=mix_a.mean,
        mu_b=mix_b.mean,
        mu_a_source=_source_mu(config.arm_a.source_kind, config.arm_a.mean_photon),
        mu_b_source=_source_mu(config.arm_b.source_kind, config.arm_b.mean_photon),
        pulses=config.pulses,
        coincidences={label: min(1.0, rate) for label, rate in coincidences.items()},
        singles={d: min(1.0, rate) for d, rate in singles.items()},
        truncated_mass=truncated,
    )


def run_exact(config: ExperimentConfig) -> CountRecord:
    """Expected coincidence and single rates per pulse pair."""
    if config.mode != RunMode.EXACT:
        raise InvalidConfigError(f"run_exact needs mode=exact, got {config.mode.value}")
    return _exact_record(config)


def run_sampled(config: ExperimentConfig) -> CountRecord:
    """Poisson-distributed counts around pulses x exact rate, reproducible for a fixed seed."""
    if config.mode != RunMode.SAMPLED:
        raise InvalidConfigError(f"run_sampled needs mode=sampled, got {config.mode.value}")
    if config.seed is None:
        raise InvalidConfigError("sampled mode requires a seed")
    if not 1 <= config.pulses <= MAX_PULSES:
        raise InvalidConfigError(f"pulses must lie in [1, {MAX_PULSES:.0e}], got {config.pulses}")

    expected = _exact_record(config)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    labels = list(expected.coincidences)
    coincidence_means = np.array([expected.coincidences[label] for label in labels]) * config.pulses
    single_means = np.array([expected.singles[d] for d in DETECTORS]) * config.pulses
    coincidence_counts = rng.poisson(coincidence_means)
    single_counts = rng.poisson(single_means)

    return expected.model_copy(
        update={
            "mode": RunMode.SAMPLED,
            "coincidences": {label: float(c) for label, c in zip(labels, coincidence_counts)},
            "singles": {d: float(c) for d, c in zip(DETECTORS, single_counts)},
        }
    )


def run(config: ExperimentConfig) -> CountRecord:
    if config.mode == RunMode.SAMPLED:
        return run_sampled(config)
    return run_exact(config)


def _child_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def run_protocol_set(base: ExperimentConfig, settings: list[ProtocolSetting]) -> list[CountRecord]:
    """
    For every basis/bit setting emit the three records both, a_only, b_only.

    The single-arm records keep the polarization settings and block the other arm.
    In sampled mode every record draws from its own stream spawned from base.seed.
    """
    if not settings:
        raise InvalidConfigError("protocol set needs at least one basis setting")
    if base.mode == RunMode.SAMPLED and base.seed is None:
        raise InvalidConfigError("sampled mode requires a seed")

    tags = (ConfigTag.BOTH, ConfigTag.A_ONLY, ConfigTag.B_ONLY)
    seeds = _child_seeds(base.seed, len(settings) * len(tags)) if base.mode == RunMode.SAMPLED else None

    records = []
    for index, setting in enumerate(settings):
        configured = base.model_copy(
            update={
                "arm_a": base.arm_a.with_setting(setting.setting_a),
                "arm_b": base.arm_b.with_setting(setting.setting_b),
            }
        )
        for offset, tag in enumerate(tags):
            update = {"config_tag": tag}
            if seeds is not None:
                update["seed"] = seeds[index * len(tags) + offset]
            records.append(run(configured.model_copy(update=update)))
    logger.info(
        "protocol set: %d settings, %d records (%s mode)", len(settings), len(records), base.mode.value
    )
    return records
