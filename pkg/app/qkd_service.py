"""QBER, C parameter, visibility and bootstrap error bars for Bell-state-measurement data."""
import itertools
import logging
import math
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from app.errors import (
    ConfigurationMismatchError,
    CorrelationTableError,
    InsufficientDataError,
    InvalidParameterError,
    MissingObservableError,
    RequiresSampledCountsError,
    UndefinedQberError,
)
from app.experiment_models import CountRecord, RunMode
from app.optics_models import BSM_PAIRS, DetectorModel, PolarizationState, pair_label
from app.optics_service import conditional_coincidence
from app.qkd_models import (
    BASIS_PAIRS,
    DEFAULT_TABLE,
    EQUATORIAL_PAIRS,
    BellOutcome,
    BellProjection,
    BsmObservation,
    CorrelationTable,
    QberSet,
)
from app.source_models import Basis, BasisSetting
from app.source_service import encode

logger = logging.getLogger(__name__)

_INV_SQRT2 = 1 / math.sqrt(2)

Observables = dict[str, Optional[float]]


def bell_projection_probs(pol_a: PolarizationState, pol_b: PolarizationState) -> BellProjection:
    """|<Bell|a, b>|^2 for psi+/- = (HV +/- VH)/sqrt2 and phi+/- = (HH +/- VV)/sqrt2."""
    hh = pol_a.amp_h * pol_b.amp_h
    hv = pol_a.amp_h * pol_b.amp_v
    vh = pol_a.amp_v * pol_b.amp_h
    vv = pol_a.amp_v * pol_b.amp_v
    return BellProjection(
        psi_plus=abs((hv + vh) * _INV_SQRT2) ** 2,
        psi_minus=abs((hv - vh) * _INV_SQRT2) ** 2,
        phi_plus=abs((hh + vv) * _INV_SQRT2) ** 2,
        phi_minus=abs((hh - vv) * _INV_SQRT2) ** 2,
    )


def single_photon_observation(setting_a: BasisSetting, setting_b: BasisSetting) -> BsmObservation:
    """Heralding-pair probabilities for the ideal |1, 1> input of the given encodings."""
    pol_a, pol_b = encode(setting_a), encode(setting_b)
    det = DetectorModel()
    return BsmObservation(
        basis_a=setting_a.basis,
        basis_b=setting_b.basis,
        bit_a=setting_a.bit,
        bit_b=setting_b.bit,
        coincidences={
            pair_label(i, j): conditional_coincidence(1, pol_a, 1, pol_b, det, i, j)
            for i, j in BSM_PAIRS
        },
    )


def qber(observations: Sequence[BsmObservation], table: CorrelationTable = DEFAULT_TABLE) -> float:
    """
    Error mass over total heralded mass, pooled over the observations' bit choices.

    An outcome is an error when the bit relation it announces for the basis pair
    differs from the relation of the bits actually sent.
    """
    if not observations:
        raise InsufficientDataError("no observations to estimate a QBER from")
    basis_pair = observations[0].basis_pair
    wrong = []
    total = []
    for obs in observations:
        if obs.basis_pair != basis_pair:
            raise ConfigurationMismatchError(f"cannot pool {basis_pair} with {obs.basis_pair}")
        for outcome in BellOutcome:
            mass = obs.outcome_mass(outcome)
            total.append(mass)
            if table.expected(basis_pair, outcome) != obs.relation:
                wrong.append(mass)
    heralded = math.fsum(total)
    if heralded <= 0:
        raise UndefinedQberError(f"no heralded events in the {basis_pair} basis")
    return min(1.0, max(0.0, math.fsum(wrong) / heralded))


def verify_correlation_table(table: CorrelationTable = DEFAULT_TABLE) -> None:
    """
    Check the table against the optics: ideal single photons must give QBER 0 for
    ZZ, XX, YY and 1/2 for XY, YX, and the heralding pairs must reproduce the
    psi+/- projections.
    """
    for basis_pair in BASIS_PAIRS:
        basis_a, basis_b = Basis(basis_pair[0]), Basis(basis_pair[1])
        observations = []
        for bit_a, bit_b in itertools.product((0, 1), repeat=2):
            setting_a = BasisSetting(basis=basis_a, bit=bit_a)
            setting_b = BasisSetting(basis=basis_b, bit=bit_b)
            obs = single_photon_observation(setting_a, setting_b)
            projection = bell_projection_probs(encode(setting_a), encode(setting_b))
            if (
                abs(obs.outcome_mass(BellOutcome.PSI_PLUS) - projection.psi_plus) > 1e-12
                or abs(obs.outcome_mass(BellOutcome.PSI_MINUS) - projection.psi_minus) > 1e-12
            ):
                raise CorrelationTableError(
                    f"heralding pairs disagree with the Bell projection for {setting_a}{setting_b}"
                )
            observations.append(obs)
        expected = 0.5 if basis_pair in ("XY", "YX") else 0.0
        measured = qber(observations, table)
        if abs(measured - expected) > 1e-12:
            raise CorrelationTableError(
                f"{basis_pair}: ideal single-photon QBER {measured} instead of {expected}"
            )
    logger.info("correlation table verified against the optics model")


def c_parameter(q: QberSet) -> float:
    """C = sum over XX, YY, XY, YX of (1 - 2Q)^2."""
    values = []
    for basis_pair in EQUATORIAL_PAIRS:
        value = q.get(basis_pair)
        if value is None:
            raise MissingObservableError(f"C needs Q_{basis_pair}, which is missing")
        values.append((1 - 2 * value) ** 2)
    return math.fsum(values)


def visibility(qber_curve: Sequence[tuple[float, float]]) -> float:
    """(max - min) / (max + min) of a QBER curve."""
    if len(qber_curve) < 3:
        raise InsufficientDataError(f"visibility needs at least 3 points, got {len(qber_curve)}")
    values = [q for _, q in qber_curve]
    high, low = max(values), min(values)
    if high + low == 0:
        return 0.0
    return (high - low) / (high + low)


def bootstrap_errors(
    records: Sequence[CountRecord],
    pipeline: Callable[[list[CountRecord]], Mapping[str, Optional[float]]],
    trials: int = 1000,
    seed: int = 0,
) -> Observables:
    """
    Standard deviation of every pipeline observable over Poisson resamplings of the counts.

    Each trial redraws every counter from Poisson(observed count) with its own
    stream spawned from `seed`. Observables the pipeline leaves undefined (None)
    in a trial are skipped; fewer than two defined trials give None.
    """
    if trials < 2:
        raise InvalidParameterError(f"bootstrap needs at least 2 trials, got {trials}")
    for record in records:
        if record.mode != RunMode.SAMPLED:
            raise RequiresSampledCountsError(
                f"bootstrap resamples integer counts; {record.config_tag.value} "
                f"{record.setting_a}{record.setting_b} holds exact rates"
            )

    samples: dict[str, list[float]] = {}
    streams = np.random.SeedSequence(seed).spawn(trials)
    for stream in streams:
        rng = np.random.default_rng(stream)
        resampled = []
        for record in records:
            labels = list(record.coincidences)
            detectors = list(record.singles)
            coincidences = rng.poisson([record.coincidences[label] for label in labels])
            singles = rng.poisson([record.singles[d] for d in detectors])
            resampled.append(
                record.with_counts(
                    {label: float(c) for label, c in zip(labels, coincidences)},
                    {d: float(c) for d, c in zip(detectors, singles)},
                )
            )
        for name, value in pipeline(resampled).items():
            samples.setdefault(name, []).append(np.nan if value is None else value)

    errors: Observables = {}
    for name, values in samples.items():
        finite = np.asarray(values, dtype=float)
        finite = finite[np.isfinite(finite)]
        errors[name] = float(np.std(finite, ddof=1)) if finite.size >= 2 else None
    logger.info("bootstrap: %d trials over %d records", trials, len(records))
    return errors
