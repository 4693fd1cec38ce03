"""
Turn count records into QBER tables, C parameters and sweep curves.

Three provenances are reported: raw WCP coincidences, single-photon values
deduced from WCP triples, and directly simulated single-photon pairs.
"""
import logging
from collections import defaultdict
from typing import Iterable, Optional, Sequence

from app.deduction_service import deduce_uncalibrated
from app.errors import BsaError, MissingInputError, RequiresSampledCountsError
from app.experiment_models import ConfigTag, CountRecord, RunMode, TripleKey
from app.experiment_service import run_protocol_set
from app.manifest_models import RunManifest, SweepAxis
from app.optics_models import ALL_PAIR_LABELS, BSM_PAIR_LABELS
from app.qkd_models import (
    BASIS_PAIRS,
    EQUATORIAL_PAIRS,
    BsmObservation,
    DeducedRow,
    DeducedStatus,
    Provenance,
    QberSet,
    Report,
    ReportRow,
    SweepResult,
    SweepRow,
)
from app.qkd_service import bootstrap_errors, c_parameter, qber, visibility
from app.source_models import BasisSetting, SourceKind

logger = logging.getLogger(__name__)

Observables = dict[str, Optional[float]]


def _observation(record: CountRecord, coincidences: dict[str, float]) -> BsmObservation:
    return BsmObservation(
        basis_a=record.setting_a.basis,
        basis_b=record.setting_b.basis,
        bit_a=record.setting_a.bit,
        bit_b=record.setting_b.bit,
        coincidences=coincidences,
    )


def group_triples(records: Iterable[CountRecord]) -> dict[TripleKey, dict[ConfigTag, CountRecord]]:
    triples: dict[TripleKey, dict[ConfigTag, CountRecord]] = defaultdict(dict)
    for record in records:
        triples[record.triple_key][record.config_tag] = record
    return dict(triples)


def _complete(key: TripleKey, members: dict[ConfigTag, CountRecord]) -> tuple[CountRecord, CountRecord, CountRecord]:
    missing = [tag.value for tag in ConfigTag if tag not in members]
    if missing:
        source_a, source_b, setting_a, setting_b, beta = key[:5]
        raise MissingInputError(
            f"{setting_a}{setting_b} ({source_a}/{source_b}, beta={beta}) lacks the "
            f"{', '.join(missing)} record(s)"
        )
    return members[ConfigTag.BOTH], members[ConfigTag.A_ONLY], members[ConfigTag.B_ONLY]


def _is_wcp(record: CountRecord) -> bool:
    return record.source_a == SourceKind.WCP and record.source_b == SourceKind.WCP


def _is_single_photon(record: CountRecord) -> bool:
    return record.source_a == SourceKind.SINGLE_PHOTON and record.source_b == SourceKind.SINGLE_PHOTON


def deduce_triple(both: CountRecord, a_only: CountRecord, b_only: CountRecord) -> DeducedRow:
    """Deduced single-photon row; Z inputs fall back to the raw both-arm coincidences."""
    if both.setting_a.basis.equatorial and both.setting_b.basis.equatorial:
        deduced = deduce_uncalibrated(both, a_only, b_only)
        return DeducedRow(
            setting_a=str(both.setting_a),
            setting_b=str(both.setting_b),
            beta=both.beta,
            mu_a=both.mu_a,
            mu_b=both.mu_b,
            status=DeducedStatus.DEDUCED,
            method=deduced.method.value,
            raw=deduced.raw,
            normalized=deduced.normalized,
            clamped_pairs=deduced.clamped_pairs,
        )
    rates = both.coincidence_rates()
    heralded = sum(rates[label] for label in BSM_PAIR_LABELS)
    normalized = {
        label: (rates[label] / heralded if heralded > 0 else 0.0)
        for label in BSM_PAIR_LABELS
    }
    return DeducedRow(
        setting_a=str(both.setting_a),
        setting_b=str(both.setting_b),
        beta=both.beta,
        mu_a=both.mu_a,
        mu_b=both.mu_b,
        status=DeducedStatus.RAW_Z,
        raw={label: rates[label] for label in ALL_PAIR_LABELS},
        normalized=normalized,
    )


def deduce_records(records: Sequence[CountRecord]) -> list[DeducedRow]:
    """One deduced row per WCP both/a_only/b_only triple, in first-seen order."""
    rows = []
    for key, members in group_triples(r for r in records if _is_wcp(r)).items():
        both, a_only, b_only = _complete(key, members)
        row = deduce_triple(both, a_only, b_only)
        if row.clamped_pairs:
            # exact rates clamp only on the negative three-photon excess
            level = logging.DEBUG if both.mode == RunMode.EXACT else logging.WARNING
            logger.log(
                level,
                "%s%s beta=%.4f: negative two-arm excess clamped on %s",
                row.setting_a, row.setting_b, row.beta, ", ".join(row.clamped_pairs),
            )
        rows.append(row)
    return rows


def raw_observations(records: Sequence[CountRecord]) -> dict[Provenance, list[BsmObservation]]:
    """Both-arm coincidences of WCP and single-photon records."""
    observations: dict[Provenance, list[BsmObservation]] = defaultdict(list)
    for record in records:
        if record.config_tag != ConfigTag.BOTH:
            continue
        if _is_wcp(record):
            observations[Provenance.WCP_RAW].append(_observation(record, record.coincidence_rates()))
        elif _is_single_photon(record):
            observations[Provenance.SINGLE_PHOTON].append(
                _observation(record, record.coincidence_rates())
            )
    return dict(observations)


def deduced_observations(records: Sequence[CountRecord]) -> list[BsmObservation]:
    observations = []
    for key, members in group_triples(r for r in records if _is_wcp(r)).items():
        both, a_only, b_only = _complete(key, members)
        row = deduce_triple(both, a_only, b_only)
        observations.append(_observation(both, row.normalized))
    return observations


def provenance_observations(records: Sequence[CountRecord]) -> dict[Provenance, list[BsmObservation]]:
    observations = raw_observations(records)
    deduced = deduced_observations(records)
    if deduced:
        observations[Provenance.DEDUCED] = deduced
    return observations


def qber_set(provenance: Provenance, observations: Sequence[BsmObservation]) -> QberSet:
    """QBER per basis pair; a basis pair without observations stays missing."""
    by_pair: dict[str, list[BsmObservation]] = defaultdict(list)
    for obs in observations:
        by_pair[obs.basis_pair].append(obs)
    values = {
        f"q_{basis_pair.lower()}": qber(by_pair[basis_pair])
        for basis_pair in BASIS_PAIRS
        if by_pair.get(basis_pair)
    }
    return QberSet(provenance=provenance, **values)


def c_or_none(q: QberSet) -> Optional[float]:
    if any(q.get(pair) is None for pair in EQUATORIAL_PAIRS):
        return None
    return c_parameter(q)


def _numerical(exc: BsaError) -> bool:
    return exc.exit_code == 4


def protocol_observables(records: Sequence[CountRecord]) -> Observables:
    """
    Flat observable map, e.g. {"wcp_raw.q_xx": 0.25, "deduced.c": 2.0}.

    Observables that cannot be formed from these records (degenerate
    deduction, no heralded events) are None.
    """
    observations: dict[Provenance, Optional[list[BsmObservation]]] = dict(raw_observations(records))
    try:
        deduced = deduced_observations(records)
        if deduced:
            observations[Provenance.DEDUCED] = deduced
    except BsaError as exc:
        if not _numerical(exc):
            raise
        observations[Provenance.DEDUCED] = None

    values: Observables = {}
    for provenance, obs in observations.items():
        if obs is None:
            values.update({f"{provenance.value}.q_{pair.lower()}": None for pair in BASIS_PAIRS})
            values[f"{provenance.value}.c"] = None
            continue
        by_pair: dict[str, list[BsmObservation]] = defaultdict(list)
        for item in obs:
            by_pair[item.basis_pair].append(item)
        qbers: dict[str, Optional[float]] = {}
        for basis_pair, group in by_pair.items():
            try:
                qbers[f"q_{basis_pair.lower()}"] = qber(group)
            except BsaError as exc:
                if not _numerical(exc):
                    raise
                qbers[f"q_{basis_pair.lower()}"] = None
        values.update({f"{provenance.value}.{name}": q for name, q in qbers.items()})
        values[f"{provenance.value}.c"] = c_or_none(QberSet(provenance=provenance, **qbers))
    return values


def observations_from_deduced(rows: Sequence[DeducedRow]) -> list[BsmObservation]:
    observations = []
    for row in rows:
        setting_a = BasisSetting.parse(row.setting_a)
        setting_b = BasisSetting.parse(row.setting_b)
        observations.append(
            BsmObservation(
                basis_a=setting_a.basis,
                basis_b=setting_b.basis,
                bit_a=setting_a.bit,
                bit_b=setting_b.bit,
                coincidences=row.normalized,
            )
        )
    return observations


def build_report(
    records: Sequence[CountRecord],
    trials: int = 0,
    seed: int = 0,
    deduced_rows: Sequence[DeducedRow] = (),
) -> Report:
    """
    QBER table with C per provenance and frame rotation, plus optional bootstrap errors.

    Previously deduced rows, when given, supply the deduced provenance of their
    frame rotation instead of re-deducing from the records.
    """
    if not records and not deduced_rows:
        raise MissingInputError("no count records to report on")
    deduced_by_beta: dict[float, list[DeducedRow]] = defaultdict(list)
    for deduced_row in deduced_rows:
        deduced_by_beta[deduced_row.beta].append(deduced_row)
    by_beta: dict[float, list[CountRecord]] = defaultdict(list)
    for record in records:
        by_beta[record.beta].append(record)

    rows = []
    for beta in sorted(set(by_beta) | set(deduced_by_beta)):
        group = by_beta.get(beta, [])
        errors: Observables = {}
        if trials and group:
            errors = bootstrap_errors(group, protocol_observables, trials=trials, seed=seed)
        if beta in deduced_by_beta:
            observations = raw_observations(group)
            observations[Provenance.DEDUCED] = observations_from_deduced(deduced_by_beta[beta])
            errors = {k: v for k, v in errors.items() if not k.startswith(f"{Provenance.DEDUCED.value}.")}
        else:
            observations = provenance_observations(group)
        for provenance, provenance_obs in observations.items():
            q = qber_set(provenance, provenance_obs)
            prefix = f"{provenance.value}."
            rows.append(
                ReportRow(
                    provenance=provenance,
                    beta=beta,
                    qbers=q,
                    c=c_or_none(q),
                    errors={k[len(prefix):]: v for k, v in errors.items() if k.startswith(prefix)},
                )
            )
    rows.sort(key=lambda row: (row.beta, list(Provenance).index(row.provenance)))
    logger.info("report: %d rows from %d records", len(rows), len(records))
    return Report(rows=rows, bootstrap_trials=trials, seed=seed if trials else None)


def simulate_manifest(manifest: RunManifest) -> list[CountRecord]:
    """All records a manifest describes at its base point: WCP triples, plus single-photon ones if asked."""
    records = run_protocol_set(manifest.experiment, manifest.settings)
    if manifest.include_single_photon:
        records += run_protocol_set(manifest.single_photon_experiment(), manifest.settings)
    return records


def _at_axis_value(manifest: RunManifest, value: float) -> RunManifest:
    experiment = manifest.experiment
    if manifest.sweep_axis == SweepAxis.BETA:
        experiment = experiment.model_copy(update={"beta": value})
    elif manifest.sweep_axis == SweepAxis.MU:
        experiment = experiment.model_copy(
            update={
                "arm_a": experiment.arm_a.model_copy(update={"mean_photon": value}),
                "arm_b": experiment.arm_b.model_copy(update={"mean_photon": value}),
            }
        )
    return manifest.model_copy(update={"experiment": experiment})


def sweep_columns(include_single_photon: bool, with_errors: bool) -> list[str]:
    provenances = [Provenance.WCP_RAW, Provenance.DEDUCED]
    if include_single_photon:
        provenances.append(Provenance.SINGLE_PHOTON)
    columns = []
    for provenance in provenances:
        columns += [f"q_{pair.lower()}_{provenance.value}" for pair in BASIS_PAIRS]
        columns.append(f"c_{provenance.value}")
    if with_errors:
        columns += [f"err_{column}" for column in list(columns)]
    return columns


def _flat_key(observable: str) -> str:
    # "deduced.q_xx" -> "q_xx_deduced"
    provenance, name = observable.split(".", 1)
    return f"{name}_{provenance}"


def run_sweep(manifest: RunManifest) -> SweepResult:
    """One row of QBERs and C values per axis point."""
    if manifest.sweep_axis == SweepAxis.NONE or manifest.sweep is None:
        raise MissingInputError("sweep needs sweep_axis beta or mu with a sweep range")
    with_errors = manifest.bootstrap_trials > 0
    if with_errors and manifest.experiment.mode != RunMode.SAMPLED:
        raise RequiresSampledCountsError("bootstrap errors need mode=sampled")
    columns = sweep_columns(manifest.include_single_photon, with_errors)

    rows = []
    for value in manifest.sweep.values():
        records = simulate_manifest(_at_axis_value(manifest, value))
        observed = protocol_observables(records)
        values = {column: None for column in columns}
        values.update({_flat_key(k): v for k, v in observed.items() if _flat_key(k) in values})
        if with_errors:
            errors = bootstrap_errors(
                records,
                protocol_observables,
                trials=manifest.bootstrap_trials,
                seed=manifest.resolved_bootstrap_seed,
            )
            values.update({f"err_{_flat_key(k)}": v for k, v in errors.items() if f"err_{_flat_key(k)}" in values})
        rows.append(SweepRow(axis_value=value, values=values))
        logger.info("sweep %s=%.6g done", manifest.sweep_axis.value, value)

    curves_visibility: dict[str, Optional[float]] = {}
    if manifest.sweep_axis == SweepAxis.BETA:
        for column in columns:
            if not column.startswith("q_xx_"):
                continue
            curve = [(row.axis_value, row.values[column]) for row in rows if row.values[column] is not None]
            try:
                curves_visibility[column] = visibility(curve)
            except BsaError:
                curves_visibility[column] = None

    return SweepResult(
        scenario=manifest.scenario,
        axis=manifest.sweep_axis.value,
        columns=columns,
        rows=rows,
        visibility=curves_visibility,
    )
