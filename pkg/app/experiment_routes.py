import logging
from uuid import uuid4

from fastapi import APIRouter, Depends, HTTPException, Query
from sqlalchemy.orm import Session

from app.database import get_db
from app.db_models import SimulationRun, StoredRecord
from app.errors import BsaError, http_status
from app.experiment_models import CountRecord
from app.manifest_models import RunManifest
from app.models import ErrorResponse, RunDetail, RunListResponse, RunSummary
from app.record_io import parse_record, serialize_record
from app.report_service import simulate_manifest

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/experiments", tags=["experiments"])


def _summary(run: SimulationRun) -> RunSummary:
    return RunSummary(
        id=run.id,
        scenario=run.scenario,
        mode=run.mode,
        record_count=run.record_count,
        created_at=run.created_at,
    )


def get_run_or_404(db: Session, run_id: str) -> SimulationRun:
    run = db.query(SimulationRun).filter(SimulationRun.id == run_id).first()
    if run is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return run


def run_records(run: SimulationRun) -> list[CountRecord]:
    return [parse_record(stored.payload, source=f"run {run.id}#{stored.position}") for stored in run.records]


@router.post("/runs", response_model=RunSummary, status_code=201)
def create_run(manifest: RunManifest, db: Session = Depends(get_db)):
    """Run the manifest's protocol set and store every count record."""
    try:
        records = simulate_manifest(manifest)
    except BsaError as e:
        raise HTTPException(status_code=http_status(e), detail=str(e))

    run = SimulationRun(
        id=uuid4().hex,
        scenario=manifest.scenario,
        mode=manifest.experiment.mode.value,
        record_count=len(records),
        manifest_json=manifest.model_dump_json(),
    )
    for position, record in enumerate(records):
        run.records.append(
            StoredRecord(
                position=position,
                config_tag=record.config_tag.value,
                setting=f"{record.setting_a}{record.setting_b}",
                payload=serialize_record(record),
            )
        )
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info("stored run %s (%d records)", run.id, run.record_count)
    return _summary(run)


@router.get("/runs", response_model=RunListResponse)
def list_runs(
    offset: int = Query(0, ge=0),
    limit: int = Query(20, ge=1, le=100),
    db: Session = Depends(get_db),
):
    """List stored runs, newest first."""
    runs = (
        db.query(SimulationRun)
        .order_by(SimulationRun.created_at.desc())
        .offset(offset)
        .limit(limit)
        .all()
    )
    return RunListResponse(runs=[_summary(run) for run in runs])


@router.get("/runs/{run_id}", response_model=RunDetail, responses={404: {"model": ErrorResponse}})
def get_run(run_id: str, db: Session = Depends(get_db)):
    """Get a stored run with its manifest and count records."""
    run = get_run_or_404(db, run_id)
    summary = _summary(run)
    return RunDetail(
        **summary.model_dump(),
        manifest=RunManifest.model_validate_json(run.manifest_json),
        records=run_records(run),
    )
