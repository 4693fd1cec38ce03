from fastapi import APIRouter, Depends, HTTPException, Query
from sqlalchemy.orm import Session

from app.config import get_settings
from app.database import get_db
from app.errors import BsaError, http_status
from app.experiment_routes import get_run_or_404, run_records
from app.manifest_models import RunManifest, SweepAxis
from app.models import ErrorResponse
from app.qkd_models import DeducedRow, Report, SweepResult
from app.report_service import build_report, deduce_records, run_sweep

router = APIRouter(prefix="/analysis", tags=["analysis"])


@router.get("/runs/{run_id}/deduced", response_model=list[DeducedRow])
def get_deduced(run_id: str, db: Session = Depends(get_db)):
    """Deduced single-photon BSM table of a stored run."""
    run = get_run_or_404(db, run_id)
    try:
        return deduce_records(run_records(run))
    except BsaError as e:
        raise HTTPException(status_code=http_status(e), detail=str(e))


def _check_trial_cap(trials: int) -> None:
    limit = get_settings().max_bootstrap_trials
    if trials > limit:
        raise HTTPException(status_code=400, detail=f"bootstrap trials must not exceed {limit}")


@router.get(
    "/runs/{run_id}/report",
    response_model=Report,
    responses={400: {"model": ErrorResponse}, 404: {"model": ErrorResponse}},
)
def get_report(
    run_id: str,
    trials: int = Query(0, ge=0),
    seed: int = Query(0, ge=0),
    db: Session = Depends(get_db),
):
    """QBER and C table of a stored run; trials > 0 adds bootstrap errors (sampled runs only)."""
    if trials == 1:
        raise HTTPException(status_code=400, detail="trials must be 0 or at least 2")
    _check_trial_cap(trials)
    run = get_run_or_404(db, run_id)
    try:
        return build_report(run_records(run), trials=trials, seed=seed)
    except BsaError as e:
        raise HTTPException(status_code=http_status(e), detail=str(e))


@router.post("/sweep", response_model=SweepResult)
def sweep(manifest: RunManifest):
    """QBER and C curves over the manifest's sweep axis."""
    if manifest.sweep_axis == SweepAxis.NONE:
        raise HTTPException(status_code=400, detail="sweep_axis must be beta or mu")
    _check_trial_cap(manifest.bootstrap_trials)
    try:
        return run_sweep(manifest)
    except BsaError as e:
        raise HTTPException(status_code=http_status(e), detail=str(e))
