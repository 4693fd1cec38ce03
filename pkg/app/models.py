from datetime import datetime
from typing import Optional

from pydantic import BaseModel

from app.experiment_models import CountRecord
from app.manifest_models import RunManifest


class RunSummary(BaseModel):
    id: str
    scenario: str
    mode: str
    record_count: int
    created_at: Optional[datetime] = None


class RunListResponse(BaseModel):
    runs: list[RunSummary]


class RunDetail(RunSummary):
    manifest: RunManifest
    records: list[CountRecord] = []


class ErrorResponse(BaseModel):
    detail: str
