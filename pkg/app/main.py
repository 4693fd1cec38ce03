from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.analysis_routes import router as analysis_router
from app.config import get_settings
from app.database import create_tables
from app.experiment_routes import router as experiments_router
from app.logging_config import setup_logging
from app.qkd_service import verify_correlation_table


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Configure logging, create tables and check the Bell-outcome table on startup."""
    setup_logging(get_settings().log_level)
    create_tables()
    verify_correlation_table()
    yield

app = FastAPI(
    title="Bell State Analyzer Simulation API",
    description="Linear-optical Bell state measurement with weak coherent pulses and single photons",
    version="1.0.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(experiments_router)
app.include_router(analysis_router)


@app.get("/health")
async def health_check():
    return {"status": "healthy"}
