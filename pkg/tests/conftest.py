"""
Pytest configuration and fixtures.
"""
import os
import sys
from typing import Generator

import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, Session
from sqlalchemy.pool import StaticPool

# Add the parent directory to the path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.database import Base, get_db
from app.experiment_models import ExperimentConfig, ProtocolSetting, RunMode
from app.experiment_service import run_protocol_set
from app.main import app
from app.manifest_models import default_settings
from app.source_models import ArmConfig


# Create in-memory SQLite database for testing
SQLALCHEMY_DATABASE_URL = "sqlite:///:memory:"

engine = create_engine(
    SQLALCHEMY_DATABASE_URL,
    connect_args={"check_same_thread": False},
    poolclass=StaticPool,
)
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# mean photon number arriving at the analyzer in the reference scenario
MU_EFF = 0.008


def override_get_db():
    """Override database dependency for testing."""
    db = TestingSessionLocal()
    try:
        yield db
    finally:
        db.close()


@pytest.fixture(scope="function")
def db_session() -> Generator[Session, None, None]:
    """Create a fresh database session for each test."""
    Base.metadata.create_all(bind=engine)

    session = TestingSessionLocal()
    try:
        yield session
    finally:
        session.close()
        Base.metadata.drop_all(bind=engine)


@pytest.fixture(scope="function")
def client(db_session: Session) -> Generator[TestClient, None, None]:
    """Create a test client with database override."""
    app.dependency_overrides[get_db] = override_get_db

    Base.metadata.create_all(bind=engine)

    with TestClient(app) as test_client:
        yield test_client

    app.dependency_overrides.clear()
    Base.metadata.drop_all(bind=engine)


def lossless_experiment(mu: float = MU_EFF, **updates) -> ExperimentConfig:
    """Both arms WCP at `mu` with no channel loss, so mu is also the mean at the analyzer."""
    config = ExperimentConfig(
        arm_a=ArmConfig(mean_photon=mu),
        arm_b=ArmConfig(mean_photon=mu),
        loss_db_a=0.0,
        loss_db_b=0.0,
    )
    return config.model_copy(update=updates) if updates else config


def settings_for(*names: str) -> list[ProtocolSetting]:
    return [ProtocolSetting.parse(name) for name in names]


@pytest.fixture
def experiment() -> ExperimentConfig:
    return lossless_experiment()


@pytest.fixture(scope="session")
def exact_records():
    """Exact-mode records of all 20 basis/bit settings at the reference mean photon number."""
    return run_protocol_set(lossless_experiment(), default_settings())


@pytest.fixture(scope="session")
def x0x0_triple():
    """(both, a_only, b_only) for X0 X0 in exact mode."""
    return tuple(run_protocol_set(lossless_experiment(), settings_for("X0X0")))


@pytest.fixture(scope="session")
def sampled_records():
    """Sampled-mode records of all 20 settings, 10^8 pulses, fixed seed."""
    config = lossless_experiment(mode=RunMode.SAMPLED, pulses=100_000_000, seed=20_200_901)
    return run_protocol_set(config, default_settings())


@pytest.fixture
def small_manifest_payload() -> dict:
    """JSON manifest with a Z and an X setting, exact mode."""
    return {
        "scenario": "smoke",
        "experiment": {
            "arm_a": {"mean_photon": MU_EFF},
            "arm_b": {"mean_photon": MU_EFF},
            "loss_db_a": 0.0,
            "loss_db_b": 0.0,
        },
        "settings": [
            {"setting_a": {"basis": "Z", "bit": 0}, "setting_b": {"basis": "Z", "bit": 1}},
            {"setting_a": {"basis": "X", "bit": 0}, "setting_b": {"basis": "X", "bit": 0}},
        ],
    }
