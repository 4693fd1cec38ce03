from datetime import datetime

from sqlalchemy import Column, DateTime, ForeignKey, Integer, Text
from sqlalchemy.orm import relationship

from app.database import Base


class SimulationRun(Base):
    __tablename__ = "simulation_runs"

    id = Column(Text, primary_key=True)  # uuid4 hex
    scenario = Column(Text, nullable=False)
    mode = Column(Text, nullable=False)
    record_count = Column(Integer, nullable=False, default=0)
    manifest_json = Column(Text, nullable=False)  # RunManifest as submitted
    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationship
    records = relationship(
        "StoredRecord",
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="StoredRecord.position",
    )


class StoredRecord(Base):
    __tablename__ = "stored_records"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Text, ForeignKey("simulation_runs.id", ondelete="CASCADE"), nullable=False)
    position = Column(Integer, nullable=False)
    config_tag = Column(Text, nullable=False)
    setting = Column(Text, nullable=False)  # e.g. "X0X1"
    payload = Column(Text, nullable=False)  # flat record text, same format as the CLI files

    # Relationship
    run = relationship("SimulationRun", back_populates="records")
