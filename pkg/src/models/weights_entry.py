from sqlalchemy import Column, DateTime, Integer, String
from sqlalchemy.sql import func

from database import Base


class WeightsEntryModel(Base):
    __tablename__ = "weights_entries"

    id = Column(Integer, primary_key=True, index=True)
    version = Column(Integer, unique=True, nullable=False, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    digest = Column(String(64), nullable=False)
    path = Column(String, nullable=False)
    size_bytes = Column(Integer, nullable=False)
    reason = Column(String, nullable=True)  # initial, archive, rollback
