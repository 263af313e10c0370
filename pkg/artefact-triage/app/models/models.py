# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

from datetime import datetime

from sqlalchemy import Column, DateTime, String, Text
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class HashRecordRow(Base):
    __tablename__ = "hash_records"

    digest = Column(String(64), primary_key=True, index=True)
    algorithm = Column(String(16), nullable=False)
    label = Column(String(16), nullable=False, index=True)
    note = Column(Text, default="")
    created_at = Column(DateTime, default=datetime.utcnow)
