# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import logging
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from app.config import catalog_db_url
from app.models.models import Base

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def get_engine(url: Optional[str] = None) -> Engine:
    """Engine for a catalog database URL (TRIAGE_CATALOG_DB by default)."""
    url = catalog_db_url(url)
    return create_engine(
        url,
        connect_args={"check_same_thread": False} if url.startswith("sqlite") else {},
    )


def create_tables(engine: Engine) -> None:
    """Create all tables in the database"""
    Base.metadata.create_all(bind=engine)


@contextmanager
def get_session(url: Optional[str] = None) -> Iterator[Session]:
    """Session on the catalog database; commits on success, rolls back on error."""
    engine = get_engine(url)
    create_tables(engine)
    session = sessionmaker(autocommit=False, autoflush=False, bind=engine)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
