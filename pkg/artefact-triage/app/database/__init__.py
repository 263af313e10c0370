# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

from app.database.database import create_tables, get_engine, get_session

__all__ = ["create_tables", "get_engine", "get_session"]
