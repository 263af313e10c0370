# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

from app.models.models import Base, HashRecordRow

__all__ = ["Base", "HashRecordRow"]
