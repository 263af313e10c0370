# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.
