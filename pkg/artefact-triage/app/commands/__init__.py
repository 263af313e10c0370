# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

from app.commands import catalog, evaluation, model, pipeline, scenario, timeline

# Subcommand groups in help order
COMMANDS = [timeline, scenario, catalog, model, evaluation, pipeline]
