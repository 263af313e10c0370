# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

# Triage services: parsing, attribution, features, models, ranking and synthetic cases
