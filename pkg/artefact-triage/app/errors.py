# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Exception hierarchy shared by the services and the CLI.

Every error carries the process exit code the CLI reports for it: 1 for
a missing required argument, 2 for unreadable or malformed input, 3 for
data that cannot be trained on or evaluated.
"""


class TriageError(Exception):
    exit_code = 2


# Usage errors (exit code 1)

class MissingArgument(TriageError):
    exit_code = 1


# Input errors (exit code 2)

class InputError(TriageError):
    exit_code = 2


class MissingHeader(InputError):
    def __init__(self, found=None):
        detail = f" (found: {found!r})" if found is not None else ""
        super().__init__(f"Input does not start with the l2tcsv header{detail}")
        self.found = found


class MalformedRow(InputError):
    def __init__(self, row_id: int, reason: str):
        super().__init__(f"Malformed row {row_id}: {reason}")
        self.row_id = row_id
        self.reason = reason


class UnknownField(InputError):
    def __init__(self, field: str):
        super().__init__(f"Unknown timeline field: {field}")
        self.field = field


class MalformedLine(InputError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"Malformed line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateConflictingDigest(InputError):
    def __init__(self, digest: str, existing: str, new: str):
        super().__init__(f"Digest {digest} already labelled '{existing}', cannot relabel as '{new}'")
        self.digest = digest


class InvalidDigest(InputError):
    def __init__(self, digest: str, context: str = ""):
        where = f" for {context}" if context else ""
        super().__init__(f"Invalid digest{where}: {digest!r}")
        self.digest = digest
        self.context = context


class CorruptModel(InputError):
    pass


class VersionMismatch(InputError):
    pass


class InvalidSpec(InputError):
    pass


class InvalidConfig(InputError):
    pass


class CorruptReport(InputError):
    pass


# Data errors (exit code 3)

class DataError(TriageError):
    exit_code = 3


class EmptyConfig(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class SingleClass(DataError):
    pass


class NonFiniteLoss(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class UnknownArtefact(DataError):
    def __init__(self, path: str):
        super().__init__(f"Artefact not present in index: {path}")
        self.path = path


class EmptyTruth(DataError):
    pass


class UnknownTruthArtefact(DataError):
    def __init__(self, path: str):
        super().__init__(f"Ground-truth artefact missing from ranking: {path}")
        self.path = path


class PipelineStageError(TriageError):
    """Wraps an error raised inside one pipeline stage, keeping its exit code."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
