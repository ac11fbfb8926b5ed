"""Exception hierarchy shared by every module.

Each error carries a stable ``code`` string used by the HTTP gateway to
map onto status codes, so inner modules never import HTTP machinery.
"""

from __future__ import annotations


class PlatformError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "internal"

    def __init__(self, message: str = "", detail=None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail


# -- not-found family ---------------------------------------------------

class NotFoundError(PlatformError):
    code = "not_found"


class UnknownDataset(NotFoundError):
    code = "unknown_dataset"


class NoSuchVersion(NotFoundError):
    code = "no_such_version"


class UnknownProject(NotFoundError):
    code = "unknown_project"


class UnknownSource(NotFoundError):
    code = "unknown_source"


class UnknownWorkingSet(NotFoundError):
    code = "unknown_working_set"


class UnknownJob(NotFoundError):
    code = "unknown_job"


class UnknownEntity(NotFoundError):
    code = "unknown_entity"


class UnknownAlgorithm(NotFoundError):
    code = "unknown_algorithm"


class UnknownPrincipal(NotFoundError):
    code = "unknown_principal"


class UnknownResource(NotFoundError):
    code = "unknown_resource"


class UnknownBackend(NotFoundError):
    code = "unknown_backend"


class UnknownLandUse(NotFoundError):
    code = "unknown_land_use"


# -- auth ---------------------------------------------------------------

class Unauthenticated(PlatformError):
    code = "unauthenticated"


class BadCredentials(Unauthenticated):
    code = "bad_credentials"


class PermissionDenied(PlatformError):
    code = "permission_denied"


# -- validation family --------------------------------------------------

class ValidationError(PlatformError):
    code = "validation_failed"


class SchemaInvalid(ValidationError):
    code = "schema_invalid"


class ValidationFailed(ValidationError):
    code = "validation_failed"


class UnmappedRequiredField(ValidationError):
    code = "unmapped_required_field"


class ParamValidationFailed(ValidationError):
    code = "param_validation_failed"


class PredicateParseError(ValidationError):
    code = "predicate_parse_error"

    def __init__(self, position: int, expected: str):
        super().__init__(
            f"parse error at position {position}: expected {expected}",
            detail={"position": position, "expected": expected},
        )
        self.position = position
        self.expected = expected


class InvalidActivity(ValidationError):
    code = "invalid_activity"


class InvalidCatchment(ValidationError):
    code = "invalid_catchment"


class EmptySeries(ValidationError):
    code = "empty_series"


class SeriesMismatch(ValidationError):
    code = "series_mismatch"


class ConfigInvalid(ValidationError):
    code = "config_invalid"


class FetchFailed(ValidationError):
    code = "fetch_failed"


class ParseFailed(ValidationError):
    code = "parse_failed"


# -- conflict family ----------------------------------------------------

class ConflictError(PlatformError):
    code = "conflict"


class DuplicateName(ConflictError):
    code = "duplicate_name"


class DuplicateAlgorithm(ConflictError):
    code = "duplicate_algorithm"


class DuplicateBackend(ConflictError):
    code = "duplicate_backend"


class DuplicatePrincipal(ConflictError):
    code = "duplicate_principal"


class StaleBase(ConflictError):
    code = "stale_base"


class WorkingSetClosed(ConflictError):
    code = "working_set_closed"


class JobAlreadyFinished(ConflictError):
    code = "job_already_finished"


class MergeConflicts(ConflictError):
    """Raised by merge under abort_on_conflict when conflicts exist."""

    code = "merge_conflicts"

    def __init__(self, conflicts):
        super().__init__("merge aborted on conflicts", detail={"conflicts": conflicts})
        self.conflicts = conflicts
