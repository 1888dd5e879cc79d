"""Engine-wide error types.

Kept in one place so the control plane can map them to HTTP statuses and
CLI exit codes without importing every subsystem.
"""


class LabError(Exception):
    """Base class for all engine errors."""


# -- event log ---------------------------------------------------------------

class UnknownProject(LabError):
    pass


class WriterConflict(LabError):
    """A second writer tried to take a project's exclusive writer token."""


class CorruptLog(LabError):
    """Sequence gap, unparseable record, or checkpoint digest mismatch."""


class TargetAheadOfHead(LabError):
    """Rollback target must be strictly earlier than the current head."""


class HarnessBusy(LabError):
    """Rollback refused while a tool or experiment is in flight."""


# -- workflow ----------------------------------------------------------------

class EmptyPrompt(LabError):
    pass


class BudgetExhausted(LabError):
    pass


class ValidationPending(LabError):
    """advance() called before the current stage produced a verdict."""


class IntegrityFailed(LabError):
    """Terminal transition blocked: manuscript numbers do not trace to metrics."""


class InvalidTarget(LabError):
    """Feedback target is not an earlier stage than its origin."""


class IterationCapReached(LabError):
    pass


class ReviewerUnavailable(LabError):
    pass


# -- model gateway -----------------------------------------------------------

class BackendFailure(LabError):
    pass


class AllBackendsFailed(BackendFailure):
    """Every backend in the fallback chain failed."""


class ScriptExhausted(BackendFailure):
    """The scripted backend ran out of fixtures; a test wrote too few."""


class ScriptMismatch(BackendFailure):
    """A request did not match the next scripted fixture's matcher."""


# -- code harness ------------------------------------------------------------

class MountMissing(LabError):
    pass


class DeniedCommand(LabError):
    pass


class PathEscape(LabError):
    """A path argument resolved outside the workspace root and mounts."""


class WorkspaceBusy(LabError):
    pass


class CorruptJournal(LabError):
    """Metric journal checksum or sequence verification failed."""


class ControllerTampered(CorruptJournal):
    """The injected run controller was modified after materialization."""


# -- artifact store ----------------------------------------------------------

class UnknownEvent(LabError):
    pass


class NotFound(LabError):
    pass


class CorruptArtifact(LabError):
    """Stored bytes no longer hash to the artifact id."""


class LineageCycle(LabError):
    pass


# -- writing / evaluation ----------------------------------------------------

class NoFinalizedMetrics(LabError):
    pass


class UnparseableManuscript(LabError):
    pass


class UnparseableReview(LabError):
    pass


class SessionReused(LabError):
    """A review tried to reuse a conversation session; each needs a fresh one."""


class MissingCell(LabError):
    pass


# -- control plane -----------------------------------------------------------

class ValidationFailed(LabError):
    pass


class Conflict(LabError):
    pass
