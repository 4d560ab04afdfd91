"""Exception hierarchy for the session runtime and its harness."""


class MpstError(Exception):
    """Base class for every error raised by this package."""


# -- role-set / message preconditions ---------------------------------------

class NotSubset(MpstError, ValueError):
    pass


class RoleOutOfRange(MpstError, ValueError):
    pass


class ControlLabel(MpstError, ValueError):
    """A data-only operation was applied to a KEEP/KILL message."""


class DataLabel(MpstError, ValueError):
    """A control-only operation was applied to a MSG/BRANCH message."""


class EmptyReceivers(MpstError, ValueError):
    pass


class SelfReceive(MpstError, ValueError):
    pass


# -- boards ------------------------------------------------------------------

class ArityTooSmall(MpstError, ValueError):
    pass


class BoardClosed(MpstError):
    """The home board of a blocked reader was freed underneath it."""


class Aborted(MpstError):
    """The runtime was aborted (deadlock recovery) while a reader was blocked."""


# -- endpoints ---------------------------------------------------------------

class BadPartition(MpstError, ValueError):
    pass


class Closed(MpstError):
    pass


class AlreadyClosed(Closed):
    pass


class NotPlayed(MpstError, ValueError):
    pass


class SelfSend(MpstError, ValueError):
    pass


# -- linking -----------------------------------------------------------------

class ArityMismatch(MpstError, ValueError):
    pass


class SameBoard(MpstError, ValueError):
    pass


class CoverageViolation(MpstError, ValueError):
    pass


class IllTyped(MpstError):
    """Both boards carry pending messages from a common sender role."""


class EmptyIntermediateResidual(MpstError, ValueError):
    pass


# -- harness -----------------------------------------------------------------

class DSLSyntaxError(MpstError, SyntaxError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class Violation(MpstError):
    """A failed run; ``trace`` holds the trace prefix up to the failure."""

    def __init__(self, msg: str, trace: list[str] | None = None):
        super().__init__(msg)
        self.trace = list(trace or [])


class Deadlock(Violation):
    pass


class OracleMismatch(Violation):
    pass


class Leak(Violation):
    pass


class InvariantViolation(Violation):
    pass


class FifoInversion(InvariantViolation):
    """A reader got a sender's messages out of that sender's write order."""


class ScriptError(Violation):
    """A scenario verb raised a runtime error."""


class ExpectationFailed(Violation):
    pass
