"""Exception hierarchy shared by every layer of the package."""


class PinballError(Exception):
    """Base class; the CLI maps any of these to exit status 1."""


class InvalidGeometry(PinballError):
    pass


class OutOfDomain(PinballError):
    pass


class DomainError(PinballError):
    pass


class BackendMismatch(PinballError):
    pass


class DegenerateContact(PinballError):
    pass


class NonRationalIntersection(PinballError):
    pass


class AmbiguousRoot(PinballError):
    pass


class SimultaneousContact(PinballError):
    pass


class BallStopped(PinballError):
    pass


class InvalidScene(PinballError):
    pass


class InvalidGadgetParams(PinballError):
    pass


class VerificationFailure(PinballError):
    pass


class ExcludedOffset(PinballError):
    pass


class InvalidConfig(PinballError):
    pass


class DecodeAmbiguous(PinballError):
    pass


class OracleHalt(PinballError):
    """Raised by the reference interpreter when no transition applies.

    ``verdict`` is ``"accept"``, ``"reject"`` or ``"stuck"``.
    """

    def __init__(self, verdict, message=""):
        super().__init__(message or verdict)
        self.verdict = verdict


class CompileError(PinballError):
    pass


class ParseError(PinballError):
    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column
