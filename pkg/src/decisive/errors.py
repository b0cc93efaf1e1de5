"""Exception hierarchy.

Every error raised on purpose by the library derives from ``DecisiveError``.
``Refusal`` marks the cases where an analysis declines to run because a
hypothesis it needs is missing or known to be false; the CLI maps those to
exit code 2.
"""


class DecisiveError(Exception):
    pass


class UnknownState(DecisiveError, KeyError):
    def __str__(self):
        return f"unknown state: {self.args[0]!r}"


class UnresolvableSet(DecisiveError):
    """Membership of a state cannot be decided with the available certificate."""


class UnboundedFormula(DecisiveError):
    pass


class ZeroMass(DecisiveError):
    pass


class ResourceExhausted(DecisiveError):
    pass


class InvalidModel(DecisiveError, ValueError):
    pass


class AlphabetMismatch(InvalidModel):
    pass


class IncompleteAutomaton(InvalidModel):
    pass


class NondeterministicAutomaton(InvalidModel):
    pass


class DeadlockedConfiguration(DecisiveError):
    pass


class Refusal(DecisiveError):
    """An analysis refused to run; the message names the violated hypothesis."""


class CertificateRequired(Refusal):
    pass


class EvidenceError(Refusal):
    pass


class SinkViolation(Refusal):
    """A supplied avoid-set is not closed under positive-probability successors."""


class ParseError(InvalidModel):
    """Malformed input file; carries the position when the syntax is at fault."""

    def __init__(self, message: str, source: str = "<input>", line: int | None = None,
                 col: int | None = None):
        self.source, self.line, self.col = source, line, col
        where = f"{source}:{line}:{col}: " if line is not None else f"{source}: "
        super().__init__(where + message)
