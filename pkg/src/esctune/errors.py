"""Exception types shared across the package."""


class EscError(Exception):
    """Base class for all errors raised by esctune."""


class ValidationError(EscError):
    """Malformed workload, generator spec, or mismatched run artifacts."""


class BudgetExhausted(EscError):
    """Raised by a budgeted oracle once every allowed what-if call is spent."""


class ContractViolation(EscError):
    """A numeric contract was broken (usually a sign of a broken oracle or cache)."""


class VerificationFailure(EscError):
    """A brute-force verification suite found a counterexample."""

    def __init__(self, message, counterexamples=None):
        super().__init__(message)
        self.counterexamples = list(counterexamples or [])
