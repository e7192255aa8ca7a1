"""Exception hierarchy shared by the library and the CLI."""


class WhittleLabError(Exception):
    """Base class for all errors raised by whittle_lab."""


class ModelValidationError(WhittleLabError, ValueError):
    """A bandit model violates one of its invariants.

    ``problems`` holds the individual messages produced by :func:`validate`.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NonIndexableError(WhittleLabError):
    """Index computation hit a situation that cannot occur for an indexable arm."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BudgetExceededError(WhittleLabError):
    """The product-MDP solve would exceed the configured state-action budget."""
