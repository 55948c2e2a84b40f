"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DiroptError(Exception):
    """Base class for all library errors."""


class ValidationError(DiroptError, ValueError):
    """A model, table or file failed structural validation."""


class NonErgodicError(ValidationError):
    """A Markov chain has more than one recurrent class."""

    def __init__(self, classes):
        self.classes = [sorted(c) for c in classes]
        super().__init__(
            f"chain is not ergodic: {len(self.classes)} recurrent classes {self.classes}"
        )


class BudgetExceededError(DiroptError, RuntimeError):
    """An exact computation would exceed its state-enumeration budget."""


class ExactModeUnavailableError(DiroptError, RuntimeError):
    """The exact engine cannot represent the quantity; use Monte-Carlo instead."""


class DomainError(DiroptError, ValueError):
    """A parameter lies outside the validity domain of a closed form."""


class ConvergenceError(DiroptError, RuntimeError):
    """An iterative solver did not converge within its budget."""
