"""
errors.py - Exception hierarchy shared by the library and the CLI exit codes.
"""


class KerrSimError(Exception):
    exit_code = 1


class ConfigError(KerrSimError):
    """Invalid run configuration. Carries every problem found, not just the first."""

    exit_code = 2

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(KerrSimError):
    exit_code = 3


class TruncationError(NumericalError):
    """Fock or Schmidt truncation too small for the requested state."""


class ConvergenceError(NumericalError):
    pass


class CanonicalFormError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class UndefinedObservableError(NumericalError):
    """Observable undefined for this state (e.g. g2 at zero occupation)."""


class ToleranceFailure(KerrSimError):
    exit_code = 4


class OutputError(KerrSimError):
    exit_code = 1
