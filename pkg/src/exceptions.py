"""
Error types raised by the sensing, filtering, analysis and harness modules.
"""

from pathlib import Path
from typing import Iterable, Optional


class InvalidArgumentError(ValueError):
    """An argument is outside the domain of the operation."""


class InvalidSparsityError(InvalidArgumentError):
    """Sparsity level K is zero or exceeds the signal length N."""


class ShapeMismatchError(InvalidArgumentError):
    """Vector/matrix dimensions are inconsistent."""


class DegenerateInputError(InvalidArgumentError):
    """A sensing row has zero norm, so the normalized update is undefined."""


class NonContractiveError(InvalidArgumentError):
    """The MSD recursion's linear coefficient has magnitude >= 1."""

    def __init__(self, coefficient: float):
        self.coefficient = coefficient
        super().__init__(
            f"MSD recursion is not contractive: |linear coefficient| = {abs(coefficient):.6g} >= 1"
        )


class ConfigError(InvalidArgumentError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, keys: Optional[Iterable[str]] = None):
        self.keys = sorted(keys) if keys is not None else []
        if self.keys:
            message = f"{message}: {', '.join(self.keys)}"
        super().__init__(message)


class SingularityError(ArithmeticError):
    """A closed-form bound has a zero denominator."""

    def __init__(self, denominator: str):
        self.denominator = denominator
        super().__init__(f"Singular denominator in bound evaluation: {denominator} = 0")


class FilterDivergenceError(ArithmeticError):
    """The adaptive estimate became non-finite."""

    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"Adaptive filter diverged at iteration {iteration}")


class OutputPathError(OSError):
    """The output location cannot be written."""

    def __init__(self, path: Path, reason: str):
        self.path = Path(path)
        super().__init__(f"Cannot write output to {self.path}: {reason}")
