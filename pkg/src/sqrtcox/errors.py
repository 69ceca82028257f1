"""Exception hierarchy; the CLI maps each class to an exit code."""


class SqrtCoxError(Exception):
    pass


class DataError(SqrtCoxError, ValueError):
    """Invalid input data (bad CSV, constant column, wrong shape...)."""


class NumericalError(SqrtCoxError, ArithmeticError):
    """A numerical routine could not produce a meaningful result."""


class DegenerateLikelihoodError(NumericalError):
    """The negative log partial likelihood is zero, so its square root has no gradient."""
