"""Exception types shared across the package."""


class InputError(Exception):
    """Malformed tree file, expression, or CLI argument. Exit code 3."""


class SimFault(Exception):
    """Budget, freeze, or write-conflict violation in strict mode. Exit code 2."""


class LogIntegrityError(Exception):
    """Contraction log cannot be replayed (missing value, double assign)."""


class ExprArithmeticError(Exception):
    """Arithmetic failure (division by zero, oversized exponent) naming the subexpression."""
