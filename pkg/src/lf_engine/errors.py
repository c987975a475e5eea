"""Exception hierarchy.

Every error raised by the package derives from :class:`LinkFunctionError`, and
each subclass carries an ``exit_code`` used by the command-line runner
(1 is reserved for unexpected failures and 2 for command-line usage errors).
"""


class LinkFunctionError(Exception):
    exit_code = 1


class DomainError(LinkFunctionError, ValueError):
    exit_code = 4


class ContractError(LinkFunctionError, ValueError):
    exit_code = 5


class FrequencyLookupError(LinkFunctionError, KeyError):
    exit_code = 6

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StepSizeError(LinkFunctionError, ArithmeticError):
    exit_code = 7


class ShootingError(LinkFunctionError, ArithmeticError):
    """Backward-pump shooting failed to meet the boundary condition."""

    exit_code = 8

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FitDegeneracyError(LinkFunctionError, ArithmeticError):
    exit_code = 9


class OracleResolutionError(LinkFunctionError, ArithmeticError):
    exit_code = 10


class QuadratureToleranceError(LinkFunctionError, ArithmeticError):
    exit_code = 11

    def __init__(self, message, estimate=None, error=None, order=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.order = order


class ConfigError(LinkFunctionError, ValueError):
    exit_code = 3

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


def add_context(exc: BaseException, context: str) -> BaseException:
    """Prefix ``context`` (e.g. ``"span 2, island (0, 1, 1, 0)"``) to the message
    of ``exc`` in place and record it in ``exc.context``."""
    ctx = list(getattr(exc, "context", []))
    ctx.insert(0, context)
    exc.context = ctx
    if exc.args:
        exc.args = (f"{context}: {exc.args[0]}",) + tuple(exc.args[1:])
    else:
        exc.args = (context,)
    return exc
