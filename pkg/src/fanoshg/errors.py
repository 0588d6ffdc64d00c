"""Exception hierarchy shared across the package."""


class FanoSHGError(Exception):
    """Base class for all package errors."""


class ParameterError(FanoSHGError, ValueError):
    """A physical parameter violates its validity rule.

    ``field`` names the offending attribute (e.g. ``"gamma1"``).
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NonFiniteError(FanoSHGError):
    """Integration produced a non-finite or unphysical state.

    ``t`` is the time of failure and ``last_state`` the last accepted state
    (rotating-frame envelopes unless stated otherwise).
    """

    def __init__(self, message, t=None, last_state=None):
        super().__init__(message)
        self.t = t
        self.last_state = last_state


class PopulationBoundError(NonFiniteError):
    """A population left [0, 1] beyond the allowed tolerance."""


class StiffnessError(FanoSHGError):
    """The adaptive step size collapsed below the floor.

    The algebraic fixed-point solver is the recommended fallback.
    """

    def __init__(self, message, t=None, last_state=None, h=None):
        super().__init__(message)
        self.t = t
        self.last_state = last_state
        self.h = h


class NotConvergedError(FanoSHGError):
    """An operation needed a converged steady state and did not get one."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoConvergenceError(NotConvergedError):
    """Iterative solver exhausted its iteration budget."""


class DegenerateDenominatorError(FanoSHGError, ZeroDivisionError):
    """Closed-form amplitude hit an exact pole (|denominator| below threshold)."""

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator


class NoBracketError(FanoSHGError, ValueError):
    """The calibration target is not bracketed by the supplied drive interval."""


class ConfigError(FanoSHGError, ValueError):
    """Configuration file could not be parsed or validated.

    ``path`` is the dotted field path, ``line`` the 1-based source line when known.
    """

    def __init__(self, message, path=None, line=None):
        where = ""
        if path:
            where += f"[{path}]"
        if line:
            where += f" (line {line})"
        super().__init__(f"{where} {message}".strip())
        self.path = path
        self.line = line
