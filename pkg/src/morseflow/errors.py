"""Exception hierarchy shared by all morseflow modules."""


class MorseFlowError(Exception):
    """Base class for every error raised by morseflow."""


# expressions

class ExprSyntaxError(MorseFlowError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownVariable(MorseFlowError):
    def __init__(self, name, offset=None):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown variable {name!r}")


class ArityError(MorseFlowError):
    pass


class EvalError(MorseFlowError):
    pass


class UnknownBuiltin(MorseFlowError):
    pass


# geometry

class MetricNotSPD(MorseFlowError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"metric is not symmetric positive definite at {list(point)}")


class RejectionOverflow(MorseFlowError):
    pass


class NotInwardFlowing(MorseFlowError):
    def __init__(self, point, margin):
        self.point = point
        self.margin = margin
        super().__init__(
            f"descent field does not point inward at boundary point {list(point)} "
            f"(normal component {margin:+.3e})"
        )


class WrongManifold(MorseFlowError):
    pass


class ConfigError(MorseFlowError):
    pass


# critical points

class DegenerateCriticalPoint(MorseFlowError):
    def __init__(self, point, eigenvalues):
        self.point = point
        self.eigenvalues = eigenvalues
        super().__init__(
            f"degenerate critical point at {list(point)}: eigenvalues {list(eigenvalues)}"
        )


class GapTooSmall(MorseFlowError):
    pass


# flow

class StepUnderflow(MorseFlowError):
    def __init__(self, point, t):
        self.point = point
        self.t = t
        super().__init__(f"step size underflow at t={t:.6g}, x={list(point)}")


class LeftDomain(MorseFlowError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"trajectory left the box domain at {list(point)}")


class SeedTooLarge(MorseFlowError):
    pass


class Unresolved(MorseFlowError):
    def __init__(self, point, status="timed_out"):
        self.point = point
        self.status = status
        super().__init__(f"descent from {list(point)} did not converge ({status})")


class NonSimpleInput(MorseFlowError):
    def __init__(self, message, offenders=()):
        self.offenders = tuple(offenders)
        super().__init__(message)


# linear model

class OutOfDomain(MorseFlowError):
    pass


class NotReached(MorseFlowError):
    pass


class UndefinedLimit(MorseFlowError):
    pass


class InsufficientSamples(MorseFlowError):
    pass


# graph / experiments

class StructureViolation(MorseFlowError):
    def __init__(self, clause):
        self.clause = clause
        super().__init__(clause)


class TooManyUnresolved(MorseFlowError):
    pass
