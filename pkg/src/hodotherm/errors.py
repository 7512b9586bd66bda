"""Exception and warning types raised across the package."""


class HodothermError(Exception):
    """Base class for all package errors."""


class DifferentiationError(HodothermError, ArithmeticError):
    def __init__(self, point, message="non-finite function value"):
        self.point = tuple(float(x) for x in point)
        super().__init__(f"{message} near theta={self.point}")


class QuadratureError(HodothermError, ArithmeticError):
    pass


class PoleError(HodothermError, ZeroDivisionError):
    pass


class ConditionVacuousError(HodothermError, ValueError):
    pass


class DegenerateEntropyError(HodothermError, ZeroDivisionError):
    pass


class CompositionMismatchError(HodothermError, ValueError):
    def __init__(self, defect, message):
        self.defect = defect
        super().__init__(message)


class PathDependenceError(HodothermError, ValueError):
    pass


class CofactorSingularityError(HodothermError, ZeroDivisionError):
    pass


class SingularJacobianError(HodothermError, ArithmeticError):
    def __init__(self, point, message="Jacobian singular"):
        self.point = tuple(float(x) for x in point)
        super().__init__(f"{message} at theta={self.point}")


class BadSeedError(HodothermError, ValueError):
    pass


class MixedBranchError(HodothermError, ValueError):
    pass


class DomainError(HodothermError, ValueError):
    pass


class RootOverflowError(HodothermError, RuntimeError):
    pass


class DegenerateIsothermsError(HodothermError, ValueError):
    pass


class SingularNodeError(HodothermError, ZeroDivisionError):
    def __init__(self, lam, message="isotherms cross"):
        self.lam = float(lam)
        super().__init__(f"{message} at lambda={self.lam!r}")


class IsothermParseError(HodothermError, ValueError):
    pass


class EdgeRootWarning(UserWarning):
    pass


class TangentialRootWarning(UserWarning):
    pass


class ClampWarning(UserWarning):
    pass
