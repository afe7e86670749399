"""Exception types shared across the package."""


class CertificateFailure(Exception):
    """A runtime certificate did not hold.

    ``detail`` carries whatever locates the failure (an index, a level,
    an atom position).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class InfeasibleWindow(ValueError):
    pass


class NoSolution(RuntimeError):
    pass


class ScheduleInfeasible(ValueError):
    def __init__(self, message, smallest_valid_n=None):
        super().__init__(message)
        self.smallest_valid_n = smallest_valid_n


class EmptyInterval(ValueError):
    pass


class NoAdmissibleSubinterval(CertificateFailure):
    pass


class NoDecayCertificate(ValueError):
    pass


class MismatchedLevels(ValueError):
    pass
