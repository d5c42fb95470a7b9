"""Exception hierarchy shared by all stripwalk modules."""


class StripwalkError(Exception):
    pass


class InvalidSpec(StripwalkError, ValueError):
    pass


class InvalidRange(StripwalkError, ValueError):
    pass


class SiteOutOfRange(StripwalkError, IndexError):
    pass


class StepCapExceeded(StripwalkError, RuntimeError):
    pass


class ResourceLimit(StripwalkError, MemoryError):
    pass


class ChainExplosion(StripwalkError, OverflowError):
    pass


class RejectionBudgetExceeded(StripwalkError, RuntimeError):
    def __init__(self, message: str, attempts: int = 0, accepted: int = 0):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_estimate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


class UnrestrictedChain(StripwalkError, ValueError):
    pass


class NonSubcritical(StripwalkError, ValueError):
    pass


class EmptySample(StripwalkError, ValueError):
    pass


class SparseCells(StripwalkError, ValueError):
    pass


class ConfigError(StripwalkError, ValueError):
    pass
