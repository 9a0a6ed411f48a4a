from typing import Optional


class VMTUNetError(Exception):
    """Base class for every failure raised by the package."""


class Diverged(VMTUNetError):
    def __init__(self, step: int, value: float, where: str = "evolve"):
        self.step = step
        self.value = value
        self.where = where
        super().__init__(f"{where} diverged at step {step}: |value| = {value:.3e}")


class EmptyRegion(VMTUNetError):
    def __init__(self, which: str, denominator: float):
        self.which = which
        self.denominator = denominator
        super().__init__(
            f"region '{which}' vanished: denominator {denominator:.3e} below threshold"
        )


class BadMultipliers(VMTUNetError, ValueError):
    pass


class ShapeMismatch(VMTUNetError, ValueError):
    pass


class InputTooSmall(VMTUNetError, ValueError):
    pass


class DecodeError(VMTUNetError):
    def __init__(self, path: str, reason: Optional[str] = None):
        self.path = path
        message = f"cannot decode '{path}'"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class IoError(VMTUNetError, OSError):
    pass
