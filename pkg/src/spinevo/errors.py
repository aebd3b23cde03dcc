"""Exception hierarchy shared across the package."""


class SpinEvoError(Exception):
    pass


class GenomeError(SpinEvoError, ValueError):
    """Base class for anything wrong with a genome string."""


class GenomeSyntaxError(GenomeError):
    def __init__(self, message, text=None, pos=None):
        if text is not None and pos is not None:
            message = f"{message} at column {pos}: {text!r}"
        super().__init__(message)
        self.text = text
        self.pos = pos


class GenomeSemanticError(GenomeError):
    pass


class ZeroStateError(GenomeError):
    pass


class RoundingRangeError(GenomeError):
    pass


class CapacityError(SpinEvoError):
    pass


class ConvergenceError(SpinEvoError):
    pass


class ConfigError(SpinEvoError, ValueError):
    pass


class TopologyMismatch(SpinEvoError, ValueError):
    pass


class LayoutError(SpinEvoError):
    pass


class HintMismatch(LayoutError):
    pass
