"""Exception types raised across the toolkit."""


class HybridSVError(Exception):
    """Base class for toolkit errors."""


class FormatError(HybridSVError, ValueError):
    """Malformed container or file layout."""


class UnsupportedFormatError(FormatError):
    """Well-formed file using an encoding the reader does not handle."""


class EmptyAudioError(HybridSVError, ValueError):
    pass


class EmptyManifestError(HybridSVError, ValueError):
    pass


class TooShortError(HybridSVError, ValueError):
    """Input has fewer samples or frames than the operation needs."""


class InsufficientDataError(HybridSVError, ValueError):
    pass


class DegenerateError(HybridSVError, ValueError):
    """Score set or sample without enough variety to compute a statistic."""


class DivergenceError(HybridSVError, ArithmeticError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")


class ConfigError(HybridSVError, ValueError):
    pass
