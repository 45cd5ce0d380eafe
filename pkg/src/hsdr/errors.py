"""Exception types raised across the toolkit."""


class HsdrError(Exception):
    """Base class for all toolkit errors."""


class EmptyInput(HsdrError, ValueError):
    pass


class NonFinite(HsdrError, ValueError):
    pass


class NotSymmetric(HsdrError, ValueError):
    pass


class NoConvergence(HsdrError, RuntimeError):
    pass


class FormatError(HsdrError, ValueError):
    pass


class DimensionMismatch(HsdrError, ValueError):
    pass


class IoError(HsdrError, OSError):
    pass


class EmptyClass(HsdrError, ValueError):
    pass


class InvalidK(HsdrError, ValueError):
    pass


class InvalidM(HsdrError, ValueError):
    pass


class InsufficientClassSamples(HsdrError, ValueError):
    def __init__(self, class_id, count, required=2):
        self.class_id = class_id
        self.count = count
        super().__init__(
            f"class {class_id} has {count} training samples, need at least {required}"
        )


class SingularScatter(HsdrError, ValueError):
    pass


class LabelOutOfRange(HsdrError, ValueError):
    pass


class LengthMismatch(HsdrError, ValueError):
    pass


class SpecInvalid(HsdrError, ValueError):
    pass


class ConfigError(HsdrError, ValueError):
    pass
