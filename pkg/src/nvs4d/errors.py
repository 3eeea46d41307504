"""Exception hierarchy shared by every nvs4d module."""


class Nvs4dError(Exception):
    """Base class for all errors raised by nvs4d."""


class InvalidInput(Nvs4dError, ValueError):
    pass


class BehindCamera(Nvs4dError, ValueError):
    pass


class DegeneratePair(Nvs4dError, ValueError):
    """Two views with zero baseline; no epipolar constraint exists."""


class DegenerateLine(Nvs4dError, ValueError):
    pass


class NoValidPairs(Nvs4dError, ValueError):
    pass


class DegenerateScale(Nvs4dError, ValueError):
    pass


class DegenerateReference(Nvs4dError, ValueError):
    pass


class NoVisiblePoints(Nvs4dError, ValueError):
    pass


class UncalibratableScene(Nvs4dError, ValueError):
    pass


class ConfigError(Nvs4dError, ValueError):
    pass


class UnsupportedCamera(Nvs4dError, ValueError):
    pass


class IntegrityError(Nvs4dError, ValueError):
    pass


class ParseError(Nvs4dError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None for whole-file problems."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: "
        elif where:
            where = f"{where} "
        super().__init__(f"{where}{message}")


class IoError(Nvs4dError, OSError):
    pass
