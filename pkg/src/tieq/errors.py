"""Exception hierarchy.

Every error raised by the library derives from :class:`TieqError`, so
callers (the CLI in particular) can catch one base class.
"""


class TieqError(Exception):
    """Base class for library errors."""


class ModelError(TieqError, ValueError):
    """Malformed problem data."""


class DegenerateBox(ModelError):
    pass


class GridTooLarge(ModelError):
    pass


class NoFiniteHorizon(TieqError):
    """The supplied tail bound never falls below the requested tolerance."""


class ModeMismatch(TieqError, ValueError):
    pass


class NotNormalized(TieqError, ValueError):
    pass


class NegativeDensity(TieqError, ValueError):
    pass


class NonpositiveLambda(TieqError, ValueError):
    pass


class InvalidGenerator(TieqError, ValueError):
    pass


class StepTooLarge(TieqError, ValueError):
    def __init__(self, h, index=None, limit=None):
        self.h = h
        self.index = index
        self.limit = limit
        where = f" (entry {index} of h list)" if index is not None else ""
        bound = f"; admissible h <= {limit:.6g}" if limit is not None else ""
        super().__init__(f"step h={h!r}{where} makes p_h non-stochastic{bound}")


class AllStagesDiverged(TieqError):
    pass


class ScanTooLarge(TieqError):
    pass


class StructureMismatch(TieqError, ValueError):
    pass


class NotExponential(TieqError, ValueError):
    pass


class ConfigError(TieqError):
    """Config or model file violates its schema.

    ``pointer`` is a JSON pointer into the offending document.
    """

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer or '/'}: {message}")
