"""Exception hierarchy shared by all modules."""


class NHKnotsError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(NHKnotsError, ValueError):
    pass


class SolverError(NHKnotsError):
    """Dense eigensolver failed; carries a fingerprint of the offending matrix."""

    def __init__(self, message: str, fingerprint: str = ""):
        super().__init__(f"{message} [matrix {fingerprint}]" if fingerprint else message)
        self.fingerprint = fingerprint


class NearEPError(NHKnotsError):
    """Eigenbasis is (numerically) defective: treat the point as a phase boundary."""


class DegenerateSpectrumError(NHKnotsError):
    def __init__(self, message: str, k: float | None = None):
        super().__init__(message)
        self.k = k


class GridTooCoarseError(NHKnotsError):
    pass


class DegenerateProjectionError(NHKnotsError):
    pass


class GaplessError(NHKnotsError):
    """det[H(k) - Tr H(k)/4] vanishes somewhere on the Brillouin zone grid."""

    def __init__(self, message: str, min_abs_f: float = 0.0):
        super().__init__(message)
        self.min_abs_f = min_abs_f


class ResolutionError(NHKnotsError):
    pass


class DegenerateFillingError(NHKnotsError):
    pass


class ImaginaryResidueError(NHKnotsError):
    pass


class ConfigError(NHKnotsError, ValueError):
    """Malformed configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line
        self.source = source
