"""Exception hierarchy for the spectral estimation package."""


class SpectrumEstimationError(ValueError):
    """Base class for all errors raised by this package."""


# materials
class CsvFormatError(SpectrumEstimationError):
    pass


class NegativeAttenuation(SpectrumEstimationError):
    pass


class DuplicateEnergy(SpectrumEstimationError):
    pass


class ExtrapolationRequired(SpectrumEstimationError):
    pass


class DegenerateMaterial(SpectrumEstimationError):
    pass


# physics
class NonPositiveRadius(SpectrumEstimationError):
    pass


class UnknownMaterial(SpectrumEstimationError, KeyError):
    pass


class SpectrumNotSimplex(SpectrumEstimationError):
    pass


class BrightDarkInversion(SpectrumEstimationError):
    pass


class DimensionMismatch(SpectrumEstimationError):
    pass


class GridMismatch(SpectrumEstimationError):
    pass


# dictionary
class NegativeThickness(SpectrumEstimationError):
    pass


class NonPositiveThickness(SpectrumEstimationError):
    pass


class DegenerateColumn(SpectrumEstimationError):
    pass


# solver
class DegenerateCandidate(SpectrumEstimationError):
    """Candidate atom predicts exactly the current fit; the blend is undefined."""


class NoViableCandidate(SpectrumEstimationError):
    pass


class IdenticalColumns(SpectrumEstimationError):
    """Two atoms have identical forward predictions; any pairwise shift is a no-op."""


class BadInitialization(SpectrumEstimationError):
    pass


# harness
class ConfigError(SpectrumEstimationError):
    pass
