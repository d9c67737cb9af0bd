"""Dictionary-based estimation of X-ray CT source-detector spectral responses."""

from .dictionary import (
    Dictionary,
    ResponseAtom,
    SourceSpectrum,
    build_dictionary,
    detector_response,
    filter_response,
    table2_default_dictionary,
)
from .materials import (
    AttenuationCurve,
    EnergyGrid,
    MaterialTable,
    interpolate_to_grid,
    load_attenuation_csv,
    synthetic_lac,
)
from .physics import (
    ForwardMatrix,
    PathLengthMatrix,
    TransmissionSet,
    build_forward_matrix,
    cylinder_path_lengths,
    normalize_raw_scans,
    simulate_transmissions,
    weighted_loss,
)
from .solver import (
    SolverConfig,
    SolveTrace,
    SparseCoefficients,
    dictse_solve,
    effective_matrix,
    lsse_solve,
    spectrum_from_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "AttenuationCurve", "Dictionary", "EnergyGrid", "ForwardMatrix", "MaterialTable",
    "PathLengthMatrix", "ResponseAtom", "SolveTrace", "SolverConfig", "SourceSpectrum",
    "SparseCoefficients", "TransmissionSet", "build_dictionary", "build_forward_matrix",
    "cylinder_path_lengths", "detector_response", "dictse_solve", "effective_matrix",
    "filter_response", "interpolate_to_grid", "load_attenuation_csv", "lsse_solve",
    "normalize_raw_scans", "simulate_transmissions", "spectrum_from_coefficients",
    "synthetic_lac", "table2_default_dictionary", "weighted_loss",
]
