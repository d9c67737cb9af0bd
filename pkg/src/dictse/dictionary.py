"""Physics-generated dictionaries of normalized candidate spectra.

Each atom is ``source * filter * detector`` normalized to unit sum, where
the filter is a Beer-Lambert transmission and the detector is the absorbed
fraction of a scintillator layer, optionally weighted by photon energy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    CsvFormatError,
    DegenerateColumn,
    GridMismatch,
    NegativeThickness,
    NonPositiveThickness,
)
from .materials import EnergyGrid


@dataclass(frozen=True)
class SourceSpectrum:
    grid: EnergyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_bins,):
            raise GridMismatch(f"source has {values.shape} values for {self.grid.n_bins} bins")
        if np.any(values < 0) or not np.any(values > 0) or not np.all(np.isfinite(values)):
            raise ValueError("source intensities must be nonnegative with at least one positive bin")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def flat(cls, grid: EnergyGrid) -> SourceSpectrum:
        return cls(grid, np.ones(grid.n_bins))

    @classmethod
    def hump(cls, grid: EnergyGrid, peak_keV: float = 30.0) -> SourceSpectrum:
        """Smooth single-peaked spectrum ``E**2 * exp(-2 E / peak)``."""
        e = grid.centers / peak_keV
        return cls(grid, e * e * np.exp(-2.0 * e))

    def scaled(self, c: float) -> SourceSpectrum:
        return SourceSpectrum(self.grid, c * self.values)


class Provenance(NamedTuple):
    kind: str  # "filter" or "detector"
    material_id: str
    thickness: float


@dataclass(frozen=True)
class ResponseAtom:
    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or np.any(values < 0):
            raise ValueError("response values must be a nonnegative vector")
        if self.provenance.kind == "filter" and np.any(values > 1):
            raise ValueError("filter transmission cannot exceed 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


class ColumnProvenance(NamedTuple):
    filter_material: str
    filter_thickness: float
    scint_thickness: float

    def label(self) -> str:
        return f"{self.filter_material}:{self.filter_thickness!r}:{self.scint_thickness!r}"

    @classmethod
    def parse(cls, label: str) -> ColumnProvenance:
        try:
            material, ft, st = label.rsplit(":", 2)
            return cls(material, float(ft), float(st))
        except ValueError:
            raise CsvFormatError(f"bad provenance label {label!r}") from None


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Columns of normalized spectra with the recipe that produced each.

    Attributes
    ----------
    columns : numpy.ndarray, shape (N_e, N_k)
        Nonnegative columns, each summing to one.
    provenance : tuple of ColumnProvenance
        One entry per column.
    grid : EnergyGrid
    """

    columns: np.ndarray
    provenance: tuple
    grid: EnergyGrid

    def __post_init__(self):
        cols = np.array(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != self.grid.n_bins or cols.shape[1] < 1:
            raise GridMismatch(f"dictionary shape {cols.shape} incompatible with grid")
        prov = tuple(ColumnProvenance(*p) for p in self.provenance)
        if len(prov) != cols.shape[1]:
            raise ValueError("provenance length must equal the number of columns")
        if np.any(cols < 0) or np.any(np.abs(cols.sum(axis=0) - 1.0) > 1e-9):
            raise ValueError("dictionary columns must be nonnegative and sum to 1")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "provenance", prov)

    @property
    def n_atoms(self) -> int:
        return self.columns.shape[1]

    def __len__(self):
        return self.n_atoms


def filter_response(lac, thickness: float, material_id: str = "") -> ResponseAtom:
    """Beer-Lambert transmission ``exp(-mu * thickness)`` of a filter."""
    if thickness < 0:
        raise NegativeThickness(f"filter thickness must be >= 0, got {thickness}")
    lac = np.asarray(lac, dtype=float)
    return ResponseAtom(np.exp(-lac * thickness), Provenance("filter", material_id, float(thickness)))


def detector_response(scint_lac, thickness: float, energy_weighted: bool = True,
                      grid: EnergyGrid | None = None, material_id: str = "") -> ResponseAtom:
    """Absorbed fraction ``1 - exp(-mu * d)`` of a scintillator layer.

    With ``energy_weighted`` the fraction is multiplied by the bin-center
    energy in keV, modelling an energy-integrating detector; ``grid`` is
    then required.
    """
    if not thickness > 0:
        raise NonPositiveThickness(f"scintillator thickness must be > 0, got {thickness}")
    scint_lac = np.asarray(scint_lac, dtype=float)
    values = -np.expm1(-scint_lac * thickness)
    if energy_weighted:
        if grid is None:
            raise ValueError("energy weighting needs the energy grid")
        values = values * grid.centers
    return ResponseAtom(values, Provenance("detector", material_id, float(thickness)))


def build_dictionary(source: SourceSpectrum, filters: Sequence[ResponseAtom],
                     detectors: Sequence[ResponseAtom]) -> Dictionary:
    """Normalized products of source, filter and detector responses.

    Columns run over filters in the outer loop and detectors in the inner
    loop, so column ``i * len(detectors) + j`` pairs filter ``i`` with
    detector ``j``.
    """
    n_e = source.grid.n_bins
    if not filters or not detectors:
        raise ValueError("need at least one filter and one detector atom")
    for atom in (*filters, *detectors):
        if atom.values.shape != (n_e,):
            raise GridMismatch("response atom length does not match the source grid")
    filt = np.stack([f.values for f in filters], axis=1)  # (N_e, n_f)
    det = np.stack([d.values for d in detectors], axis=1)  # (N_e, n_d)
    products = (source.values[:, None, None] * filt[:, :, None] * det[:, None, :]).reshape(n_e, -1)
    sums = products.sum(axis=0)
    if np.any(sums <= 0):
        bad = int(np.argmax(sums <= 0))
        raise DegenerateColumn(f"column {bad} has zero total response")
    provenance = [
        ColumnProvenance(f.provenance.material_id, f.provenance.thickness, d.provenance.thickness)
        for f in filters for d in detectors
    ]
    return Dictionary(products / sums, provenance, source.grid)


def thickness_range(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic range, rounded to suppress accumulation error."""
    if step <= 0 or stop < start:
        raise ValueError("thickness range needs start <= stop and a positive step")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


# (material, start mm, stop mm, step mm)
DEFAULT_FILTER_RANGES = (("Al", 0.1, 5.9, 0.2), ("Cu", 0.2, 0.49, 0.01))
DEFAULT_SCINTILLATOR_RANGE = ("LuAG", 0.025, 0.095, 0.002)


def dictionary_from_ranges(source: SourceSpectrum, filter_lacs: dict, filter_ranges,
                           scint_lac, scint_range, energy_weighted: bool = True,
                           scint_material: str = "LuAG") -> Dictionary:
    """Dictionary over user-defined ``(material, start, stop, step)`` ranges."""
    filters = [
        filter_response(filter_lacs[material], t, material)
        for material, start, stop, step in filter_ranges
        for t in thickness_range(start, stop, step)
    ]
    detectors = [
        detector_response(scint_lac, t, energy_weighted, source.grid, scint_material)
        for t in thickness_range(*scint_range)
    ]
    return build_dictionary(source, filters, detectors)


def table2_default_dictionary(source: SourceSpectrum, al_lac, cu_lac, luag_lac,
                              energy_weighted: bool = True) -> Dictionary:
    """The 60 filter x 36 scintillator = 2160 atom dictionary.

    Aluminium 0.1-5.9 mm in 0.2 mm steps and copper 0.2-0.49 mm in 0.01 mm
    steps, crossed with Lu3Al5O12 scintillators of 0.025-0.095 mm in 0.002 mm
    steps.
    """
    return dictionary_from_ranges(
        source, {"Al": al_lac, "Cu": cu_lac}, DEFAULT_FILTER_RANGES,
        luag_lac, DEFAULT_SCINTILLATOR_RANGE[1:], energy_weighted, DEFAULT_SCINTILLATOR_RANGE[0],
    )


# -- CSV interfaces ---------------------------------------------------------

def write_dictionary_csv(dictionary: Dictionary, path) -> None:
    """One row per energy bin; one column per atom labelled by provenance."""
    grid = dictionary.grid
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo_keV", "bin_hi_keV", *(p.label() for p in dictionary.provenance)])
        for j in range(grid.n_bins):
            w.writerow([repr(float(grid.edges[j])), repr(float(grid.edges[j + 1])),
                        *(repr(float(v)) for v in dictionary.columns[j])])


def read_dictionary_csv(path) -> Dictionary:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["bin_lo_keV", "bin_hi_keV"] or len(header) < 3:
            raise CsvFormatError(f"{path}: expected bin_lo_keV,bin_hi_keV,<atoms...> header")
        try:
            data = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
        except ValueError:
            raise CsvFormatError(f"{path}: non-numeric value") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise CsvFormatError(f"{path}: ragged rows")
    edges = np.append(data[:, 0], data[-1, 1])
    if not np.array_equal(data[1:, 0], data[:-1, 1]):
        raise CsvFormatError(f"{path}: bins are not contiguous")
    provenance = [ColumnProvenance.parse(label) for label in header[2:]]
    return Dictionary(data[:, 2:], provenance, EnergyGrid(edges))


def read_source_csv(path, grid: EnergyGrid) -> SourceSpectrum:
    """Read ``energy_keV,intensity`` rows, one per grid bin.

    Row ``j`` must carry an energy inside bin ``j`` (edges inclusive), so
    either left edges or bin centers may be used as the energy column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["energy_keV", "intensity"]:
            raise CsvFormatError(f"{path}: expected header energy_keV,intensity")
        try:
            data = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
        except ValueError:
            raise CsvFormatError(f"{path}: non-numeric value") from None
    if data.shape != (grid.n_bins, 2):
        raise GridMismatch(f"{path}: expected {grid.n_bins} rows of 2 values")
    e = data[:, 0]
    if np.any(e < grid.edges[:-1]) or np.any(e > grid.edges[1:]):
        raise GridMismatch(f"{path}: energies do not line up with the grid bins")
    return SourceSpectrum(grid, data[:, 1])
