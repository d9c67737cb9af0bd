"""Energy grids and linear attenuation coefficient (LAC) data.

All energies are in keV and all LACs in mm^-1. Curves are supplied by the
user as two-column CSV files or generated from a toy parametric model; there
is no built-in attenuation database.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    CsvFormatError,
    DegenerateMaterial,
    DuplicateEnergy,
    ExtrapolationRequired,
    GridMismatch,
    NegativeAttenuation,
)

LAC_CSV_HEADER = ("energy_keV", "lac_per_mm")


@dataclass(frozen=True, eq=False)
class EnergyGrid:
    """Ordered, non-overlapping energy bins.

    Attributes
    ----------
    edges : numpy.ndarray, shape (N_e + 1,)
        Strictly increasing, positive bin edges in keV. The last edge is the
        maximum energy of the system.
    """

    edges: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 3:
            raise ValueError("an energy grid needs at least 2 bins (3 edges)")
        if not np.all(np.isfinite(edges)) or np.any(edges <= 0):
            raise ValueError("energy edges must be finite and positive")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("energy edges must be strictly increasing")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, e_min: float, e_max: float, n_bins: int) -> EnergyGrid:
        return cls(np.linspace(e_min, e_max, int(n_bins) + 1))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def e_max(self) -> float:
        return float(self.edges[-1])

    def __len__(self):
        return self.n_bins

    def __eq__(self, other):
        if not isinstance(other, EnergyGrid):
            return NotImplemented
        return self.edges.shape == other.edges.shape and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash(self.edges.tobytes())


@dataclass(frozen=True)
class AttenuationCurve:
    """Tabulated LAC samples for a single material."""

    material_id: str
    energies: np.ndarray
    lac: np.ndarray

    def __post_init__(self):
        energies = np.array(self.energies, dtype=float)
        lac = np.array(self.lac, dtype=float)
        if energies.shape != lac.shape or energies.ndim != 1:
            raise ValueError("energies and LAC values must be 1-D and of equal length")
        if energies.size < 2:
            raise ValueError("an attenuation curve needs at least 2 samples")
        if np.any(np.diff(energies) <= 0):
            raise ValueError("sample energies must be strictly increasing")
        if np.any(lac < 0):
            raise NegativeAttenuation(f"{self.material_id}: negative LAC value")
        energies.setflags(write=False)
        lac.setflags(write=False)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "lac", lac)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.lac.tolist()))


@dataclass(frozen=True)
class MaterialTable:
    """Per-bin LAC vectors for a set of materials on a shared grid."""

    grid: EnergyGrid
    entries: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        entries = {}
        for name, values in dict(self.entries).items():
            values = np.array(values, dtype=float)
            if values.shape != (self.grid.n_bins,):
                raise GridMismatch(
                    f"{name}: LAC vector has shape {values.shape}, expected ({self.grid.n_bins},)"
                )
            if np.any(values < 0):
                raise NegativeAttenuation(f"{name}: negative LAC value")
            values.setflags(write=False)
            entries[str(name)] = values
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, material_id: str) -> np.ndarray:
        return self.entries[material_id]

    def __contains__(self, material_id) -> bool:
        return material_id in self.entries

    @property
    def materials(self) -> list[str]:
        return list(self.entries)

    def with_material(self, material_id: str, values) -> MaterialTable:
        entries = dict(self.entries)
        entries[material_id] = values
        return MaterialTable(self.grid, entries)


def load_attenuation_csv(path, material_id: str | None = None) -> AttenuationCurve:
    """Read a ``energy_keV,lac_per_mm`` CSV file into an attenuation curve.

    Rows are sorted by energy. Duplicate energies, malformed rows and negative
    LAC values are rejected. The material id defaults to the file stem.
    """
    path = Path(path)
    if material_id is None:
        material_id = path.stem
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != LAC_CSV_HEADER:
            raise CsvFormatError(f"{path}: expected header {','.join(LAC_CSV_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise CsvFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: need at least 2 data rows")
    data = np.array(sorted(rows), dtype=float)
    if not np.all(np.isfinite(data)):
        raise CsvFormatError(f"{path}: non-finite value")
    if np.any(data[:, 1] < 0):
        raise NegativeAttenuation(f"{path}: negative LAC value")
    if np.any(np.diff(data[:, 0]) == 0):
        raise DuplicateEnergy(f"{path}: duplicate energy rows")
    return AttenuationCurve(material_id, data[:, 0], data[:, 1])


def interpolate_to_grid(curve: AttenuationCurve, grid: EnergyGrid) -> np.ndarray:
    """Evaluate a tabulated curve at the bin centers of ``grid``.

    Interpolation is linear in log(energy)/log(LAC). A segment with a zero
    LAC at either end is interpolated linearly instead.
    """
    centers = grid.centers
    e, mu = curve.energies, curve.lac
    if centers[0] < e[0] or centers[-1] > e[-1]:
        raise ExtrapolationRequired(
            f"{curve.material_id}: bin centers [{centers[0]:g}, {centers[-1]:g}] keV "
            f"outside sampled range [{e[0]:g}, {e[-1]:g}] keV"
        )
    hi = np.clip(np.searchsorted(e, centers, side="right"), 1, e.size - 1)
    lo = hi - 1
    e0, e1, m0, m1 = e[lo], e[hi], mu[lo], mu[hi]

    out = np.empty_like(centers)
    loglog = (m0 > 0) & (m1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_log = np.log(centers / e0) / np.log(e1 / e0)
        out[loglog] = np.exp(
            np.log(m0[loglog]) + t_log[loglog] * np.log(m1[loglog] / m0[loglog])
        )
    t_lin = (centers - e0) / (e1 - e0)
    lin = ~loglog
    out[lin] = m0[lin] + t_lin[lin] * (m1[lin] - m0[lin])

    # exact at tabulated energies
    at_lo = centers == e0
    at_hi = centers == e1
    out[at_lo] = m0[at_lo]
    out[at_hi] = m1[at_hi]
    return np.clip(out, np.minimum(m0, m1), np.maximum(m0, m1))


def synthetic_lac(a: float, b: float, grid: EnergyGrid) -> np.ndarray:
    """Toy attenuation model ``a * E**-3 + b`` evaluated at bin centers.

    ``a`` (keV^3 mm^-1) mimics photoelectric absorption and ``b`` (mm^-1) a
    flat Compton floor.
    """
    if a < 0 or b < 0:
        raise ValueError("synthetic LAC parameters must be nonnegative")
    if a == 0 and b == 0:
        raise DegenerateMaterial("synthetic LAC with a = b = 0 has no attenuation")
    return a * grid.centers ** -3.0 + b


def build_material_table(grid: EnergyGrid, sources: Mapping[str, object]) -> MaterialTable:
    """Build a table from a mapping of material id to curve or LAC vector."""
    entries = {}
    for name, src in sources.items():
        if isinstance(src, AttenuationCurve):
            entries[name] = interpolate_to_grid(src, grid)
        else:
            entries[name] = np.asarray(src, dtype=float)
    return MaterialTable(grid, entries)
