"""Transmission forward model for homogeneous objects.

The forward matrix maps a discretized, normalized spectrum ``x`` to
predicted transmissions, ``F[i, j] = exp(-sum_s mu_s(E_j) * L[i, s])``.
Measurements are weighted by ``1 / (y_i * M)`` in the data-fit loss.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    BrightDarkInversion,
    CsvFormatError,
    DimensionMismatch,
    NonPositiveRadius,
    SpectrumNotSimplex,
    UnknownMaterial,
)
from .materials import EnergyGrid, MaterialTable

logger = logging.getLogger(__name__)

Y_FLOOR = 1e-6
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class PathLengthMatrix:
    """Path length (mm) of each projection ray through each material.

    Attributes
    ----------
    materials : tuple of str
        Column labels.
    lengths : numpy.ndarray, shape (M, n_materials)
        Nonnegative path lengths. A row of zeros is an unattenuated ray.
    """

    materials: tuple
    lengths: np.ndarray

    def __post_init__(self):
        lengths = np.array(self.lengths, dtype=float)
        if lengths.ndim == 1:
            lengths = lengths[:, None]
        materials = tuple(str(m) for m in self.materials)
        if lengths.ndim != 2 or lengths.shape[1] != len(materials):
            raise DimensionMismatch(
                f"path lengths shape {lengths.shape} does not match {len(materials)} materials"
            )
        if len(set(materials)) != len(materials):
            raise ValueError("duplicate material columns")
        if np.any(lengths < 0) or not np.all(np.isfinite(lengths)):
            raise ValueError("path lengths must be finite and nonnegative")
        lengths.setflags(write=False)
        object.__setattr__(self, "materials", materials)
        object.__setattr__(self, "lengths", lengths)

    @property
    def n_projections(self) -> int:
        return self.lengths.shape[0]


@dataclass(frozen=True)
class ForwardMatrix:
    matrix: np.ndarray
    grid: EnergyGrid

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] != self.grid.n_bins:
            raise DimensionMismatch(
                f"forward matrix shape {matrix.shape} does not match {self.grid.n_bins} bins"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class TransmissionSet:
    """Normalized transmissions and their diagonal loss weights.

    Attributes
    ----------
    y : numpy.ndarray, shape (M,)
        Transmissions, clamped to ``[Y_FLOOR, 1]`` when built through
        :func:`make_transmission_set`.
    weights : numpy.ndarray, shape (M,)
        ``1 / (y_i * M)``.
    n_clamped : int
        Number of raw values that fell outside ``[Y_FLOOR, 1]``.
    """

    y: np.ndarray
    weights: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        w = np.array(self.weights, dtype=float)
        if y.ndim != 1 or w.shape != y.shape:
            raise DimensionMismatch("y and weights must be 1-D arrays of equal length")
        y.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.y.size


def transmission_weights(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return 1.0 / (y * y.size)


def make_transmission_set(y, y_floor: float = Y_FLOOR) -> TransmissionSet:
    """Clamp raw transmissions to ``[y_floor, 1]`` and attach weights."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise DimensionMismatch("transmissions must be a non-empty 1-D array")
    if not np.all(np.isfinite(y)):
        raise ValueError("transmissions must be finite")
    clamped = np.clip(y, y_floor, 1.0)
    n_clamped = int(np.count_nonzero(clamped != y))
    if n_clamped:
        logger.warning("clamped %d of %d transmissions to [%g, 1]", n_clamped, y.size, y_floor)
    return TransmissionSet(clamped, transmission_weights(clamped), n_clamped)


def cylinder_path_lengths(radius: float, detector_offsets, material: str) -> PathLengthMatrix:
    """Chord lengths of parallel rays through a centered cylinder.

    A ray at signed detector offset ``t`` crosses ``2 * sqrt(r**2 - t**2)``
    mm of material when ``|t| < r`` and misses the rod otherwise.
    """
    if not radius > 0:
        raise NonPositiveRadius(f"cylinder radius must be positive, got {radius}")
    t = np.atleast_1d(np.asarray(detector_offsets, dtype=float))
    lengths = np.where(np.abs(t) < radius, 2.0 * np.sqrt(np.maximum(radius**2 - t**2, 0.0)), 0.0)
    return PathLengthMatrix((material,), lengths[:, None])


def build_forward_matrix(paths: PathLengthMatrix, table: MaterialTable) -> ForwardMatrix:
    """Forward matrix ``F[i, j] = exp(-sum_s mu_s[j] * L[i, s])``."""
    missing = [m for m in paths.materials if m not in table]
    if missing:
        raise UnknownMaterial(f"materials not in table: {', '.join(missing)}")
    mu = np.stack([table[m] for m in paths.materials])  # (n_materials, N_e)
    optical_depth = paths.lengths @ mu
    # entries stay strictly positive even for opaque rays
    F = np.maximum(np.exp(-optical_depth), np.finfo(float).tiny)
    return ForwardMatrix(F, table.grid)


def check_simplex(x, tol: float = SIMPLEX_TOL, what: str = "spectrum") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise SpectrumNotSimplex(f"{what} must be a non-empty 1-D vector")
    if np.any(x < 0) or abs(x.sum() - 1.0) > tol or not np.all(np.isfinite(x)):
        raise SpectrumNotSimplex(
            f"{what} must be nonnegative and sum to 1 (sum={x.sum():.12g}, min={x.min():.3g})"
        )
    return x


def simulate_transmissions(F, x_true, noise_sd: float = 0.0, rng=None,
                           y_floor: float = Y_FLOOR) -> TransmissionSet:
    """Simulate ``y = F x + tau`` with relative Gaussian noise.

    The noise on measurement ``i`` has standard deviation
    ``noise_sd * (F x)_i``. With ``noise_sd == 0`` no random numbers are
    drawn and ``y`` equals ``F x`` exactly.
    """
    F = F.matrix if isinstance(F, ForwardMatrix) else np.asarray(F, dtype=float)
    x_true = check_simplex(x_true)
    if F.shape[1] != x_true.size:
        raise DimensionMismatch(f"F has {F.shape[1]} columns, spectrum has {x_true.size} bins")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    y = F @ x_true
    if noise_sd > 0:
        rng = np.random.default_rng(rng)
        y = y + noise_sd * y * rng.standard_normal(y.size)
    return make_transmission_set(y, y_floor)


def normalize_raw_scans(scan, bright, dark, y_floor: float = Y_FLOOR) -> TransmissionSet:
    """Bright/dark normalization ``(scan - dark) / (bright - dark)``."""
    scan, bright, dark = (np.asarray(v, dtype=float) for v in (scan, bright, dark))
    if not (scan.shape == bright.shape == dark.shape) or scan.ndim != 1:
        raise DimensionMismatch("scan, bright and dark must be 1-D and of equal length")
    if np.any(bright <= dark):
        raise BrightDarkInversion("bright intensity must exceed dark intensity everywhere")
    return make_transmission_set((scan - dark) / (bright - dark), y_floor)


def weighted_loss(v, F_eff, data: TransmissionSet) -> float:
    """Weighted data-fit loss ``0.5 * sum_i w_i (y_i - (F_eff v)_i)**2``."""
    F_eff = F_eff.matrix if isinstance(F_eff, ForwardMatrix) else np.asarray(F_eff)
    v = np.asarray(v, dtype=float)
    if F_eff.ndim != 2 or F_eff.shape[1] != v.size or F_eff.shape[0] != len(data):
        raise DimensionMismatch(
            f"cannot apply matrix {F_eff.shape} to vector ({v.size},) against {len(data)} data"
        )
    r = data.y - F_eff @ v
    return 0.5 * float(np.sum(data.weights * r * r))


def merge_duplicate_rows(paths: PathLengthMatrix, data: TransmissionSet):
    """Average measurements whose path-length rows are identical.

    Returns the reduced path matrix and a transmission set with weights
    recomputed for the smaller M. Row order follows first occurrence.
    """
    if paths.n_projections != len(data):
        raise DimensionMismatch("path rows and transmissions differ in length")
    _, first, inverse = np.unique(paths.lengths, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    groups = remap[inverse]
    counts = np.bincount(groups)
    y = np.bincount(groups, weights=data.y) / counts
    lengths = paths.lengths[np.sort(first)]
    return PathLengthMatrix(paths.materials, lengths), TransmissionSet(y, transmission_weights(y))


# -- CSV interfaces ---------------------------------------------------------

def _read_rows(path, expect_first: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if not header or header[0] != expect_first:
            raise CsvFormatError(f"{path}: first column must be '{expect_first}'")
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} columns")
    return header, rows


def _floats(path, rows, start_col):
    try:
        return np.array([[float(c) for c in row[start_col:]] for row in rows], dtype=float)
    except ValueError:
        raise CsvFormatError(f"{path}: non-numeric value") from None


def write_path_lengths_csv(paths: PathLengthMatrix, path, proj_ids=None) -> None:
    ids = range(paths.n_projections) if proj_ids is None else proj_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["proj_id", *paths.materials])
        for pid, row in zip(ids, paths.lengths):
            w.writerow([pid, *(repr(float(v)) for v in row)])


def read_path_lengths_csv(path) -> PathLengthMatrix:
    header, rows = _read_rows(path, "proj_id")
    if len(header) < 2:
        raise CsvFormatError(f"{path}: no material columns")
    lengths = _floats(path, rows, 1).reshape(len(rows), len(header) - 1)
    return PathLengthMatrix(tuple(header[1:]), lengths)


def write_transmissions_csv(data: TransmissionSet, path, proj_ids=None) -> None:
    ids = range(len(data)) if proj_ids is None else proj_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["proj_id", "y"])
        for pid, v in zip(ids, data.y):
            w.writerow([pid, repr(float(v))])


def read_transmissions_csv(path, y_floor: float = Y_FLOOR) -> TransmissionSet:
    """Read ``proj_id,y`` or raw ``proj_id,scan,bright,dark`` rows."""
    header, rows = _read_rows(path, "proj_id")
    values = _floats(path, rows, 1).reshape(len(rows), len(header) - 1)
    if header[1:] == ["y"]:
        return make_transmission_set(values[:, 0], y_floor)
    if header[1:] == ["scan", "bright", "dark"]:
        return normalize_raw_scans(values[:, 0], values[:, 1], values[:, 2], y_floor)
    raise CsvFormatError(f"{path}: expected columns proj_id,y or proj_id,scan,bright,dark")
