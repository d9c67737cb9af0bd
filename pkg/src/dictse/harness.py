"""Synthetic data generation, pooled fits and leave-one-out cross-validation."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, find_atom
from .dictionary import Dictionary
from .errors import CsvFormatError, GridMismatch, SpectrumEstimationError
from .materials import EnergyGrid, MaterialTable
from .physics import (
    ForwardMatrix,
    PathLengthMatrix,
    TransmissionSet,
    build_forward_matrix,
    check_simplex,
    cylinder_path_lengths,
    merge_duplicate_rows,
    read_path_lengths_csv,
    read_transmissions_csv,
    simulate_transmissions,
    transmission_weights,
    write_path_lengths_csv,
    write_transmissions_csv,
)
from .solver import (
    SolverConfig,
    dictse_solve,
    effective_matrix,
    lsse_solve,
    spectrum_from_coefficients,
)

logger = logging.getLogger(__name__)

PATHS_FILE = "paths.csv"
TRANSMISSION_FILE = "transmission.csv"
TRUTH_FILE = "truth_spectrum.csv"
REPORT_HEADER = ("case", "fit", "test", "nrmse_dictse", "nrmse_lsse", "status")


@dataclass(frozen=True)
class Dataset:
    """Measurements of one object together with its forward matrix."""

    name: str
    paths: PathLengthMatrix
    forward: ForwardMatrix
    data: TransmissionSet


@dataclass(frozen=True)
class CaseResult:
    case: int
    fit: tuple
    test: str
    nrmse_dictse: float
    nrmse_lsse: float
    status: str = "ok"
    x_dictse: Optional[np.ndarray] = None
    x_lsse: Optional[np.ndarray] = None


@dataclass(frozen=True)
class CrossValReport:
    cases: tuple

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for c in self.cases:
                w.writerow([c.case, "+".join(c.fit), c.test, repr(float(c.nrmse_dictse)),
                            repr(float(c.nrmse_lsse)), c.status])

    def mean_nrmse(self, method: str) -> float:
        return float(np.mean([getattr(c, f"nrmse_{method}") for c in self.cases]))


# -- spectra ------------------------------------------------------------------

def emit_spectrum_csv(x, grid: EnergyGrid, path) -> None:
    """Write ``bin_lo_keV,bin_hi_keV,weight`` rows with round-trip precision."""
    x = check_simplex(x)
    if x.size != grid.n_bins:
        raise GridMismatch(f"spectrum has {x.size} bins, grid has {grid.n_bins}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo_keV", "bin_hi_keV", "weight"])
        for lo, hi, v in zip(grid.edges[:-1], grid.edges[1:], x):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(v))])


def read_spectrum_csv(path, grid: EnergyGrid | None = None) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["bin_lo_keV", "bin_hi_keV", "weight"]:
            raise CsvFormatError(f"{path}: expected header bin_lo_keV,bin_hi_keV,weight")
        try:
            data = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
        except ValueError:
            raise CsvFormatError(f"{path}: non-numeric value") from None
    if grid is not None:
        edges = np.append(data[:, 0], data[-1, 1]) if data.size else np.empty(0)
        if edges.shape != grid.edges.shape or not np.allclose(edges, grid.edges, rtol=1e-12, atol=0):
            raise GridMismatch(f"{path}: bins do not match the configured grid")
    return data[:, 2]


def truth_spectrum(config: ExperimentConfig, dictionary: Dictionary | None = None) -> np.ndarray:
    if config.truth.path is not None:
        return check_simplex(read_spectrum_csv(config.truth.path, config.energy_grid()))
    if dictionary is None:
        dictionary = config.build_dictionary()
    idx = [find_atom(dictionary, label) for label in config.truth.atoms]
    w = np.asarray(config.truth.weights, dtype=float)
    return check_simplex(dictionary.columns[:, idx] @ (w / w.sum()))


# -- datasets -----------------------------------------------------------------

def generate_synthetic_dataset(config: ExperimentConfig, x_true, out_dir=None,
                               table: MaterialTable | None = None) -> list:
    """Simulate one rod dataset per configured material.

    All noise comes from a single generator seeded with ``config.seed`` and
    consumed in rod order. When ``out_dir`` is given each dataset is written
    to ``<out_dir>/datasets/<material>/`` and ``x_true`` to
    ``<out_dir>/truth_spectrum.csv``.
    """
    table = table or config.material_table()
    x_true = check_simplex(x_true)
    rng = np.random.default_rng(config.seed)
    datasets = []
    for rod in config.rods:
        paths = cylinder_path_lengths(rod.radius, rod.detector_offsets(), rod.material)
        forward = build_forward_matrix(paths, table)
        data = simulate_transmissions(forward, x_true, config.noise_sd, rng)
        datasets.append(Dataset(rod.material, paths, forward, data))
    if out_dir is not None:
        out_dir = Path(out_dir)
        for ds in datasets:
            d = out_dir / "datasets" / ds.name
            d.mkdir(parents=True, exist_ok=True)
            write_path_lengths_csv(ds.paths, d / PATHS_FILE)
            write_transmissions_csv(ds.data, d / TRANSMISSION_FILE)
        emit_spectrum_csv(x_true, table.grid, out_dir / TRUTH_FILE)
    return datasets


def load_datasets(root, table: MaterialTable, names: Sequence[str] | None = None,
                  dedup: bool = False) -> list:
    """Load ``<root>/datasets/<name>/`` directories (sorted unless ``names`` given)."""
    base = Path(root) / "datasets"
    if names is None:
        names = sorted(p.name for p in base.iterdir() if p.is_dir()) if base.is_dir() else []
    datasets = []
    for name in names:
        paths = read_path_lengths_csv(base / name / PATHS_FILE)
        data = read_transmissions_csv(base / name / TRANSMISSION_FILE)
        if paths.n_projections != len(data):
            raise CsvFormatError(f"{name}: path and transmission files differ in length")
        if dedup:
            paths, data = merge_duplicate_rows(paths, data)
        datasets.append(Dataset(name, paths, build_forward_matrix(paths, table), data))
    return datasets


def stack_datasets(datasets: Sequence[Dataset]):
    """Row-concatenate forward matrices and transmissions.

    Weights are recomputed as ``1 / (y_i * M_total)`` over the pooled rows.
    """
    if not datasets:
        raise ValueError("nothing to stack")
    grid = datasets[0].forward.grid
    if any(ds.forward.grid != grid for ds in datasets):
        raise GridMismatch("datasets use different energy grids")
    F = np.vstack([ds.forward.matrix for ds in datasets])
    y = np.concatenate([ds.data.y for ds in datasets])
    n_clamped = sum(ds.data.n_clamped for ds in datasets)
    return ForwardMatrix(F, grid), TransmissionSet(y, transmission_weights(y), n_clamped)


def nrmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.linalg.norm(y - np.asarray(y_hat)) / np.linalg.norm(y))


# -- estimation ----------------------------------------------------------------

def fit_dictse(forward: ForwardMatrix, data: TransmissionSet, dictionary: Dictionary,
               solver: SolverConfig):
    FD = effective_matrix(forward, dictionary)
    coeffs, trace = dictse_solve(FD, data, solver)
    return spectrum_from_coefficients(coeffs, dictionary), coeffs, trace


def lsse_initial(config: ExperimentConfig, x_true=None) -> np.ndarray:
    n = config.grid.n_bins
    init = config.lsse.init
    if init == "uniform":
        return np.full(n, 1.0 / n)
    if init == "truth":
        if x_true is None:
            raise SpectrumEstimationError("lsse.init = 'truth' needs a ground-truth spectrum")
        return np.asarray(x_true, dtype=float)
    return read_spectrum_csv(Path(init), config.energy_grid())


def run_crossval(datasets: Sequence[Dataset], dictionary: Dictionary, solver: SolverConfig,
                 lsse_init, lsse_iterations: int = 500, out_dir=None) -> CrossValReport:
    """Leave-one-object-out evaluation of the dictionary and per-bin fits.

    For each held-out dataset both methods are fitted on the stacked
    remaining datasets and scored by NRMSE of the held-out transmissions.
    A method that raises marks its case FAILED with a NaN score; the sweep
    continues. With ``out_dir`` the report and per-case spectra, traces and
    coefficients are written under it.
    """
    if len(datasets) < 2:
        raise ValueError("cross-validation needs at least two datasets")
    out_dir = Path(out_dir) if out_dir is not None else None
    cases = []
    for i, held in enumerate(datasets):
        case_id = i + 1
        fit_sets = [ds for ds in datasets if ds is not held]
        F_fit, y_fit = stack_datasets(fit_sets)
        status = []
        x_d = x_l = None
        trace = coeffs = None
        try:
            x_d, coeffs, trace = fit_dictse(F_fit, y_fit, dictionary, solver)
            err_d = nrmse(held.data.y, held.forward.matrix @ x_d)
        except (SpectrumEstimationError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("case %d dictse failed: %s", case_id, exc)
            status.append("dictse")
            err_d = math.nan
        try:
            x_l = lsse_solve(F_fit, y_fit, lsse_init, lsse_iterations)
            err_l = nrmse(held.data.y, held.forward.matrix @ x_l)
        except (SpectrumEstimationError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("case %d lsse failed: %s", case_id, exc)
            status.append("lsse")
            err_l = math.nan
        result = CaseResult(case_id, tuple(ds.name for ds in fit_sets), held.name, err_d, err_l,
                            "FAILED:" + "+".join(status) if status else "ok", x_d, x_l)
        cases.append(result)
        if out_dir is not None:
            case_dir = out_dir / f"case_{case_id}_{held.name}"
            case_dir.mkdir(parents=True, exist_ok=True)
            grid = held.forward.grid
            if x_d is not None:
                emit_spectrum_csv(x_d, grid, case_dir / "dictse_spectrum.csv")
                trace.write_csv(case_dir / "dictse_trace.csv")
                write_coefficients_csv(coeffs, dictionary, case_dir / "dictse_coefficients.csv")
            if x_l is not None:
                emit_spectrum_csv(x_l, grid, case_dir / "lsse_spectrum.csv")
    report = CrossValReport(tuple(cases))
    if out_dir is not None:
        report.write_csv(out_dir / "report.csv")
    return report


def write_coefficients_csv(coeffs, dictionary: Dictionary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom", "provenance", "weight"])
        for k in coeffs.support:
            w.writerow([k, dictionary.provenance[k].label(), repr(float(coeffs.omega[k]))])
