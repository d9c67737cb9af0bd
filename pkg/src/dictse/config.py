"""Experiment configuration loaded from TOML.

See ``configs/synthetic.toml`` for a fully commented example; every key
is optional and falls back to the defaults below, which describe a desk
scale synthetic version of a four-rod calibration experiment.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dictionary import (
    DEFAULT_FILTER_RANGES,
    DEFAULT_SCINTILLATOR_RANGE,
    ColumnProvenance,
    Dictionary,
    SourceSpectrum,
    dictionary_from_ranges,
    read_dictionary_csv,
    read_source_csv,
)
from .errors import ConfigError
from .materials import EnergyGrid, MaterialTable, interpolate_to_grid, load_attenuation_csv, synthetic_lac
from .solver import SolverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class GridSpec:
    e_min: float = 10.0
    e_max: float = 100.0
    n_bins: int = 100

    def build(self) -> EnergyGrid:
        return EnergyGrid.uniform(self.e_min, self.e_max, self.n_bins)


@dataclass(frozen=True)
class MaterialSpec:
    """Either a toy ``a * E**-3 + b`` curve or a LAC CSV file."""

    a: float = 0.0
    b: float = 0.0
    csv: Optional[Path] = None


@dataclass(frozen=True)
class RodSpec:
    material: str
    radius: float = 1.0
    n_offsets: int = 64
    offsets: Optional[tuple] = None

    def detector_offsets(self) -> np.ndarray:
        if self.offsets is not None:
            return np.asarray(self.offsets, dtype=float)
        # one ray per distinct chord; the rod is symmetric about its axis
        return np.linspace(0.0, self.radius, int(self.n_offsets), endpoint=False)


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "hump"  # hump | flat | csv
    peak_keV: float = 30.0
    path: Optional[Path] = None


@dataclass(frozen=True)
class RangeSpec:
    material: str
    start: float
    stop: float
    step: float


@dataclass(frozen=True)
class DictionarySpec:
    filters: tuple = tuple(RangeSpec(*r) for r in DEFAULT_FILTER_RANGES)
    scintillator: RangeSpec = RangeSpec(*DEFAULT_SCINTILLATOR_RANGE)
    energy_weighted: bool = True
    path: Optional[Path] = None


@dataclass(frozen=True)
class TruthSpec:
    """Ground-truth spectrum for simulation: dictionary atoms or a CSV file.

    Atoms are given by provenance label ``material:filter_mm:scint_mm``.
    """

    atoms: tuple = ("Al:0.1:0.025", "Al:3.1:0.061", "Cu:0.49:0.095")
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    path: Optional[Path] = None


@dataclass(frozen=True)
class LsseSpec:
    iterations: int = 500
    init: str = "uniform"  # uniform | truth | path to a spectrum CSV


DEFAULT_MATERIALS = {
    # rods
    "Ti": MaterialSpec(57000.0, 0.07),
    "V": MaterialSpec(86000.0, 0.09),
    "Al": MaterialSpec(7000.0, 0.04),
    "Mg": MaterialSpec(3700.0, 0.025),
    # dictionary filters and scintillator
    "Cu": MaterialSpec(240000.0, 0.1),
    "LuAG": MaterialSpec(300000.0, 1.0),
}

DEFAULT_RODS = (
    RodSpec("Ti", 1.0),
    RodSpec("V", 0.75),
    RodSpec("Al", 2.0),
    RodSpec("Mg", 3.0),
)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = GridSpec()
    materials: dict = field(default_factory=lambda: dict(DEFAULT_MATERIALS))
    rods: tuple = DEFAULT_RODS
    noise_sd: float = 0.0
    seed: int = 0
    dedup: bool = False
    source: SourceSpec = SourceSpec()
    dictionary: DictionarySpec = DictionarySpec()
    truth: TruthSpec = TruthSpec()
    solver: SolverConfig = SolverConfig()
    lsse: LsseSpec = LsseSpec()
    output_dir: Path = Path("out")

    def validate(self) -> ExperimentConfig:
        if self.grid.n_bins < 2:
            raise ConfigError("grid.n_bins must be >= 2")
        if not 0 < self.grid.e_min < self.grid.e_max:
            raise ConfigError("grid needs 0 < e_min < e_max")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")
        for name, spec in self.materials.items():
            if spec.csv is not None:
                if not Path(spec.csv).is_file():
                    raise ConfigError(f"material {name}: file {spec.csv} not found")
            elif spec.a < 0 or spec.b < 0 or (spec.a == 0 and spec.b == 0):
                raise ConfigError(f"material {name}: need a, b >= 0 and not both zero")
        rod_names = [r.material for r in self.rods]
        if len(set(rod_names)) != len(rod_names):
            raise ConfigError("each rod material may appear only once")
        for rod in self.rods:
            if rod.material not in self.materials:
                raise ConfigError(f"rod material {rod.material} is not defined")
            if rod.radius <= 0:
                raise ConfigError(f"rod {rod.material}: radius must be positive")
            if rod.offsets is None and rod.n_offsets < 1:
                raise ConfigError(f"rod {rod.material}: n_offsets must be >= 1")
        d = self.dictionary
        if d.path is not None:
            if not Path(d.path).is_file():
                raise ConfigError(f"dictionary file {d.path} not found")
        else:
            for r in (*d.filters, d.scintillator):
                if r.material not in self.materials:
                    raise ConfigError(f"dictionary material {r.material} is not defined")
                if not (0 <= r.start <= r.stop and r.step > 0):
                    raise ConfigError(f"range for {r.material} needs 0 <= start <= stop and step > 0")
            if d.scintillator.start <= 0:
                raise ConfigError("scintillator thicknesses must be positive")
        if self.source.kind not in ("hump", "flat", "csv"):
            raise ConfigError(f"unknown source kind {self.source.kind!r}")
        if self.source.kind == "csv" and (self.source.path is None or not Path(self.source.path).is_file()):
            raise ConfigError("source.path must name an existing file")
        if self.truth.path is not None:
            if not Path(self.truth.path).is_file():
                raise ConfigError(f"truth file {self.truth.path} not found")
        elif len(self.truth.atoms) != len(self.truth.weights) or not self.truth.atoms:
            raise ConfigError("truth.atoms and truth.weights must be non-empty and of equal length")
        if self.lsse.iterations < 0:
            raise ConfigError("lsse.iterations must be >= 0")
        return self

    # -- derived objects ----------------------------------------------------

    def energy_grid(self) -> EnergyGrid:
        return self.grid.build()

    def material_table(self) -> MaterialTable:
        grid = self.energy_grid()
        entries = {}
        for name, spec in self.materials.items():
            if spec.csv is not None:
                entries[name] = interpolate_to_grid(load_attenuation_csv(spec.csv, name), grid)
            else:
                entries[name] = synthetic_lac(spec.a, spec.b, grid)
        return MaterialTable(grid, entries)

    def source_spectrum(self) -> SourceSpectrum:
        grid = self.energy_grid()
        if self.source.kind == "flat":
            return SourceSpectrum.flat(grid)
        if self.source.kind == "csv":
            return read_source_csv(self.source.path, grid)
        return SourceSpectrum.hump(grid, self.source.peak_keV)

    def build_dictionary(self, table: MaterialTable | None = None) -> Dictionary:
        d = self.dictionary
        if d.path is not None:
            dictionary = read_dictionary_csv(d.path)
            if dictionary.grid != self.energy_grid():
                raise ConfigError("dictionary file grid does not match the configured grid")
            return dictionary
        table = table or self.material_table()
        return dictionary_from_ranges(
            self.source_spectrum(),
            {r.material: table[r.material] for r in d.filters},
            [(r.material, r.start, r.stop, r.step) for r in d.filters],
            table[d.scintillator.material],
            (d.scintillator.start, d.scintillator.stop, d.scintillator.step),
            d.energy_weighted,
            d.scintillator.material,
        )


def find_atom(dictionary: Dictionary, label: str) -> int:
    """Index of the atom whose provenance matches ``label``."""
    want = ColumnProvenance.parse(label)
    for k, p in enumerate(dictionary.provenance):
        if (p.filter_material == want.filter_material
                and np.isclose(p.filter_thickness, want.filter_thickness, rtol=0, atol=1e-9)
                and np.isclose(p.scint_thickness, want.scint_thickness, rtol=0, atol=1e-9)):
            return k
    raise ConfigError(f"no dictionary atom matches {label!r}")


# -- TOML parsing -------------------------------------------------------------

def _path(value, base: Path) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _pick(cls, raw: dict, section: str, **overrides):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {k: v for k, v in raw.items() if k in known}
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def config_from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    base = Path(base_dir)
    raw = dict(raw)
    top = {}
    for key in ("noise_sd", "seed", "dedup"):
        if key in raw:
            top[key] = raw.pop(key)
    if "output_dir" in raw:
        top["output_dir"] = _path(raw.pop("output_dir"), base)

    if "grid" in raw:
        top["grid"] = _pick(GridSpec, raw.pop("grid"), "grid")
    if "materials" in raw:
        mats = {}
        for name, spec in raw.pop("materials").items():
            spec = dict(spec)
            mats[name] = _pick(MaterialSpec, spec, f"materials.{name}",
                               csv=_path(spec.get("csv"), base))
        top["materials"] = mats
    if "rods" in raw:
        rods = []
        for i, spec in enumerate(raw.pop("rods")):
            spec = dict(spec)
            offsets = tuple(spec["offsets"]) if "offsets" in spec else None
            rods.append(_pick(RodSpec, spec, f"rods[{i}]", offsets=offsets))
        top["rods"] = tuple(rods)
    if "source" in raw:
        spec = dict(raw.pop("source"))
        top["source"] = _pick(SourceSpec, spec, "source", path=_path(spec.get("path"), base))
    if "dictionary" in raw:
        spec = dict(raw.pop("dictionary"))
        overrides = {"path": _path(spec.get("path"), base)}
        if "filters" in spec:
            overrides["filters"] = tuple(_pick(RangeSpec, f, "dictionary.filters") for f in spec["filters"])
        if "scintillator" in spec:
            overrides["scintillator"] = _pick(RangeSpec, spec["scintillator"], "dictionary.scintillator")
        top["dictionary"] = _pick(DictionarySpec, spec, "dictionary", **overrides)
    if "truth" in raw:
        spec = dict(raw.pop("truth"))
        overrides = {"path": _path(spec.get("path"), base)}
        if "atoms" in spec:
            overrides["atoms"] = tuple(spec["atoms"])
        if "weights" in spec:
            overrides["weights"] = tuple(float(w) for w in spec["weights"])
        top["truth"] = _pick(TruthSpec, spec, "truth", **overrides)
    if "solver" in raw:
        top["solver"] = _pick(SolverConfig, raw.pop("solver"), "solver")
    if "lsse" in raw:
        top["lsse"] = _pick(LsseSpec, raw.pop("lsse"), "lsse")
    if raw:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(raw))}")
    return ExperimentConfig(**top)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent).validate()


def with_overrides(config: ExperimentConfig, seed=None, output_dir=None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if output_dir is not None:
        changes["output_dir"] = Path(output_dir)
    return replace(config, **changes)

