"""File formats: model artifacts, CSV spectra, ROI files, run records, configs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .correction import SceneNormalization
from .errors import ConfigError, ParseError
from .ode import SolverConfig
from .training import TrainConfig, TrainRun
from .transmission import LinearProfile, NonlinearProfile, Profile
from .types import DatasetSplit, Spectrum, Unit, WavelengthGrid

MODEL_FORMAT = "dinsat-model"
MODEL_VERSION = 1


# -- model artifacts ---------------------------------------------------------

def write_model(
    path: str | Path,
    model: Profile,
    solver: SolverConfig = SolverConfig(),
    grid: Optional[WavelengthGrid] = None,
) -> None:
    """JSON artifact: header plus the flat parameter vector, exact round trip."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "n_bands": model.n_bands,
        "solver": asdict(solver),
        "wavelengths_nm": None if grid is None else [float(w) for w in grid.wavelengths_nm],
        "params": [float(p) for p in model.params],
    }
    if model.kind == "nonlinear":
        doc["hidden"] = model.hidden
        doc["latent"] = model.latent
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_model(path: str | Path) -> tuple[Profile, SolverConfig, Optional[WavelengthGrid]]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read model artifact {path}: {e}") from e
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"{path} is not a model artifact")
    params = np.array(doc["params"], dtype=float)
    kind = doc.get("kind")
    if kind == "linear":
        model: Profile = LinearProfile(params)
    elif kind == "nonlinear":
        model = NonlinearProfile(
            params, int(doc["n_bands"]), int(doc.get("hidden", 12)), int(doc.get("latent", 3))
        )
    else:
        raise ParseError(f"{path}: unknown model kind {kind!r}")
    solver = SolverConfig(**doc["solver"])
    wl = doc.get("wavelengths_nm")
    grid = WavelengthGrid(np.array(wl, float)) if wl else None
    return model, solver, grid


# -- CSV spectra -------------------------------------------------------------

def write_spectrum_csv(path: str | Path, grid: WavelengthGrid, spectrum: Spectrum) -> None:
    if spectrum.n_bands != grid.n_bands:
        raise ParseError("spectrum length does not match wavelength grid")
    lines = ["wavelength_nm,value"]
    for wl, v in zip(grid.wavelengths_nm, spectrum.values):
        lines.append(f"{float(wl)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path: str | Path, unit: Unit = "unitless") -> tuple[WavelengthGrid, Spectrum]:
    """Two-column CSV (wavelength_nm, value) with one header line."""
    path = Path(path)
    try:
        raw_lines = path.read_text().splitlines()
    except OSError as e:
        raise ParseError(f"cannot read spectrum {path}: {e}") from e
    if not raw_lines:
        raise ParseError(f"{path}: empty spectrum file")
    wavelengths, values = [], []
    for lineno, line in enumerate(raw_lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(fields)}")
        try:
            wavelengths.append(float(fields[0]))
            values.append(float(fields[1]))
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from e
    if len(values) < 2:
        raise ParseError(f"{path}: need at least 2 bands")
    if np.any(np.diff(wavelengths) <= 0):
        raise ParseError(f"{path}: wavelengths must be strictly increasing")
    return WavelengthGrid(np.array(wavelengths)), Spectrum(np.array(values), unit)


# -- ROI files ---------------------------------------------------------------

@dataclass(frozen=True)
class RoiFile:
    """Named pixel regions with optional per-region reference spectrum paths."""

    regions: dict[str, tuple[tuple[int, int], ...]]
    references: dict[str, Path] = field(default_factory=dict)


def read_roi(
    path: str | Path, rows: Optional[int] = None, cols: Optional[int] = None
) -> RoiFile:
    """CSV rows: region_name,row,col[,reference_csv_path]."""
    path = Path(path)
    try:
        raw_lines = path.read_text().splitlines()
    except OSError as e:
        raise ParseError(f"cannot read ROI file {path}: {e}") from e
    regions: dict[str, list[tuple[int, int]]] = {}
    references: dict[str, Path] = {}
    for lineno, line in enumerate(raw_lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.lower().replace(" ", "").startswith("region_name,row,col"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) not in (3, 4):
            raise ParseError(f"{path}:{lineno}: expected 3 or 4 columns")
        name = fields[0]
        try:
            r, c = int(fields[1]), int(fields[2])
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from e
        if rows is not None and not (0 <= r < rows and 0 <= c < cols):
            raise ParseError(f"{path}:{lineno}: pixel ({r},{c}) outside cube bounds")
        regions.setdefault(name, []).append((r, c))
        if len(fields) == 4 and fields[3]:
            ref = Path(fields[3])
            if not ref.is_absolute():
                ref = path.parent / ref
            previous = references.get(name)
            if previous is not None and previous != ref:
                raise ParseError(f"{path}:{lineno}: conflicting reference for region {name!r}")
            references[name] = ref
    if not regions:
        raise ParseError(f"{path}: no regions defined")
    return RoiFile({k: tuple(v) for k, v in regions.items()}, references)


# -- flat key = value configs ------------------------------------------------

def read_kv_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        raw_lines = path.read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    out: dict[str, str] = {}
    for lineno, line in enumerate(raw_lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


# -- normalization and run records -------------------------------------------

def write_normalization(path: str | Path, norm: SceneNormalization) -> None:
    doc = {"c": [float(v) for v in norm.c], "m": float(norm.m)}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def read_normalization(path: str | Path) -> SceneNormalization:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read normalization {path}: {e}") from e
    return SceneNormalization(np.array(doc["c"], float), float(doc["m"]))


def write_run_record(
    path: str | Path,
    run: TrainRun,
    transmittance: Optional[np.ndarray] = None,
    roi_reflectance: Optional[np.ndarray] = None,
) -> None:
    config = asdict(run.config)
    config["solver"] = asdict(run.config.solver)
    doc = {
        "config": config,
        "split": {"train": list(run.split.train), "val": list(run.split.val), "test": list(run.split.test)},
        "history": run.history,
        "converged": run.converged,
        "epochs": run.epochs,
        "wall_time_s": run.wall_time,
        "transmittance": None if transmittance is None else [float(v) for v in transmittance],
        "roi_reflectance": None if roi_reflectance is None else [float(v) for v in roi_reflectance],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_run_record(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read run record {path}: {e}") from e


# -- synthetic truth sidecar -------------------------------------------------

def write_truth_sidecar(
    path: str | Path,
    grid: WavelengthGrid,
    alpha: np.ndarray,
    norm: SceneNormalization,
    sampled_rho: dict[tuple[int, int], np.ndarray],
) -> None:
    """CSV with per-band truth: alpha, dark offset, m, and sampled reflectance."""
    pixel_keys = sorted(sampled_rho)
    header = ["wavelength_nm", "alpha_true", "c", "m"] + [
        f"rho_{r}_{c}" for r, c in pixel_keys
    ]
    lines = [",".join(header)]
    for i, wl in enumerate(grid.wavelengths_nm):
        row = [repr(float(wl)), repr(float(alpha[i])), repr(float(norm.c[i])), repr(float(norm.m))]
        row += [repr(float(sampled_rho[k][i])) for k in pixel_keys]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_truth_sidecar(path: str | Path) -> dict:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ParseError(f"{path}: truth sidecar is empty")
    header = lines[0].split(",")
    table = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    cols = {name: table[:, i] for i, name in enumerate(header)}
    rho = {
        name: cols[name] for name in header if name.startswith("rho_")
    }
    return {
        "grid": WavelengthGrid(cols["wavelength_nm"]),
        "alpha": cols["alpha_true"],
        "norm": SceneNormalization(cols["c"], float(cols["m"][0])),
        "rho": rho,
    }
