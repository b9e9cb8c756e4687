"""ENVI header/data pair reader and writer (BSQ, BIL, BIP)."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    CorruptFileError,
    ParseError,
    UnsupportedFormatError,
)
from .types import HyperCube, WavelengthGrid

log = logging.getLogger(__name__)

INTERLEAVES = ("bsq", "bil", "bip")

# ENVI data type code -> numpy dtype character (endianness applied separately).
DTYPE_CODES = {4: "f4", 5: "f8", 12: "u2"}
DTYPE_TO_CODE = {np.dtype("float32"): 4, np.dtype("float64"): 5, np.dtype("uint16"): 12}

DEFAULT_WL_START = 450.0
DEFAULT_WL_END = 2500.0


@dataclass
class EnviHeader:
    samples: int
    lines: int
    bands: int
    interleave: str
    data_type: int
    byte_order: int = 0
    header_offset: int = 0
    wavelengths_nm: Optional[np.ndarray] = None
    data_gain: Optional[np.ndarray] = None
    data_offset: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.samples, self.lines, self.bands) < 1:
            raise ParseError("header dimensions must be positive")
        if self.interleave not in INTERLEAVES:
            raise UnsupportedFormatError(f"unknown interleave: {self.interleave!r}")
        if self.data_type not in DTYPE_CODES:
            raise UnsupportedFormatError(
                f"unsupported ENVI data type {self.data_type}; supported: 4, 5, 12"
            )
        if self.byte_order not in (0, 1):
            raise ParseError(f"byte order must be 0 or 1, got {self.byte_order}")
        if self.wavelengths_nm is not None and len(self.wavelengths_nm) != self.bands:
            raise ParseError(
                f"wavelength list has {len(self.wavelengths_nm)} entries for "
                f"{self.bands} bands"
            )

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(("<" if self.byte_order == 0 else ">") + DTYPE_CODES[self.data_type])


def _parse_header_text(text: str) -> dict:
    entries: dict[str, str] = {}
    lines = text.splitlines()
    if lines and lines[0].strip().upper() != "ENVI":
        raise ParseError("missing ENVI magic on header line 1")
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith(";"):
            continue
        if "=" not in line:
            raise ParseError(f"malformed header line {i}: {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if value.startswith("{"):
            while "}" not in value and i < len(lines):
                value += " " + lines[i].strip()
                i += 1
            if "}" not in value:
                raise ParseError(f"unterminated brace list for header key {key!r}")
            value = value.strip("{}").strip()
        entries[key] = value
    return entries


def _float_list(raw: str, key: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in raw.split(",") if v.strip()])
    except ValueError as e:
        raise ParseError(f"bad numeric list for header key {key!r}: {e}") from e


def read_envi_header(path: str | Path) -> EnviHeader:
    path = Path(path)
    try:
        entries = _parse_header_text(path.read_text())
    except OSError as e:
        raise CorruptFileError(f"cannot read header {path}: {e}") from e

    def need_int(key: str) -> int:
        if key not in entries:
            raise ParseError(f"header {path} missing required key {key!r}")
        try:
            return int(entries[key])
        except ValueError as e:
            raise ParseError(f"header key {key!r} is not an integer") from e

    wl = None
    if "wavelength" in entries:
        wl = _float_list(entries["wavelength"], "wavelength")
    gain = _float_list(entries["data gain values"], "data gain values") if "data gain values" in entries else None
    offs = _float_list(entries["data offset values"], "data offset values") if "data offset values" in entries else None
    return EnviHeader(
        samples=need_int("samples"),
        lines=need_int("lines"),
        bands=need_int("bands"),
        interleave=entries.get("interleave", "bsq").strip().lower(),
        data_type=need_int("data type"),
        byte_order=int(entries.get("byte order", "0")),
        header_offset=int(entries.get("header offset", "0")),
        wavelengths_nm=wl,
        data_gain=gain,
        data_offset=offs,
    )


def guess_data_path(header_path: str | Path) -> Path:
    header_path = Path(header_path)
    for ext in (".img", ".dat", ".bin", ".raw", ""):
        candidate = header_path.with_suffix(ext)
        if candidate != header_path and candidate.exists():
            return candidate
    raise CorruptFileError(f"no data file found next to header {header_path}")


def read_envi(header_path: str | Path, data_path: Optional[str | Path] = None) -> HyperCube:
    """Load an ENVI pair into the canonical (rows, cols, bands) layout."""
    header = read_envi_header(header_path)
    data_path = Path(data_path) if data_path is not None else guess_data_path(header_path)

    n_values = header.samples * header.lines * header.bands
    expected = header.header_offset + n_values * header.dtype.itemsize
    actual = os.path.getsize(data_path)
    if actual != expected:
        raise CorruptFileError(
            f"{data_path}: expected {expected} bytes "
            f"(offset {header.header_offset} + {n_values} x {header.dtype.itemsize}), found {actual}"
        )

    raw = np.fromfile(data_path, dtype=header.dtype, count=n_values, offset=header.header_offset)
    if header.interleave == "bsq":
        data = raw.reshape(header.bands, header.lines, header.samples).transpose(1, 2, 0)
    elif header.interleave == "bil":
        data = raw.reshape(header.lines, header.bands, header.samples).transpose(0, 2, 1)
    else:  # bip
        data = raw.reshape(header.lines, header.samples, header.bands)
    data = data.astype(float)

    if header.data_type == 12 and (header.data_gain is not None or header.data_offset is not None):
        gain = header.data_gain if header.data_gain is not None else np.ones(header.bands)
        offset = header.data_offset if header.data_offset is not None else np.zeros(header.bands)
        if len(gain) != header.bands or len(offset) != header.bands:
            raise ParseError("gain/offset lists must have one entry per band")
        data = data * gain + offset

    if np.any(data < 0):
        log.warning("%s: clamping negative radiance values to 0", data_path)
        data = np.maximum(data, 0.0)

    if header.wavelengths_nm is not None:
        grid = WavelengthGrid(header.wavelengths_nm)
    else:
        log.warning(
            "%s: no wavelength list; synthesizing a linear %g-%g nm ramp",
            header_path,
            DEFAULT_WL_START,
            DEFAULT_WL_END,
        )
        grid = WavelengthGrid.linear(header.bands, DEFAULT_WL_START, DEFAULT_WL_END)
    return HyperCube(grid, data)


def write_envi_array(
    data: np.ndarray,
    header_path: str | Path,
    data_path: Optional[str | Path] = None,
    wavelengths_nm: Optional[np.ndarray] = None,
    interleave: str = "bsq",
    data_type: int = 4,
    description: str = "dinsat output",
) -> Path:
    """Write a (rows, cols, bands) array as an ENVI pair; returns the data path."""
    if interleave not in INTERLEAVES:
        raise ConfigError(f"unknown interleave: {interleave!r}")
    if data_type not in DTYPE_CODES:
        raise ConfigError(f"unsupported output data type code {data_type}")
    data = np.asarray(data)
    if data.ndim != 3:
        raise ConfigError("ENVI writer expects a rows x cols x bands array")
    rows, cols, bands = data.shape

    header_path = Path(header_path)
    data_path = Path(data_path) if data_path is not None else header_path.with_suffix(".img")

    dtype = np.dtype("<" + DTYPE_CODES[data_type])
    if interleave == "bsq":
        ordered = data.transpose(2, 0, 1)
    elif interleave == "bil":
        ordered = data.transpose(0, 2, 1)
    else:
        ordered = data
    np.ascontiguousarray(ordered, dtype=dtype).tofile(data_path)

    parts = [
        "ENVI",
        f"description = {{{description}}}",
        f"samples = {cols}",
        f"lines = {rows}",
        f"bands = {bands}",
        "header offset = 0",
        "file type = ENVI Standard",
        f"data type = {data_type}",
        f"interleave = {interleave}",
        "byte order = 0",
    ]
    if wavelengths_nm is not None:
        wl = ", ".join(repr(float(w)) for w in wavelengths_nm)
        parts.append(f"wavelength = {{{wl}}}")
    header_path.write_text("\n".join(parts) + "\n")
    return data_path


def write_envi(
    cube: HyperCube,
    header_path: str | Path,
    data_path: Optional[str | Path] = None,
    interleave: str = "bsq",
    data_type: int = 4,
) -> Path:
    return write_envi_array(
        cube.data,
        header_path,
        data_path,
        wavelengths_nm=cube.grid.wavelengths_nm,
        interleave=interleave,
        data_type=data_type,
    )
