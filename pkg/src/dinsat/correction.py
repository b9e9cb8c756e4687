"""Scene normalization (C, m) and the correction / forward-simulation pipeline.

Reflectance is recovered as rho = T^-1((L4 - C)/m) / T(1_n); radiance is
simulated as L4 = C + m * T(rho * T(1_n)). rho is not clamped on output;
out-of-range bands and floored denominators are reported in a quality mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, EmptyInputError, ShapeError
from .ode import SolverConfig
from .transmission import (
    Profile,
    invert_values,
    transmit_values,
    transmittance_values,
)
from .types import PixelSample, Spectrum, stack_l4

# Transmittance floor for the division in the correction formula.
EPS_T = 1e-6

# Quality-mask bit flags.
MASK_DENOM_FLOORED = 1
MASK_RHO_OUT_OF_RANGE = 2

RHO_RANGE_TOL = 1e-6


@dataclass(frozen=True)
class SceneNormalization:
    """Per-band dark offset and scalar illumination magnitude."""

    c: np.ndarray
    m: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "m", float(self.m))
        if c.ndim != 1:
            raise ShapeError("dark offset must be a per-band vector")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ConfigError("dark offset must be finite and nonnegative")
        if not self.m > 0:
            raise ConfigError("illumination magnitude must be positive")

    @classmethod
    def identity(cls, n_bands: int) -> "SceneNormalization":
        return cls(np.zeros(n_bands), 1.0)


def estimate_dark_offset(pixels: Sequence[PixelSample]) -> np.ndarray:
    """Per-band minimum radiance over the pixel population."""
    return stack_l4(pixels).min(axis=0)


def estimate_scale(pixels: Sequence[PixelSample], c: np.ndarray) -> float:
    """Smallest m with (L4 - c)/m <= 1 everywhere; 1 for a degenerate flat scene."""
    spread = float((stack_l4(pixels) - np.asarray(c, float)).max())
    return spread if spread > 0 else 1.0


def estimate_normalization(pixels: Sequence[PixelSample]) -> SceneNormalization:
    if len(pixels) == 0:
        raise EmptyInputError("cannot normalize an empty pixel set")
    c = estimate_dark_offset(pixels)
    return SceneNormalization(c, estimate_scale(pixels, c))


def corrected_reflectance(
    model: Profile,
    params,
    norm: SceneNormalization,
    l4,
    solver: SolverConfig = SolverConfig(),
):
    """Traced-or-plain correction of an (n_bands,) vector or (batch, n_bands) matrix."""
    l4 = np.asarray(l4, float)
    z = np.maximum((l4 - norm.c) / norm.m, 0.0)
    t1 = transmittance_values(model, params, solver)
    l2 = invert_values(model, params, z, solver, transmittance=t1)
    return l2 / ad.clip_min(t1, EPS_T)


def correct_batch(
    model: Profile,
    norm: SceneNormalization,
    l4: np.ndarray,
    solver: SolverConfig = SolverConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Reflectance plus a per-band quality mask for a (batch, n_bands) matrix."""
    rho = ad.value_of(corrected_reflectance(model, model.params, norm, l4, solver))
    t1 = ad.value_of(transmittance_values(model, model.params, solver))
    mask = np.zeros(rho.shape, dtype=np.uint8)
    mask |= np.where(t1 < EPS_T, MASK_DENOM_FLOORED, 0).astype(np.uint8)
    out_of_range = (rho < -RHO_RANGE_TOL) | (rho > 1.0 + RHO_RANGE_TOL)
    mask |= np.where(out_of_range, MASK_RHO_OUT_OF_RANGE, 0).astype(np.uint8)
    return rho, mask


def correct_pixel(
    model: Profile,
    norm: SceneNormalization,
    l4: Spectrum,
    solver: SolverConfig = SolverConfig(),
) -> Spectrum:
    """Surface reflectance for one at-sensor radiance spectrum."""
    if np.any(l4.values < 0):
        raise ConfigError("at-sensor radiance must be nonnegative")
    rho, _ = correct_batch(model, norm, l4.values[None, :], solver)
    return Spectrum(rho[0], "reflectance")


def simulate_values(
    model: Profile,
    params,
    norm: SceneNormalization,
    rho,
    solver: SolverConfig = SolverConfig(),
):
    """Traced-or-plain forward simulation of at-sensor radiance."""
    t1 = transmittance_values(model, params, solver)
    l4 = norm.c + norm.m * transmit_values(model, params, rho * t1, solver)
    return l4


def simulate_at_sensor(
    model: Profile,
    norm: SceneNormalization,
    rho: Spectrum,
    solver: SolverConfig = SolverConfig(),
) -> Spectrum:
    """At-sensor radiance from a surface reflectance spectrum."""
    if np.any(rho.values < -RHO_RANGE_TOL):
        raise ConfigError("reflectance must be nonnegative")
    out = ad.value_of(simulate_values(model, model.params, norm, rho.values, solver))
    return Spectrum(out, "radiance")
