"""Transmission-profile models: the operator T, its inverse, and T(1_n).

Two right-hand sides are provided. The linear profile realizes per-band
exponential decay with nonnegative rates; the nonlinear profile runs the
spectrum through a bottleneck encoder/decoder and multiplies by a decay
factor forced into [-1, 0], so dissipation holds by construction.

For the linear profile the discrete forward map is a per-band multiplication
by a fixed polynomial of alpha (the method's stability polynomial raised to
the step count), so the inverse transmission is computed as exact division by
that factor. Round trips are then exact up to float rounding, which backward
time-integration of an explicit scheme cannot achieve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .mlp import MlpLayout, glorot_init, mlp_forward
from .ode import SolverConfig, ode_solve, ode_solve_reverse
from .types import Spectrum

DEFAULT_HIDDEN = 12
DEFAULT_LATENT = 3


def softplus_inverse(a: np.ndarray) -> np.ndarray:
    """Raw parameter giving softplus(raw) == a; a must be positive."""
    a = np.asarray(a, float)
    if np.any(a <= 0):
        raise ConfigError("softplus inverse requires positive rates")
    return a + np.log1p(-np.exp(-a))


@dataclass(frozen=True)
class LinearProfile:
    """Per-band exponential decay; alpha = softplus(raw) keeps rates >= 0."""

    raw: np.ndarray

    kind = "linear"

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float)
        object.__setattr__(self, "raw", raw)
        if raw.ndim != 1 or raw.size < 1:
            raise ShapeError("linear profile needs a 1-D raw parameter vector")
        if not np.all(np.isfinite(raw)):
            raise ShapeError("linear profile parameters must be finite")

    @property
    def n_bands(self) -> int:
        return int(self.raw.size)

    @property
    def params(self) -> np.ndarray:
        return self.raw

    @property
    def alpha(self) -> np.ndarray:
        return np.logaddexp(0.0, self.raw)

    def with_params(self, params: np.ndarray) -> "LinearProfile":
        return LinearProfile(np.asarray(params, float))

    @classmethod
    def initialize(cls, n_bands: int, rng: np.random.Generator) -> "LinearProfile":
        # alpha near 0.5 keeps the initial transmittance around 0.6.
        alpha0 = rng.uniform(0.4, 0.6, n_bands)
        return cls(softplus_inverse(alpha0))

    @classmethod
    def from_alpha(cls, alpha: np.ndarray) -> "LinearProfile":
        alpha = np.maximum(np.asarray(alpha, float), 1e-9)
        return cls(softplus_inverse(alpha))

    def rhs_from(self, params):
        alpha = ad.softplus(params)

        def rhs(L):
            return -(alpha * L)

        return rhs


@dataclass(frozen=True)
class NonlinearProfile:
    """Encoder/decoder rhs: dL/dx = -sigmoid(decode(encode(L))) * L."""

    params: np.ndarray
    n_bands: int
    hidden: int = DEFAULT_HIDDEN
    latent: int = DEFAULT_LATENT

    kind = "nonlinear"

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "params", params)
        expected = self.encoder_layout.n_params + self.decoder_layout.n_params
        if params.shape != (expected,):
            raise ShapeError(
                f"nonlinear profile needs {expected} parameters, got {params.shape}"
            )
        if not np.all(np.isfinite(params)):
            raise ShapeError("nonlinear profile parameters must be finite")

    @property
    def encoder_layout(self) -> MlpLayout:
        return MlpLayout.one_hidden(self.n_bands, self.hidden, self.latent)

    @property
    def decoder_layout(self) -> MlpLayout:
        return MlpLayout.one_hidden(self.latent, self.hidden, self.n_bands)

    def with_params(self, params: np.ndarray) -> "NonlinearProfile":
        return replace(self, params=np.asarray(params, float))

    @classmethod
    def initialize(
        cls,
        n_bands: int,
        rng: np.random.Generator,
        hidden: int = DEFAULT_HIDDEN,
        latent: int = DEFAULT_LATENT,
    ) -> "NonlinearProfile":
        enc = MlpLayout.one_hidden(n_bands, hidden, latent)
        dec = MlpLayout.one_hidden(latent, hidden, n_bands)
        params = np.concatenate([glorot_init(enc, rng), glorot_init(dec, rng)])
        return cls(params, n_bands, hidden, latent)

    def rhs_from(self, params):
        enc, dec = self.encoder_layout, self.decoder_layout
        n_enc = enc.n_params

        def rhs(L):
            z = mlp_forward(params[:n_enc], enc, L)
            decay = ad.sigmoid(mlp_forward(params[n_enc:], dec, z))
            return -(decay * L)

        return rhs


Profile = Union[LinearProfile, NonlinearProfile]


def rhs_linear(L: np.ndarray, profile: LinearProfile) -> np.ndarray:
    """-alpha * L, elementwise."""
    L = np.asarray(L, float)
    if L.shape[-1] != profile.n_bands:
        raise ShapeError(f"input has {L.shape[-1]} bands, profile {profile.n_bands}")
    return ad.value_of(profile.rhs_from(profile.params)(L))


def rhs_nonlinear(L: np.ndarray, profile: NonlinearProfile) -> np.ndarray:
    """decay(L) * L with decay in [-1, 0], so the result is <= 0 for L >= 0."""
    L = np.asarray(L, float)
    if L.shape[-1] != profile.n_bands:
        raise ShapeError(f"input has {L.shape[-1]} bands, profile {profile.n_bands}")
    return ad.value_of(profile.rhs_from(profile.params)(L))


def transmit_values(model: Profile, params, L, solver: SolverConfig = SolverConfig()):
    """The operator T on raw vectors/matrices (traced or plain)."""
    return ode_solve(model.rhs_from(params), L, solver)


def transmittance_values(model: Profile, params, solver: SolverConfig = SolverConfig()):
    """T applied to the all-ones spectrum."""
    return transmit_values(model, params, np.ones(model.n_bands), solver)


def invert_values(
    model: Profile,
    params,
    L,
    solver: SolverConfig = SolverConfig(),
    transmittance=None,
):
    """The operator T^-1 on raw vectors/matrices.

    Linear profiles invert by dividing out the discrete per-band transmission
    factor (the exact inverse of the discrete forward map); nonlinear profiles
    integrate the same dynamics backward in x.
    """
    if model.kind == "linear":
        if transmittance is None:
            transmittance = transmittance_values(model, params, solver)
        return L / transmittance
    return ode_solve_reverse(model.rhs_from(params), L, solver)


def _spectrum_in(L: Spectrum | np.ndarray) -> np.ndarray:
    return L.values if isinstance(L, Spectrum) else np.asarray(L, float)


def transmit(model: Profile, L: Spectrum | np.ndarray, solver: SolverConfig = SolverConfig()):
    """T on a Spectrum (unit preserved) or plain vector."""
    out = ad.value_of(transmit_values(model, model.params, _spectrum_in(L), solver))
    if isinstance(L, Spectrum):
        return L.with_values(out)
    return out


def invert_transmit(model: Profile, L: Spectrum | np.ndarray, solver: SolverConfig = SolverConfig()):
    """T^-1 on a Spectrum (unit preserved) or plain vector."""
    out = ad.value_of(invert_values(model, model.params, _spectrum_in(L), solver))
    if isinstance(L, Spectrum):
        return L.with_values(out)
    return out


def transmittance_spectrum(model: Profile, solver: SolverConfig = SolverConfig()) -> Spectrum:
    """T(1_n) as a transmittance-tagged Spectrum."""
    return Spectrum(
        ad.value_of(transmittance_values(model, model.params, solver)), "transmittance"
    )
