"""Ohmic bath discretization and the friction memory kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .quad_model import BathSpec

OHMIC_SHARP_CUTOFF = "ohmic_sharp_cutoff"
LINEAR_MIDPOINT = "linear_midpoint"

DEFAULT_N_MODES = 256
DEFAULT_CUTOFF_FACTOR = 50.0


def default_cutoff(omega: float, gamma: float) -> float:
    return DEFAULT_CUTOFF_FACTOR * max(omega, gamma)


@dataclass(frozen=True)
class SpectralModel:
    """Flat (Ohmic) spectral density up to a sharp cutoff.

    In the continuum limit the memory kernel tends to ``2 m gamma delta(t)``
    and the particle feels instantaneous friction ``m gamma dx/dt``.
    """

    gamma: float
    cutoff: float
    particle_mass: float = 1.0
    n_modes: int = DEFAULT_N_MODES
    kind: str = OHMIC_SHARP_CUTOFF
    scheme: str = LINEAR_MIDPOINT

    def __post_init__(self):
        for name in ("gamma", "cutoff", "particle_mass"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ParameterError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        if self.kind != OHMIC_SHARP_CUTOFF:
            raise ParameterError(f"unsupported spectral density {self.kind!r}")
        if self.scheme != LINEAR_MIDPOINT:
            raise ParameterError(f"unsupported discretization scheme {self.scheme!r}")

    def with_modes(self, n_modes: int) -> "SpectralModel":
        return SpectralModel(self.gamma, self.cutoff, self.particle_mass, n_modes, self.kind, self.scheme)

    @property
    def kernel_total(self) -> float:
        """Continuum value of sum_j m_j w_j^2, i.e. 2 m gamma w_c / pi."""
        return 2.0 * self.particle_mass * self.gamma * self.cutoff / np.pi

    def continuum_kernel(self, t) -> np.ndarray:
        """(2 m gamma / pi) sin(w_c t) / t, with its limit at t = 0."""
        t = np.asarray(t, dtype=float)
        wc = self.cutoff
        return (2.0 * self.particle_mass * self.gamma / np.pi) * wc * np.sinc(wc * t / np.pi)


@dataclass(frozen=True)
class KernelSeries:
    times: np.ndarray
    values: np.ndarray
    mu_zero: float


def kernel_total(bath: BathSpec) -> float:
    """sum_j m_j w_j^2, the memory kernel at t = 0."""
    return float(np.sum(bath.couplings))


def memory_kernel(bath: BathSpec, times) -> KernelSeries:
    """Sample mu(t) = sum_j m_j w_j^2 cos(w_j t) on a nonnegative grid.

    Negative times are rejected: the kernel vanishes there by convention and
    callers should apply that themselves.
    """
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1:
        raise ParameterError("time grid must be one-dimensional")
    if np.any(t < 0):
        raise ParameterError("memory kernel is only sampled at nonnegative times")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("time grid must be strictly increasing")
    c = bath.couplings
    # row-wise np.sum reduces exactly like kernel_total, so values[t=0] == mu_zero
    values = np.sum(np.cos(np.outer(t, bath.frequencies)) * c, axis=1)
    return KernelSeries(times=t, values=values, mu_zero=kernel_total(bath))


def discretize_ohmic(model: SpectralModel) -> BathSpec:
    """Midpoint discretization of the flat density on (0, cutoff].

    Mode ``j`` sits at ``w_j = (j - 1/2) w_c / N`` and carries
    ``m_j w_j^2 = (2 m gamma / pi) (w_c / N)``, so the discrete kernel is the
    midpoint rule for ``(2 m gamma / pi) int_0^w_c cos(w t) dw``.
    """
    n = model.n_modes
    dw = model.cutoff / n
    freqs = (np.arange(1, n + 1) - 0.5) * dw
    weight = 2.0 * model.particle_mass * model.gamma / np.pi * dw
    return BathSpec.from_arrays(weight / freqs**2, freqs)
