"""Normal modes and equilibrium second moments of quadratic systems.

A bounded quadratic Hamiltonian is a set of independent oscillators in its
normal-mode coordinates, so equilibrium Gaussian moments at temperature T
follow from one generalized eigenproblem:

    <r r^T> = sum_k coth(w_k / 2T) / (2 w_k) phi_k phi_k^T

with ``phi_k`` the mass-orthonormal mode vectors. Classical moments are the
``T K^{-1}`` limit of the same expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bath_models import SpectralModel, discretize_ohmic, kernel_total
from .errors import NoEquilibriumError, ParameterError, UsageError
from .quad_model import BOUND_TOL, QuadraticSystem, build_two_body_common, to_cm_rel

QUANTUM = "quantum"
CLASSICAL = "classical"

CASIMIR_N_START = 64
CASIMIR_N_MAX = 4096
CASIMIR_RTOL = 1e-3


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    """Normal modes of ``K phi = w^2 M phi``.

    ``mode_matrix`` columns satisfy ``Phi^T M Phi = I``; coordinates are
    ``r = Phi a`` in terms of mode amplitudes ``a``.
    """

    labels: tuple[str, ...]
    squared_frequencies: np.ndarray
    mode_matrix: np.ndarray
    masses: np.ndarray
    indefinite: bool
    tolerance: float

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(np.clip(self.squared_frequencies, 0.0, None))

    def reconstruct_stiffness(self) -> np.ndarray:
        mphi = self.masses[:, None] * self.mode_matrix
        return (mphi * self.squared_frequencies) @ mphi.T

    def require_equilibrium(self) -> None:
        """Raise unless every mode has a strictly positive frequency."""
        w2 = self.squared_frequencies
        bad = np.flatnonzero(w2 <= self.tolerance)
        if bad.size == 0:
            return
        k = int(bad[0])
        direction = dict(zip(self.labels, self.mode_matrix[:, k] / np.max(np.abs(self.mode_matrix[:, k]))))
        kind = "unbounded (negative curvature)" if w2[k] < -self.tolerance else "zero-frequency mode"
        pretty = ", ".join(f"{k_}={v:.4g}" for k_, v in direction.items())
        raise NoEquilibriumError(
            f"no equilibrium state: {kind}, squared frequency {w2[k]:.6g} along ({pretty})",
            direction=direction,
        )


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray
    temperature: float
    kind: str
    momentum: np.ndarray | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.labels)})

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = pair
        try:
            return float(self.matrix[self._index[i], self._index[j]])
        except KeyError as exc:
            raise UsageError(f"unknown coordinate {exc.args[0]!r}") from None


def decompose(sys: QuadraticSystem) -> ModeDecomposition:
    """Solve the generalized symmetric eigenproblem of (stiffness, masses)."""
    if sys.partial:
        raise UsageError("cannot take normal modes of a partial (bookkeeping) Hamiltonian")
    inv_sqrt_m = 1.0 / np.sqrt(sys.masses)
    A = sys.stiffness * np.outer(inv_sqrt_m, inv_sqrt_m)
    w2, U = scipy.linalg.eigh(A)
    # scale of squared frequencies for the indefiniteness test
    scale = float(np.max(np.abs(np.diag(A)), initial=0.0))
    tol = BOUND_TOL * scale
    return ModeDecomposition(
        labels=sys.labels,
        squared_frequencies=w2,
        mode_matrix=inv_sqrt_m[:, None] * U,
        masses=np.array(sys.masses),
        indefinite=bool(np.any(w2 < -tol)),
        tolerance=tol,
    )


def thermal_factor(w, T: float) -> np.ndarray:
    """coth(w / 2T), exactly 1 at T = 0."""
    w = np.asarray(w, dtype=float)
    if T < 0:
        raise ParameterError(f"temperature must be nonnegative, got {T!r}")
    if T == 0:
        return np.ones_like(w)
    return 1.0 / np.tanh(w / (2.0 * T))


def mode_weights(modes: ModeDecomposition, T: float, kind: str = QUANTUM) -> np.ndarray:
    """Position variance of each normal-mode amplitude."""
    modes.require_equilibrium()
    w = modes.frequencies
    if kind == QUANTUM:
        return thermal_factor(w, T) / (2.0 * w)
    if kind == CLASSICAL:
        if T <= 0:
            raise ParameterError("classical equilibrium needs a positive temperature")
        return T / w**2
    raise UsageError(f"unknown covariance kind {kind!r}")


def quantum_covariance(sys: QuadraticSystem, T: float, modes: ModeDecomposition | None = None) -> CovarianceMatrix:
    """Symmetrized equilibrium moments of the quantum thermal state.

    Position moments carry weight ``coth(w/2T) / 2w`` per mode and momentum
    moments ``w coth(w/2T) / 2``; positions and momenta are uncorrelated.
    """
    modes = decompose(sys) if modes is None else modes
    weights = mode_weights(modes, T, QUANTUM)
    phi = modes.mode_matrix
    pos = (phi * weights) @ phi.T
    mphi = modes.masses[:, None] * phi
    mom = (mphi * (weights * modes.squared_frequencies)) @ mphi.T
    return CovarianceMatrix(sys.labels, 0.5 * (pos + pos.T), float(T), QUANTUM, 0.5 * (mom + mom.T))


def classical_covariance(sys: QuadraticSystem, T: float) -> CovarianceMatrix:
    """Boltzmann moments ``<r r^T> = T K^{-1}`` and ``<p p^T> = T M``."""
    if T <= 0:
        raise ParameterError(f"classical equilibrium needs a positive temperature, got {T!r}")
    decompose(sys).require_equilibrium()
    try:
        cho = scipy.linalg.cho_factor(sys.stiffness)
    except np.linalg.LinAlgError:
        raise NoEquilibriumError("stiffness matrix is not positive definite") from None
    pos = T * scipy.linalg.cho_solve(cho, np.eye(len(sys)))
    return CovarianceMatrix(sys.labels, 0.5 * (pos + pos.T), float(T), CLASSICAL, T * np.diag(sys.masses))


def covariance(sys: QuadraticSystem, T: float, kind: str = QUANTUM) -> CovarianceMatrix:
    if kind == QUANTUM:
        return quantum_covariance(sys, T)
    if kind == CLASSICAL:
        return classical_covariance(sys, T)
    raise UsageError(f"unknown covariance kind {kind!r}")


def correlation_series(sys: QuadraticSystem, T: float, i: str, j: str, times, kind: str = QUANTUM,
                       modes: ModeDecomposition | None = None) -> np.ndarray:
    """Symmetrized equilibrium correlation ``C_ij(t) = 1/2 <{r_i(t), r_j(0)}>``."""
    modes = decompose(sys) if modes is None else modes
    weights = mode_weights(modes, T, kind)
    a, b = sys.index(i), sys.index(j)
    amp = weights * modes.mode_matrix[a] * modes.mode_matrix[b]
    t = np.atleast_1d(np.asarray(times, dtype=float))
    return np.cos(np.outer(t, modes.frequencies)) @ amp


@dataclass(frozen=True)
class CasimirResult:
    """Converged ``<x1 x2>`` of the common-bath model with its refinement history."""

    value: float
    n_sequence: tuple[int, ...]
    values: tuple[float, ...]
    converged: bool
    temperature: float


def cross_correlation(m: float, omega: float, bath, T: float) -> float:
    """``<x1 x2>`` of the two-body common-bath model with an explicit bath.

    Computed as ``<X^2> - <x^2>/4`` from the centre-of-mass system, which is
    equal to the direct entry and cheaper because the relative coordinate
    decouples from the bath.
    """
    sys = build_two_body_common(m, omega, bath)
    cm = to_cm_rel(sys)
    bath_idx = cm.bath_indices
    cm_only = cm.restrict([0, *bath_idx])
    x_only = cm.restrict([1])
    X2 = quantum_covariance(cm_only, T)["X", "X"]
    x2 = quantum_covariance(x_only, T)["x", "x"]
    return X2 - 0.25 * x2


def casimir_cross_correlation(m: float, omega: float, model: SpectralModel, T: float,
                              n_start: int = CASIMIR_N_START, n_max: int = CASIMIR_N_MAX,
                              rtol: float = CASIMIR_RTOL) -> CasimirResult:
    """Bath-induced ``<x1 x2>`` for an Ohmic common bath, refined in the mode count.

    The mode count doubles from ``n_start`` until successive values differ by
    less than ``rtol`` (relative) or ``n_max`` is reached. The cutoff stays
    fixed, so the bounded regime ``m w^2 > 2 m gamma w_c / pi`` is checked
    up front.
    """
    if float(model.particle_mass) != float(m):
        model = SpectralModel(model.gamma, model.cutoff, m, model.n_modes, model.kind, model.scheme)
    total = model.kernel_total
    if m * omega**2 <= total * (1 + BOUND_TOL):
        raise NoEquilibriumError(
            f"common-bath model is unbounded: m*omega^2 = {m * omega**2:.6g} must exceed "
            f"sum_j m_j w_j^2 = {total:.6g} (2 m gamma w_c / pi)"
        )
    ns: list[int] = []
    values: list[float] = []
    n = n_start
    converged = False
    while n <= n_max:
        bath = discretize_ohmic(model.with_modes(n))
        if m * omega**2 <= kernel_total(bath):
            raise NoEquilibriumError("discretized common-bath model is unbounded")
        values.append(cross_correlation(m, omega, bath, T))
        ns.append(n)
        if len(values) > 1:
            prev, cur = values[-2], values[-1]
            if abs(cur - prev) <= rtol * abs(cur) or cur == prev:
                converged = True
                break
        n *= 2
    return CasimirResult(values[-1], tuple(ns), tuple(values), converged, float(T))
