"""Quadratic Hamiltonians of oscillators coupled to a bath of oscillators.

Every Hamiltonian handled here has the form

    H = 1/2 sum_i p_i^2 / m_i + 1/2 r^T K r

and is stored as an explicit (masses, stiffness) pair in a
:class:`QuadraticSystem`. Natural units (hbar = k_B = 1) are used throughout.

The builders cover the one-body independent-oscillator (IO) model, the
two-body common-bath model with the (q_j - x_i)^2 completion, and the same
two-body model with the counterterm dropped (the purely bilinear coupling).
The remaining functions move between particle and centre-of-mass/relative
coordinates and check boundedness and IO structure numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, StructureError, UnsupportedConfigurationError, UsageError

SYSTEM = "system"
BATH = "bath"

SYMMETRY_RTOL = 1e-12
BOUND_TOL = 1e-9
# structural equality checks after congruence transforms
STRUCTURE_RTOL = 1e-10


@dataclass(frozen=True)
class BathMode:
    """One bath oscillator with mass ``mass`` and frequency ``frequency``."""

    mass: float
    frequency: float

    def __post_init__(self):
        for name in ("mass", "frequency"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"bath mode {name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def coupling(self) -> float:
        """The combination m_j * w_j**2."""
        return self.mass * self.frequency**2


@dataclass(frozen=True)
class BathSpec:
    """An ordered, possibly empty, list of bath modes."""

    modes: tuple[BathMode, ...] = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        for mode in modes:
            if not isinstance(mode, BathMode):
                raise ParameterError(f"expected BathMode, got {type(mode).__name__}")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "BathSpec":
        return cls(tuple(BathMode(m, w) for m, w in pairs))

    @classmethod
    def from_arrays(cls, masses, frequencies) -> "BathSpec":
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        if masses.shape != frequencies.shape:
            raise ParameterError("bath masses and frequencies must have the same length")
        return cls.from_pairs(zip(masses, frequencies))

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    @property
    def masses(self) -> np.ndarray:
        return np.array([mode.mass for mode in self.modes], dtype=float)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([mode.frequency for mode in self.modes], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return self.masses * self.frequencies**2


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class QuadraticSystem:
    """Quadratic Hamiltonian over labelled coordinates.

    Parameters
    ----------
    labels : sequence of str
        Coordinate names, e.g. ``("x1", "x2", "q_1")``.
    masses : array_like
        One mass per coordinate; the kinetic energy is ``sum p_i**2 / (2 m_i)``.
    stiffness : array_like
        Symmetric matrix ``K`` with potential ``r @ K @ r / 2``.
    roles : sequence of {"system", "bath"}
        Role tag per coordinate, carried through every transformation.
    counterterm : array_like, optional
        The part of ``K`` that comes from expanding the ``(q_j - x)**2``
        completions onto the system block. ``None`` means unknown, in which
        case structural checks infer it.
    partial : bool
        Bookkeeping pieces of a split Hamiltonian may have infinite masses
        (no kinetic term for that coordinate) or negative masses (subtracted
        kinetic terms). Such systems are flagged ``partial`` and are not
        physical on their own.
    """

    labels: tuple[str, ...]
    masses: np.ndarray
    stiffness: np.ndarray
    roles: tuple[str, ...]
    counterterm: np.ndarray | None = None
    partial: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        roles = tuple(self.roles)
        masses = _frozen(self.masses).reshape(-1)
        stiffness = _frozen(self.stiffness)
        n = len(labels)
        if stiffness.shape != (n, n) or masses.shape != (n,) or len(roles) != n:
            raise UsageError(
                f"inconsistent dimensions: {n} labels, {masses.shape[0]} masses, "
                f"{len(roles)} roles, stiffness {stiffness.shape}"
            )
        if len(set(labels)) != n:
            raise UsageError(f"duplicate coordinate labels in {labels}")
        bad_roles = set(roles) - {SYSTEM, BATH}
        if bad_roles:
            raise UsageError(f"unknown roles {sorted(bad_roles)}")
        if not np.all(np.isfinite(stiffness)):
            raise ParameterError("stiffness matrix has non-finite entries")
        scale = max(np.max(np.abs(stiffness), initial=0.0), np.finfo(float).tiny)
        if np.max(np.abs(stiffness - stiffness.T), initial=0.0) > SYMMETRY_RTOL * scale:
            raise ParameterError("stiffness matrix is not symmetric")
        if self.partial:
            if np.any(masses == 0) or np.any(np.isnan(masses)):
                raise ParameterError("masses must be nonzero")
        elif np.any(~np.isfinite(masses)) or np.any(masses <= 0):
            raise ParameterError(f"masses must be positive and finite, got {masses.tolist()}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "stiffness", stiffness)
        if self.counterterm is not None:
            ct = _frozen(self.counterterm)
            if ct.shape != (n, n):
                raise UsageError("counterterm must have the same shape as the stiffness")
            object.__setattr__(self, "counterterm", ct)
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def inverse_masses(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.masses

    @property
    def system_indices(self) -> list[int]:
        return [i for i, role in enumerate(self.roles) if role == SYSTEM]

    @property
    def bath_indices(self) -> list[int]:
        return [i for i, role in enumerate(self.roles) if role == BATH]

    @property
    def scale(self) -> float:
        """Largest absolute stiffness entry, used to scale tolerances."""
        return float(np.max(np.abs(self.stiffness), initial=0.0))

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UsageError(f"unknown coordinate {label!r}; have {list(self.labels)}") from None

    def potential(self, r) -> np.ndarray:
        """Potential energy for a point (or a stack of points along the last axis)."""
        r = np.asarray(r, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", r, self.stiffness, r)

    def kinetic(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return 0.5 * np.sum(p * p * self.inverse_masses, axis=-1)

    def energy(self, r, p) -> np.ndarray:
        return self.kinetic(p) + self.potential(r)

    def inert_indices(self) -> list[int]:
        """Coordinates that appear nowhere in this Hamiltonian."""
        inv = self.inverse_masses
        return [
            i for i in range(len(self))
            if inv[i] == 0 and not np.any(self.stiffness[i]) and not np.any(self.stiffness[:, i])
        ]

    def restrict(self, keep: Sequence[int]) -> "QuadraticSystem":
        keep = list(keep)
        sub = np.ix_(keep, keep)
        ct = None if self.counterterm is None else self.counterterm[sub]
        masses = self.masses[keep]
        return QuadraticSystem(
            labels=tuple(self.labels[i] for i in keep),
            masses=masses,
            stiffness=self.stiffness[sub],
            roles=tuple(self.roles[i] for i in keep),
            counterterm=ct,
            partial=bool(np.any(~np.isfinite(masses)) or np.any(masses < 0)),
        )

    def drop_inert(self) -> "QuadraticSystem":
        inert = set(self.inert_indices())
        if not inert:
            return self
        return self.restrict([i for i in range(len(self)) if i not in inert])


@dataclass(frozen=True)
class StructureReport:
    """Outcome of a structural check on a quadratic system."""

    is_io_form: bool
    min_potential_eigenvalue: float
    bounded: bool
    violations: tuple[str, ...] = ()


def _check_oscillator(m, omega):
    m = float(m)
    omega = float(omega)
    if not np.isfinite(m) or m <= 0:
        raise ParameterError(f"oscillator mass must be positive, got {m!r}")
    if not np.isfinite(omega) or omega < 0:
        raise ParameterError(f"oscillator frequency must be nonnegative, got {omega!r}")
    return m, omega


def _bath_labels(bath: BathSpec) -> list[str]:
    return [f"q_{j + 1}" for j in range(len(bath))]


def build_one_body_io(m: float, omega: float, bath: BathSpec) -> QuadraticSystem:
    """One harmonic oscillator coupled to ``bath`` through (q_j - x)^2 terms.

    The potential is ``m w^2 x^2 / 2 + sum_j m_j w_j^2 (q_j - x)^2 / 2`` over
    coordinates ``[x, q_1, ..., q_N]``.
    """
    m, omega = _check_oscillator(m, omega)
    c = bath.couplings
    n = len(bath) + 1
    K = np.zeros((n, n))
    K[0, 0] = m * omega**2 + c.sum()
    K[0, 1:] = K[1:, 0] = -c
    K[1:, 1:] = np.diag(c)
    ct = np.zeros((n, n))
    ct[0, 0] = c.sum()
    return QuadraticSystem(
        labels=("x", *_bath_labels(bath)),
        masses=np.concatenate([[m], bath.masses]),
        stiffness=K,
        roles=(SYSTEM,) + (BATH,) * len(bath),
        counterterm=ct,
    )


def _two_body(m, omega, bath, with_counterterm):
    m, omega = _check_oscillator(m, omega)
    c = bath.couplings
    n = len(bath) + 2
    total = c.sum() if with_counterterm else 0.0
    K = np.zeros((n, n))
    K[0, 0] = K[1, 1] = m * omega**2 + total
    K[0, 2:] = K[2:, 0] = -c
    K[1, 2:] = K[2:, 1] = -c
    K[2:, 2:] = np.diag(c)
    ct = np.zeros((n, n))
    ct[0, 0] = ct[1, 1] = total
    return QuadraticSystem(
        labels=("x1", "x2", *_bath_labels(bath)),
        masses=np.concatenate([[m, m], bath.masses]),
        stiffness=K,
        roles=(SYSTEM, SYSTEM) + (BATH,) * len(bath),
        counterterm=ct,
    )


def build_two_body_common(m: float, omega: float, bath: BathSpec) -> QuadraticSystem:
    """Two identical oscillators sharing one bath, each coupled via (q_j - x_i)^2.

    The doubly counted free-bath energy is subtracted once (the bracket is
    read as summed over j), leaving the potential

        m w^2 (x1^2 + x2^2)/2 + sum_j [ c_j q_j^2/2 - c_j q_j (x1 + x2)
                                         + c_j (x1^2 + x2^2)/2 ]

    with ``c_j = m_j w_j^2``, over coordinates ``[x1, x2, q_1, ..., q_N]``.
    """
    return _two_body(m, omega, bath, with_counterterm=True)


def build_two_body_bilinear(m: float, omega: float, bath: BathSpec) -> QuadraticSystem:
    """As :func:`build_two_body_common` without the ``c_j (x1^2 + x2^2)/2`` counterterm."""
    return _two_body(m, omega, bath, with_counterterm=False)


def min_potential_eigenvalue(sys: QuadraticSystem) -> float:
    """Smallest eigenvalue of the stiffness; H is bounded below iff it is >= 0."""
    if len(sys) == 0:
        return 0.0
    return float(np.linalg.eigvalsh(sys.stiffness)[0])


def has_lower_bound(sys: QuadraticSystem, tol: float = BOUND_TOL) -> StructureReport:
    if tol < 0:
        raise ParameterError("tolerance must be nonnegative")
    lam = min_potential_eigenvalue(sys)
    bounded = lam >= -tol * sys.scale
    violations = () if bounded else (f"potential has negative curvature {lam:.6g}",)
    return StructureReport(
        is_io_form=False, min_potential_eigenvalue=lam, bounded=bool(bounded), violations=violations
    )


def to_cm_rel(sys: QuadraticSystem) -> QuadraticSystem:
    """Rewrite a two-oscillator system in centre-of-mass and relative coordinates.

    ``X = (x1 + x2)/2`` and ``x = x1 - x2`` with conjugate momenta
    ``P = p1 + p2`` and ``p = (p1 - p2)/2``. The returned system has
    coordinates ``[X, x, q_1, ...]``, masses ``M = 2m`` and ``m/2`` on the
    first two, and stiffness ``S^T K S`` where ``S`` maps new coordinates to
    old ones. The Hamiltonian is unchanged.
    """
    sysidx = sys.system_indices
    if len(sysidx) != 2:
        raise UsageError(f"expected exactly two system coordinates, got {len(sysidx)}")
    i1, i2 = sysidx
    m1, m2 = sys.masses[i1], sys.masses[i2]
    if not np.isclose(m1, m2, rtol=1e-12, atol=0.0):
        raise UnsupportedConfigurationError(
            f"centre-of-mass transformation needs equal oscillator masses, got {m1} and {m2}"
        )
    bath = sys.bath_indices
    order = [i1, i2, *bath]
    n = len(sys)
    # r_old[order] = S @ r_new with r_new = (X, x, q...)
    S = np.eye(n)
    S[0, :2] = (1.0, 0.5)
    S[1, :2] = (1.0, -0.5)
    T = np.linalg.inv(S)
    sub = np.ix_(order, order)
    K = S.T @ sys.stiffness[sub] @ S
    inv_mass = T @ np.diag(sys.inverse_masses[order]) @ T.T
    off = inv_mass - np.diag(np.diag(inv_mass))
    if np.max(np.abs(off)) > 1e-12 * np.max(np.abs(inv_mass)):
        raise UnsupportedConfigurationError("kinetic form is not diagonal after the transformation")
    ct = None
    if sys.counterterm is not None:
        ct = S.T @ sys.counterterm[sub] @ S
    return QuadraticSystem(
        labels=("X", "x", *(sys.labels[i] for i in bath)),
        masses=1.0 / np.diag(inv_mass),
        stiffness=0.5 * (K + K.T),
        roles=(SYSTEM, SYSTEM) + (BATH,) * len(bath),
        counterterm=None if ct is None else 0.5 * (ct + ct.T),
    )


def split_cm_rel(sys_cm_rel: QuadraticSystem) -> tuple[QuadraticSystem, QuadraticSystem]:
    """Split a ``to_cm_rel`` system into the CM and relative bookkeeping parts.

    The CM part holds ``X`` with its coupling to the bath and carries the bath
    block twice (kinetic and potential), so it reads
    ``P^2/2M + M w^2 X^2/2 + 2 sum_j [p_j^2/2m_j + m_j w_j^2 (q_j - X)^2/2]``.
    The relative part holds ``x`` and subtracts one copy of the bath block.
    Both parts live on the full coordinate set ``[X, x, q...]`` so that their
    stiffnesses and inverse masses add up to those of the input.
    """
    s = sys_cm_rel
    if s.labels[:2] != ("X", "x") or s.roles[:2] != (SYSTEM, SYSTEM) or len(s.system_indices) != 2:
        raise UsageError("split_cm_rel expects the output of to_cm_rel (coordinates X, x, q...)")
    K = s.stiffness
    if K[0, 1] != 0.0 and abs(K[0, 1]) > STRUCTURE_RTOL * s.scale:
        raise StructureError("centre-of-mass and relative coordinates are coupled directly")
    n = len(s)
    b = slice(2, n)

    K_cm = np.zeros((n, n))
    K_cm[0, 0] = K[0, 0]
    K_cm[0, b] = K[0, b]
    K_cm[b, 0] = K[b, 0]
    K_cm[b, b] = 2.0 * K[b, b]
    K_rel = K - K_cm
    K_rel[0, 1] = K_rel[1, 0] = 0.0

    inv = s.inverse_masses
    inv_cm = np.zeros(n)
    inv_cm[0] = inv[0]
    inv_cm[b] = 2.0 * inv[b]
    inv_rel = inv - inv_cm

    ct_cm = ct_rel = None
    if s.counterterm is not None:
        ct_cm = np.zeros((n, n))
        ct_cm[0, 0] = s.counterterm[0, 0]
        ct_rel = s.counterterm - ct_cm

    with np.errstate(divide="ignore"):
        m_cm = 1.0 / inv_cm
        m_rel = 1.0 / inv_rel
    h_cm = QuadraticSystem(s.labels, m_cm, K_cm, s.roles, ct_cm, partial=True)
    h_rel = QuadraticSystem(s.labels, m_rel, K_rel, s.roles, ct_rel, partial=True)
    return h_cm, h_rel


def _single_system(sys: QuadraticSystem) -> tuple[QuadraticSystem, int]:
    reduced = sys.drop_inert()
    sysidx = reduced.system_indices
    if len(sysidx) != 1:
        raise UsageError(f"expected exactly one active system coordinate, got {len(sysidx)}")
    return reduced, sysidx[0]


def is_io_form(sys: QuadraticSystem) -> StructureReport:
    """Check whether ``sys`` has the one-body independent-oscillator shape.

    Coordinates absent from the Hamiltonian are ignored. The single remaining
    system coordinate ``s`` must satisfy, for every bath mode ``j``:

    * positive bath kinetic and diagonal stiffness terms,
    * no bath-bath couplings,
    * ``K[s, j] == -K[j, j]`` (a complete square ``c_j (q_j - s)**2``),
    * a system counterterm equal to ``sum_j K[j, j]``,
    * a nonnegative bare system stiffness once the counterterm is removed.
    """
    reduced, s = _single_system(sys)
    K = reduced.stiffness
    atol = STRUCTURE_RTOL * max(reduced.scale, 1.0)
    bath = reduced.bath_indices
    violations: list[str] = []

    inv = reduced.inverse_masses
    if any(inv[j] <= 0 for j in bath):
        violations.append("negative bath kinetic block")
    diag = np.array([K[j, j] for j in bath])
    if np.any(diag < -atol):
        violations.append("negative bath diagonal block")
    elif np.any(np.abs(diag) <= atol):
        violations.append("bath mode without restoring force")
    if bath:
        block = K[np.ix_(bath, bath)]
        if np.any(np.abs(block - np.diag(np.diag(block))) > atol):
            violations.append("bath-bath coupling")

    linear = np.array([K[s, j] for j in bath])
    has_linear = bool(np.any(np.abs(linear) > atol))
    if bath and not has_linear:
        violations.append("no linear system-bath coupling")
    elif np.any(np.abs(linear + diag) > atol):
        violations.append("coupling is not a complete square")

    completion = float(diag.sum()) if bath else 0.0
    if reduced.counterterm is None:
        counterterm = completion if has_linear else 0.0
    else:
        counterterm = float(reduced.counterterm[s, s])
    has_counterterm = abs(counterterm) > atol
    if has_counterterm and not has_linear:
        violations.append("counterterm without linear coupling")
    elif has_linear and not has_counterterm:
        violations.append("linear coupling without counterterm")
    elif has_linear and abs(counterterm - completion) > atol:
        violations.append("counterterm does not match the couplings")
    if inv[s] <= 0:
        violations.append("non-positive system kinetic term")
    if K[s, s] - counterterm < -atol:
        violations.append("negative bare system stiffness")

    lam = min_potential_eigenvalue(reduced)
    return StructureReport(
        is_io_form=not violations,
        min_potential_eigenvalue=lam,
        bounded=bool(lam >= -BOUND_TOL * reduced.scale),
        violations=tuple(violations),
    )


def extract_io_parameters(sys: QuadraticSystem) -> tuple[float, float, BathSpec]:
    """Read ``(m, omega, bath)`` off a system already in IO form."""
    report = is_io_form(sys)
    if not report.is_io_form:
        raise StructureError("system is not in IO form: " + "; ".join(report.violations))
    reduced, s = _single_system(sys)
    K = reduced.stiffness
    bath = reduced.bath_indices
    c = np.array([K[j, j] for j in bath])
    masses = reduced.masses[bath]
    m = float(reduced.masses[s])
    bare = max(K[s, s] - c.sum(), 0.0)
    return m, float(np.sqrt(bare / m)), BathSpec.from_arrays(masses, np.sqrt(c / masses))


def rescale_bath_cm(h_cm: QuadraticSystem) -> QuadraticSystem:
    """Recast the CM part of a split as an ordinary one-body IO Hamiltonian.

    The doubled bath terms ``2 [p_j^2/2m_j + m_j w_j^2 (q_j - X)^2/2]`` become
    a single IO bath with masses ``m_j / 2`` and frequencies ``2 w_j``. The
    result is rebuilt with :func:`build_one_body_io` (relabelled to ``X``) and
    checked to be the same quadratic form as ``h_cm``.
    """
    reduced = h_cm.drop_inert()
    if reduced.system_indices != [0] or (len(reduced) > 0 and reduced.labels[0] != "X"):
        raise StructureError("expected the centre-of-mass part of split_cm_rel")
    report = is_io_form(reduced)
    if not report.is_io_form:
        raise StructureError(
            "centre-of-mass part does not have the doubled-bath shape: " + "; ".join(report.violations)
        )
    M, omega, _ = extract_io_parameters(reduced)
    bath = reduced.bath_indices
    # h_cm carries 2/m_j kinetic and 2 c_j (q_j - X)^2 / 2 potential per mode
    m_orig = 2.0 * reduced.masses[bath]
    c_orig = 0.5 * np.array([reduced.stiffness[j, j] for j in bath])
    w_orig = np.sqrt(c_orig / m_orig)
    tilde = BathSpec.from_arrays(m_orig / 2.0, 2.0 * w_orig)
    out = build_one_body_io(M, omega, tilde)
    out = QuadraticSystem(
        labels=("X", *(reduced.labels[j] for j in bath)),
        masses=out.masses,
        stiffness=out.stiffness,
        roles=out.roles,
        counterterm=out.counterterm,
    )
    tol = STRUCTURE_RTOL * max(reduced.scale, 1.0)
    if np.max(np.abs(out.stiffness - reduced.stiffness), initial=0.0) > tol or not np.allclose(
        out.masses, reduced.masses, rtol=1e-12, atol=0.0
    ):
        raise StructureError("rescaled bath does not reproduce the centre-of-mass Hamiltonian")
    return out
