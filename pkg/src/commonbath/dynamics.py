"""Trajectory simulations of the oscillator-bath models.

Three kinds of numerical experiment live here:

* deterministic explicit-bath ensembles, with initial conditions drawn from
  the classical Boltzmann distribution or the quantum (Wigner) equilibrium
  Gaussian, integrated with a symplectic kick-drift-kick scheme;
* impulse responses that expose the delayed, bath-mediated influence of one
  oscillator on the other;
* a white-noise Langevin integrator for two oscillators sharing an Ohmic
  bath, together with a residual check of the memory-kernel Langevin
  equation on explicit-bath trajectories.

Randomness for trajectory ``i`` comes from a Philox generator keyed by
``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on how
trajectories are grouped or on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.signal

from .bath_models import memory_kernel
from .errors import ParameterError, UsageError
from .quad_model import QuadraticSystem, extract_io_parameters
from .spectrum import CLASSICAL, QUANTUM, ModeDecomposition, decompose, mode_weights

CLASSICAL_SAMPLING = "classical"
WIGNER_SAMPLING = "wigner"

DT_FACTOR = 0.05
BLOCK_SIZE = 512
NOISE_CHUNK = 1024

# Yoshida triple-jump weights for a 4th-order composition of KDK steps
_CBRT2 = 2.0 ** (1.0 / 3.0)
_W1 = 1.0 / (2.0 - _CBRT2)
_W0 = -_CBRT2 * _W1
YOSHIDA4 = (_W1, _W0, _W1)


@dataclass(frozen=True)
class SimConfig:
    """Controls for ensemble simulations.

    ``record_stride`` thins the output grid (every n-th step is kept) and
    ``workers`` sets the thread count; neither changes the sampled numbers.
    """

    dt: float
    t_max: float
    n_traj: int = 1000
    seed: int = 0
    sampling: str = CLASSICAL_SAMPLING
    temperature: float = 1.0
    record_stride: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("dt", "t_max"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("n_traj", "record_stride", "workers"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        if self.sampling not in (CLASSICAL_SAMPLING, WIGNER_SAMPLING):
            raise ParameterError(f"sampling must be 'classical' or 'wigner', got {self.sampling!r}")
        T = float(self.temperature)
        if not np.isfinite(T) or T < 0:
            raise ParameterError(f"temperature must be nonnegative, got {T!r}")
        if self.sampling == CLASSICAL_SAMPLING and T == 0:
            raise ParameterError("classical sampling needs a positive temperature")
        object.__setattr__(self, "temperature", T)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class CorrelationEstimate:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int


@dataclass(frozen=True)
class EnsembleResult:
    """Per-pair estimates: ``lagged`` is ``1/2 <a(t) b(0) + b(t) a(0)>``,
    ``equal_time`` is ``<a(t) b(t)>``."""

    times: np.ndarray
    lagged: dict
    equal_time: dict
    n_traj: int


@dataclass(frozen=True)
class NoiseRealization:
    """Initial conditions of one trajectory and the random force they induce.

    ``force`` is ``F(t) = sum_j m_j w_j^2 qh_j(t)`` where ``qh_j`` is the free
    bath motion started from the displacement ``q_j(0) - x(0)`` and momentum
    ``p_j(0)``.
    """

    times: np.ndarray
    r0: np.ndarray
    p0: np.ndarray
    bath_positions: np.ndarray
    bath_momenta: np.ndarray
    force: np.ndarray


@dataclass(frozen=True)
class ResponseResult:
    times: np.ndarray
    series: dict = field(default_factory=dict)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.series[label]


@dataclass(frozen=True)
class GLEResidual:
    times: np.ndarray
    residual: np.ndarray
    rms: float
    normalized_rms: float


@dataclass(frozen=True)
class WhiteNoiseResult:
    """Stationary statistics of the two-oscillator white-noise Langevin model.

    ``stationary`` holds per-trajectory time averages of ``a * b`` after the
    burn-in, averaged over trajectories; ``lagged`` holds
    ``1/2 <a(t0 + s) b(t0) + b(t0 + s) a(t0)>`` with ``t0`` the end of burn-in.
    """

    times: np.ndarray
    lagged: dict
    stationary: dict
    n_traj: int
    burn_in: float


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def check_timestep(dt: float, omega_max: float) -> None:
    if omega_max > 0 and dt > DT_FACTOR / omega_max * (1 + 1e-12):
        raise ParameterError(
            f"time step {dt:.6g} exceeds {DT_FACTOR}/omega_max = {DT_FACTOR / omega_max:.6g}"
        )


def max_frequency(modes: ModeDecomposition) -> float:
    return float(np.sqrt(np.max(np.abs(modes.squared_frequencies), initial=0.0)))


def _pair_key(pair) -> tuple[str, str]:
    if isinstance(pair, str):
        a, _, b = pair.partition(",")
        pair = (a.strip(), b.strip())
    a, b = pair
    return str(a), str(b)


class _Accumulator:
    """Running mean and sum of squared deviations (Chan et al. combination)."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add_block(self, samples: np.ndarray) -> None:
        """``samples`` has trajectories along axis 0."""
        nb = samples.shape[0]
        mb = samples.mean(axis=0)
        m2b = ((samples - mb) ** 2).sum(axis=0)
        self.merge(nb, mb, m2b)

    def merge(self, nb, mb, m2b):
        if nb == 0:
            return
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + delta**2 * (self.n * nb / n)
        self.n = n

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, np.inf)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _blocks(n_traj: int) -> list[range]:
    return [range(s, min(s + BLOCK_SIZE, n_traj)) for s in range(0, n_traj, BLOCK_SIZE)]


def _run_blocks(func, n_traj: int, workers: int):
    blocks = _blocks(n_traj)
    if workers == 1 or len(blocks) == 1:
        return [func(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, blocks))


def kdk_step(r, p, force, K, inv_m, h):
    """One kick-drift-kick step in place; returns the force at the new positions."""
    p += 0.5 * h * force
    r += h * p * inv_m
    force = -(r @ K)
    p += 0.5 * h * force
    return force


def step(r, p, force, K, inv_m, dt, order=2):
    if order == 2:
        return kdk_step(r, p, force, K, inv_m, dt)
    if order == 4:
        for w in YOSHIDA4:
            force = kdk_step(r, p, force, K, inv_m, w * dt)
        return force
    raise ParameterError(f"integrator order must be 2 or 4, got {order!r}")


def propagate(sys: QuadraticSystem, r0, p0, dt: float, n_steps: int, record_stride: int = 1,
              order: int = 2):
    """Integrate Hamilton's equations and record positions and momenta.

    ``r0`` and ``p0`` may carry leading batch axes. Returns ``(times, R, P)``
    with the time axis first.
    """
    K = np.asarray(sys.stiffness)
    inv_m = sys.inverse_masses
    r = np.array(r0, dtype=float)
    p = np.array(p0, dtype=float)
    force = -(r @ K)
    n_rec = n_steps // record_stride + 1
    R = np.empty((n_rec, *r.shape))
    P = np.empty((n_rec, *p.shape))
    R[0], P[0] = r, p
    k = 1
    for n in range(1, n_steps + 1):
        force = step(r, p, force, K, inv_m, dt, order)
        if n % record_stride == 0:
            R[k], P[k] = r, p
            k += 1
    times = np.arange(n_rec) * record_stride * dt
    return times, R, P


def sample_initial_conditions(modes: ModeDecomposition, cfg: SimConfig, indices: Iterable[int]):
    """Draw equilibrium ``(r0, p0)`` for the given trajectory indices.

    Each normal mode is an independent Gaussian in amplitude and momentum:
    variances ``T / w^2`` and ``T`` classically, ``coth(w/2T)/2w`` and
    ``w coth(w/2T)/2`` for the Wigner distribution.
    """
    kind = CLASSICAL if cfg.sampling == CLASSICAL_SAMPLING else QUANTUM
    wpos = mode_weights(modes, cfg.temperature, kind)
    wmom = wpos * modes.squared_frequencies
    n = len(wpos)
    indices = list(indices)
    z = np.empty((len(indices), 2 * n))
    for row, i in enumerate(indices):
        z[row] = trajectory_rng(cfg.seed, i).standard_normal(2 * n)
    a = z[:, :n] * np.sqrt(wpos)
    b = z[:, n:] * np.sqrt(wmom)
    phi = modes.mode_matrix
    r0 = a @ phi.T
    p0 = (b @ phi.T) * modes.masses
    return r0, p0


def simulate_ensemble(sys: QuadraticSystem, cfg: SimConfig, observables: Sequence) -> EnsembleResult:
    """Equilibrium ensemble of explicit-bath trajectories.

    Parameters
    ----------
    sys : QuadraticSystem
        A bounded system with no zero-frequency modes.
    cfg : SimConfig
        ``sampling`` selects Boltzmann (``classical``) or Wigner (``wigner``)
        initial conditions at ``cfg.temperature``.
    observables : sequence of label pairs
        E.g. ``[("x1", "x1"), ("x1", "x2")]``.

    Returns
    -------
    EnsembleResult
        Lagged and equal-time correlation estimates on the recorded grid.
    """
    modes = decompose(sys)
    modes.require_equilibrium()
    check_timestep(cfg.dt, max_frequency(modes))
    pairs = [_pair_key(o) for o in observables]
    idx = [(sys.index(a), sys.index(b)) for a, b in pairs]
    K = np.asarray(sys.stiffness)
    inv_m = sys.inverse_masses
    n_steps = cfg.n_steps
    n_rec = n_steps // cfg.record_stride + 1

    def run_block(block: range):
        r, p = sample_initial_conditions(modes, cfg, block)
        r_init = r.copy()
        lag = np.empty((len(pairs), n_rec, len(block)))
        eq = np.empty_like(lag)

        def record(k):
            for m_, (a, b) in enumerate(idx):
                lag[m_, k] = 0.5 * (r[:, a] * r_init[:, b] + r[:, b] * r_init[:, a])
                eq[m_, k] = r[:, a] * r[:, b]

        record(0)
        force = -(r @ K)
        k = 1
        for n in range(1, n_steps + 1):
            force = kdk_step(r, p, force, K, inv_m, cfg.dt)
            if n % cfg.record_stride == 0:
                record(k)
                k += 1
        return lag, eq

    results = _run_blocks(run_block, cfg.n_traj, cfg.workers)
    times = np.arange(n_rec) * cfg.record_stride * cfg.dt
    lagged, equal = {}, {}
    for m_, pair in enumerate(pairs):
        acc_l = _Accumulator(n_rec)
        acc_e = _Accumulator(n_rec)
        for lag, eq in results:
            acc_l.add_block(lag[m_].T)
            acc_e.add_block(eq[m_].T)
        lagged[pair] = CorrelationEstimate(times, acc_l.mean, acc_l.stderr(), cfg.n_traj)
        equal[pair] = CorrelationEstimate(times, acc_e.mean, acc_e.stderr(), cfg.n_traj)
    return EnsembleResult(times, lagged, equal, cfg.n_traj)


KICKS = ("x1", "antisymmetric", "symmetric")


def impulse_response(sys: QuadraticSystem, kick: str, J: float, dt: float, t_max: float,
                     order: int = 4) -> ResponseResult:
    """Response of a two-oscillator system at rest to a momentum impulse at t = 0.

    ``kick`` is ``"x1"`` (impulse J on oscillator 1 only), ``"antisymmetric"``
    (+J, -J) or ``"symmetric"`` (+J, +J). Works for unbounded systems too.
    The default integrator is the 4th-order composition of KDK steps.

    The returned series are keyed by coordinate label, plus ``X`` and ``x``
    (centre of mass and separation) and ``v1``, ``v2``.
    """
    if kick not in KICKS:
        raise ParameterError(f"kick must be one of {KICKS}, got {kick!r}")
    i1, i2 = sys.index("x1"), sys.index("x2")
    modes = decompose(sys)
    check_timestep(dt, max_frequency(modes))
    n = len(sys)
    r0 = np.zeros(n)
    p0 = np.zeros(n)
    p0[i1] = J
    if kick == "antisymmetric":
        p0[i2] = -J
    elif kick == "symmetric":
        p0[i2] = J
    n_steps = int(round(t_max / dt))
    times, R, P = propagate(sys, r0, p0, dt, n_steps, order=order)
    series = {label: R[:, i] for i, label in enumerate(sys.labels)}
    series["X"] = 0.5 * (R[:, i1] + R[:, i2])
    series["x"] = R[:, i1] - R[:, i2]
    series["v1"] = P[:, i1] / sys.masses[i1]
    series["v2"] = P[:, i2] / sys.masses[i2]
    return ResponseResult(times, series)


def onset_exponent(times, values, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of log|values| against log t on [t_lo, t_hi]."""
    times = np.asarray(times)
    values = np.abs(np.asarray(values))
    sel = (times >= t_lo * (1 - 1e-9)) & (times <= t_hi * (1 + 1e-9)) & (values > 0)
    if sel.sum() < 2:
        raise ParameterError("not enough nonzero samples to fit an onset exponent")
    slope, _ = np.polyfit(np.log(times[sel]), np.log(values[sel]), 1)
    return float(slope)


def sample_noise(sys: QuadraticSystem, cfg: SimConfig, index: int = 0) -> NoiseRealization:
    """Equilibrium initial conditions for a one-body IO system and its random force."""
    m, omega, bath = extract_io_parameters(sys)
    modes = decompose(sys)
    modes.require_equilibrium()
    r0, p0 = sample_initial_conditions(modes, cfg, [index])
    r0, p0 = r0[0], p0[0]
    s = sys.system_indices[0]
    b = sys.bath_indices
    times = np.arange(cfg.n_steps + 1) * cfg.dt
    return NoiseRealization(times, r0, p0, r0[b], p0[b], _bath_force(bath, r0[s], r0[b], p0[b], times))


def _bath_force(bath, x0, q0, pq0, times):
    if len(bath) == 0:
        return np.zeros_like(times)
    w = bath.frequencies
    c = bath.couplings
    wt = np.outer(times, w)
    qh = (q0 - x0) * np.cos(wt) + pq0 / (bath.masses * w) * np.sin(wt)
    return qh @ c


def _trapezoid_convolution(kernel, rate, dt):
    """int_0^t kernel(t - s) rate(s) ds on the grid, trapezoidal rule."""
    full = scipy.signal.fftconvolve(kernel, rate)[: len(rate)]
    conv = full - 0.5 * (kernel * rate[0] + kernel[0] * rate)
    conv[0] = 0.0
    return dt * conv


def verify_gle_residual(sys: QuadraticSystem, cfg: SimConfig,
                        realization: NoiseRealization | None = None) -> GLEResidual:
    """Check an explicit-bath trajectory against the memory-kernel Langevin equation.

    The system coordinate ``x`` of a one-body IO system is integrated together
    with its bath, and the residual

        m x'' + int_0^t mu(t - s) x'(s) ds + m w^2 x - F(t)

    is evaluated on the grid. Acceleration comes from the force at each step,
    velocity from the integrator's momenta and the convolution from the
    trapezoidal rule. The history starts at t = 0, and ``F`` carries the
    initial displacement ``q_j(0) - x(0)``.
    """
    if len(sys.system_indices) != 1:
        raise UsageError("verify_gle_residual needs a system with a single system coordinate")
    m, omega, bath = extract_io_parameters(sys)
    modes = decompose(sys)
    check_timestep(cfg.dt, max_frequency(modes))
    if realization is None:
        realization = sample_noise(sys, cfg, 0)
    s = sys.system_indices[0]
    n_steps = cfg.n_steps
    times, R, P = propagate(sys, realization.r0, realization.p0, cfg.dt, n_steps)
    if len(realization.force) != len(times):
        raise UsageError("noise realization does not match the simulation grid")
    x = R[:, s]
    v = P[:, s] / m
    accel = -(R @ sys.stiffness[:, s]) / m
    mu = memory_kernel(bath, times).values
    conv = _trapezoid_convolution(mu, v, cfg.dt)
    residual = m * accel + conv + m * omega**2 * x - realization.force
    rms = float(np.sqrt(np.mean(residual**2)))
    scale = float(np.sqrt(np.mean((m * omega**2 * x) ** 2)))
    return GLEResidual(times, residual, rms, rms / scale if scale > 0 else np.inf)


WHITE_NOISE_OBSERVABLES = ("x1", "x2", "v1", "v2", "X", "x", "V", "v")


def _observable(name, r, v):
    if name == "x1":
        return r[:, 0]
    if name == "x2":
        return r[:, 1]
    if name == "v1":
        return v[:, 0]
    if name == "v2":
        return v[:, 1]
    if name == "X":
        return 0.5 * (r[:, 0] + r[:, 1])
    if name == "x":
        return r[:, 0] - r[:, 1]
    if name == "V":
        return 0.5 * (v[:, 0] + v[:, 1])
    if name == "v":
        return v[:, 0] - v[:, 1]
    raise UsageError(f"unknown observable {name!r}; choose from {WHITE_NOISE_OBSERVABLES}")


def white_noise_stationary_covariance(m, omega, gamma, kappa, T) -> np.ndarray:
    """Equilibrium covariance of (x1, x2, v1, v2) for the white-noise model.

    Closed form ``T K_eff^{-1}`` and ``T/m`` with
    ``K_eff = [[m w^2, -kappa], [-kappa, m w^2]]``; the relative sector is
    undamped and keeps its Boltzmann initial distribution.
    """
    k_eff = np.array([[m * omega**2, -kappa], [-kappa, m * omega**2]])
    cov = np.zeros((4, 4))
    cov[:2, :2] = T * np.linalg.inv(k_eff)
    cov[2:, 2:] = (T / m) * np.eye(2)
    return cov


def simulate_gle_white_noise(m: float, omega: float, gamma: float, kappa: float, T: float,
                             cfg: SimConfig, observables: Sequence = (("x1", "x1"), ("x1", "x2"), ("x2", "x2")),
                             burn_in: float | None = None) -> WhiteNoiseResult:
    """Two oscillators with common Ohmic friction and a common white-noise force.

    Equations of motion::

        m x_i'' + m gamma (x1' + x2') + m w^2 x_i - kappa x_other = F(t),
        <F(t) F(s)> = 2 m gamma T delta(t - s).

    Integrated with the BAOAB splitting: half kicks (B), half drifts (A) and
    an exact Ornstein-Uhlenbeck update (O) of the summed velocity. The
    difference velocity is neither damped nor driven. Initial conditions are
    Boltzmann at ``T``; statistics are collected after ``burn_in`` (default
    ``10 / gamma``) over a window of length ``cfg.t_max``.
    """
    if m <= 0 or omega < 0 or gamma <= 0:
        raise ParameterError("need m > 0, omega >= 0 and gamma > 0")
    if T <= 0:
        raise ParameterError("white-noise model needs a positive temperature")
    if not m * omega**2 > abs(kappa):
        raise ParameterError(
            f"unbounded effective potential: need m*omega^2 = {m * omega**2:.6g} > |kappa| = {abs(kappa):.6g}"
        )
    omega_max = np.sqrt(omega**2 + abs(kappa) / m)
    check_timestep(cfg.dt, omega_max)
    burn_in = 10.0 / gamma if burn_in is None else float(burn_in)
    pairs = [_pair_key(o) for o in observables]
    for a, b in pairs:
        if a not in WHITE_NOISE_OBSERVABLES or b not in WHITE_NOISE_OBSERVABLES:
            raise UsageError(f"unknown observable pair {(a, b)}; choose from {WHITE_NOISE_OBSERVABLES}")

    dt = cfg.dt
    n_burn = int(round(burn_in / dt))
    if n_burn < 1:
        raise ParameterError("burn-in must cover at least one time step")
    n_win = cfg.n_steps
    n_total = n_burn + n_win
    stride = cfg.record_stride
    n_rec = n_win // stride + 1
    decay = np.exp(-2.0 * gamma * dt)
    kick = np.sqrt(T / m * (1.0 - decay**2))
    cov0 = white_noise_stationary_covariance(m, omega, gamma, kappa, T)
    chol0 = np.linalg.cholesky(cov0)
    sqrt_half = np.sqrt(0.5)

    def accel(r):
        return (-m * omega**2 * r + kappa * r[:, ::-1]) / m

    def run_block(block: range):
        gens = [trajectory_rng(cfg.seed, i) for i in block]
        nb = len(block)
        state = np.stack([g.standard_normal(4) for g in gens]) @ chol0.T
        r = state[:, :2].copy()
        v = state[:, 2:].copy()
        a = accel(r)
        lag = np.zeros((len(pairs), n_rec, nb))
        stat = np.zeros((len(pairs), nb))
        ref = None
        k = 0
        for start in range(0, n_total, NOISE_CHUNK):
            stop = min(start + NOISE_CHUNK, n_total)
            xi = np.stack([g.standard_normal(stop - start) for g in gens], axis=1)
            for n in range(start, stop):
                v += 0.5 * dt * a
                r += 0.5 * dt * v
                u = (v[:, 0] + v[:, 1]) * sqrt_half
                w = (v[:, 0] - v[:, 1]) * sqrt_half
                u = decay * u + kick * xi[n - start]
                v[:, 0] = (u + w) * sqrt_half
                v[:, 1] = (u - w) * sqrt_half
                r += 0.5 * dt * v
                a = accel(r)
                v += 0.5 * dt * a
                step_index = n + 1 - n_burn
                if step_index < 0:
                    continue
                values = {name: _observable(name, r, v) for pair in pairs for name in pair}
                if step_index == 0:
                    ref = {name: val.copy() for name, val in values.items()}
                for j, (pa, pb) in enumerate(pairs):
                    if step_index > 0:
                        stat[j] += values[pa] * values[pb]
                    if step_index % stride == 0:
                        lag[j, k] = 0.5 * (values[pa] * ref[pb] + values[pb] * ref[pa])
                if step_index % stride == 0:
                    k += 1
        return lag, stat / n_win

    results = _run_blocks(run_block, cfg.n_traj, cfg.workers)
    times = np.arange(n_rec) * stride * dt
    lagged, stationary = {}, {}
    for j, pair in enumerate(pairs):
        acc_l = _Accumulator(n_rec)
        acc_s = _Accumulator(())
        for lag, stat in results:
            acc_l.add_block(lag[j].T)
            acc_s.add_block(stat[j])
        lagged[pair] = CorrelationEstimate(times, acc_l.mean, acc_l.stderr(), cfg.n_traj)
        stationary[pair] = CorrelationEstimate(
            np.array([burn_in]), np.atleast_1d(acc_s.mean), np.atleast_1d(acc_s.stderr()), cfg.n_traj
        )
    return WhiteNoiseResult(times, lagged, stationary, cfg.n_traj, burn_in)
