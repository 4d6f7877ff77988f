"""Run configuration: a sectioned ``key = value`` text format.

Example::

    [oscillator]
    m = 1.0
    omega = 1.0

    [bath]
    type = explicit          # or: ohmic
    masses = 1.0, 2.0
    frequencies = 0.5, 3.0
    # ohmic: gamma = 0.1, cutoff = 10, n_modes = 256

    [simulation]
    dt = 0.01
    t_max = 10
    n_traj = 1000
    seed = 42
    sampling = wigner        # or: classical
    temperature = 0.0

Every value is validated while parsing and errors carry the file name and
line number of the offending key.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .bath_models import DEFAULT_N_MODES, SpectralModel, default_cutoff, discretize_ohmic
from .errors import DomainError, UsageError
from .quad_model import BathSpec


class ConfigError(UsageError):
    pass


SCHEMA = {
    "oscillator": {"m": float, "omega": float},
    "bath": {
        "type": str, "masses": "floats", "frequencies": "floats",
        "gamma": float, "cutoff": float, "n_modes": int,
    },
    "simulation": {
        "method": str, "dt": float, "t_max": float, "n_traj": int, "seed": int,
        "sampling": str, "temperature": float, "record_stride": int, "workers": int,
        "kappa": float, "burn_in": float,
    },
    "response": {"kick": str, "J": float, "dt": float, "t_max": float},
    "kernel": {"dt": float, "t_max": float},
    "output": {"path": str},
}

SIM_DEFAULTS = {
    "method": "explicit", "dt": 0.01, "t_max": 10.0, "n_traj": 1000, "seed": 0,
    "sampling": "classical", "temperature": 0.0, "record_stride": 1, "workers": 1,
}


@dataclass
class Entry:
    value: object
    line: int


@dataclass
class RunConfig:
    path: str
    sha256: str
    m: float
    omega: float
    bath_type: str
    bath: BathSpec
    spectral: SpectralModel | None
    simulation: dict = field(default_factory=dict)
    response: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    output_path: str | None = None
    lines: dict = field(default_factory=dict)

    def where(self, section: str, key: str) -> str:
        line = self.lines.get((section, key))
        return f"{self.path}:{line}" if line else self.path

    def with_bath_parameter(self, name: str, value: float) -> "RunConfig":
        """Copy with one Ohmic parameter replaced (used by parameter sweeps)."""
        if self.spectral is None:
            raise ConfigError(f"{self.path}: sweeping {name} needs an ohmic bath")
        s = self.spectral
        kwargs = dict(gamma=s.gamma, cutoff=s.cutoff, particle_mass=s.particle_mass, n_modes=s.n_modes)
        kwargs[name] = value
        model = SpectralModel(**kwargs)
        out = RunConfig(**{**self.__dict__})
        out.spectral = model
        out.bath = discretize_ohmic(model)
        return out


def _convert(kind, raw: str, where: str, key: str):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            value = int(raw, 0)
            return value
        if kind == "floats":
            parts = [p.strip() for p in raw.split(",")]
            return [float(p) for p in parts if p]
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {key} = {raw!r}") from None


def parse_text(text: str, path: str = "<config>") -> dict:
    """Parse the raw ``[section] key = value`` structure, keeping line numbers."""
    sections: dict[str, dict[str, Entry]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith(";"):
            continue
        where = f"{path}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {raw.strip()!r}")
            current = line[1:-1].strip()
            if current not in SCHEMA:
                raise ConfigError(f"{where}: unknown section [{current}]")
            if current in sections:
                raise ConfigError(f"{where}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"{where}: key outside of any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA[current]:
            raise ConfigError(f"{where}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ConfigError(f"{where}: duplicate key {key!r} in [{current}]")
        sections[current][key] = Entry(_convert(SCHEMA[current][key], value.strip(), where, key), lineno)
    return sections


def _require(sections, section, key, path):
    try:
        return sections[section][key]
    except KeyError:
        raise ConfigError(f"{path}: missing required key {key!r} in [{section}]") from None


def build(sections: dict, path: str = "<config>", sha256: str = "") -> RunConfig:
    lines = {(s, k): e.line for s, entries in sections.items() for k, e in entries.items()}

    def at(section, key):
        return f"{path}:{lines.get((section, key), '?')}"

    def check(cond, section, key, message):
        if not cond:
            raise ConfigError(f"{at(section, key)}: {key}: {message}")

    m = _require(sections, "oscillator", "m", path).value
    omega = _require(sections, "oscillator", "omega", path).value
    check(m > 0, "oscillator", "m", "must be positive")
    check(omega >= 0, "oscillator", "omega", "must be nonnegative")

    bath_sec = sections.get("bath", {})
    bath_type = bath_sec["type"].value if "type" in bath_sec else "explicit"
    explicit_keys = {"masses", "frequencies"} & bath_sec.keys()
    ohmic_keys = {"gamma", "cutoff", "n_modes"} & bath_sec.keys()
    spectral = None
    if bath_type == "explicit":
        for key in sorted(ohmic_keys):
            check(False, "bath", key, "only valid for type = ohmic")
        masses = bath_sec["masses"].value if "masses" in bath_sec else []
        freqs = bath_sec["frequencies"].value if "frequencies" in bath_sec else []
        check(len(masses) == len(freqs), "bath", "frequencies" if "frequencies" in bath_sec else "masses",
              f"got {len(masses)} masses but {len(freqs)} frequencies")
        for key, values in (("masses", masses), ("frequencies", freqs)):
            check(all(v > 0 for v in values), "bath", key, "all entries must be positive")
        bath = BathSpec.from_arrays(masses, freqs) if masses else BathSpec()
    elif bath_type == "ohmic":
        for key in sorted(explicit_keys):
            check(False, "bath", key, "only valid for type = explicit")
        gamma = _require(sections, "bath", "gamma", path).value
        check(gamma > 0, "bath", "gamma", "must be positive")
        cutoff = bath_sec["cutoff"].value if "cutoff" in bath_sec else default_cutoff(omega, gamma)
        check(cutoff > 0, "bath", "cutoff", "must be positive")
        n_modes = bath_sec["n_modes"].value if "n_modes" in bath_sec else DEFAULT_N_MODES
        check(n_modes >= 1, "bath", "n_modes", "must be a positive integer")
        spectral = SpectralModel(gamma=gamma, cutoff=cutoff, particle_mass=m, n_modes=n_modes)
        bath = discretize_ohmic(spectral)
    else:
        raise ConfigError(f"{at('bath', 'type')}: type: expected 'explicit' or 'ohmic', got {bath_type!r}")

    sim = dict(SIM_DEFAULTS)
    sim.update({k: e.value for k, e in sections.get("simulation", {}).items()})
    for key in ("dt", "t_max"):
        check(sim[key] > 0, "simulation", key, "must be positive")
    for key in ("n_traj", "record_stride", "workers"):
        check(sim[key] >= 1, "simulation", key, "must be a positive integer")
    check(0 <= sim["seed"] < 2**64, "simulation", "seed", "must be an unsigned 64-bit integer")
    check(sim["sampling"] in ("classical", "wigner"), "simulation", "sampling", "expected 'classical' or 'wigner'")
    check(sim["temperature"] >= 0, "simulation", "temperature", "must be nonnegative")
    check(sim["method"] in ("explicit", "white_noise"), "simulation", "method",
          "expected 'explicit' or 'white_noise'")
    if "burn_in" in sim:
        check(sim["burn_in"] > 0, "simulation", "burn_in", "must be positive")

    response = {"kick": "x1", "J": 1.0}
    response.update({k: e.value for k, e in sections.get("response", {}).items()})
    check(response["kick"] in ("x1", "antisymmetric", "symmetric"), "response", "kick",
          "expected x1, antisymmetric or symmetric")
    kernel = {k: e.value for k, e in sections.get("kernel", {}).items()}
    for sec, values in (("response", response), ("kernel", kernel)):
        for key in ("dt", "t_max"):
            if key in values:
                check(values[key] > 0, sec, key, "must be positive")

    out = sections.get("output", {}).get("path")
    return RunConfig(
        path=path, sha256=sha256, m=m, omega=omega, bath_type=bath_type, bath=bath, spectral=spectral,
        simulation=sim, response=response, kernel=kernel,
        output_path=None if out is None else out.value, lines=lines,
    )


def load(path: str | Path) -> RunConfig:
    """Read and validate a configuration file.

    Raises ``ConfigError`` for malformed content and ``OSError`` if the file
    cannot be read.
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not valid UTF-8") from None
    sections = parse_text(text, str(path))
    try:
        return build(sections, str(path), hashlib.sha256(data).hexdigest())
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from None
