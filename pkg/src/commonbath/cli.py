"""Command-line front end.

Subcommands: check, kernel, spectrum, covariance, response, simulate, sweep.
Exit codes: 0 success, 1 usage or config error, 2 domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import __version__, config as config_mod
from .bath_models import memory_kernel
from .dynamics import (
    SimConfig, impulse_response, simulate_ensemble, simulate_gle_white_noise,
)
from .errors import DomainError, UsageError
from .quad_model import (
    build_two_body_bilinear, build_two_body_common, has_lower_bound, is_io_form, min_potential_eigenvalue,
    rescale_bath_cm, split_cm_rel, to_cm_rel,
)
from .spectrum import CLASSICAL, QUANTUM, covariance, decompose

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3

PAIRS = (("x1", "x1"), ("x1", "x2"), ("x2", "x2"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return format(float(x), ".17g")


class Output:
    """CSV writer with a ``#`` provenance header."""

    def __init__(self, command: str, cfg, args, extra=()):
        self.buf = io.StringIO()
        self.buf.write(f"# commonbath {__version__}\n")
        self.buf.write(f"# command: {command}\n")
        self.buf.write(f"# config: {cfg.path}\n")
        self.buf.write(f"# config_sha256: {cfg.sha256}\n")
        self.buf.write(f"# seed: {seed_of(cfg, args)}\n")
        for line in extra:
            self.buf.write(f"# {line}\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")

    def header(self, columns):
        self.writer.writerow(columns)

    def row(self, values):
        self.writer.writerow([fmt(v) for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


def seed_of(cfg, args) -> int:
    return args.seed if getattr(args, "seed", None) is not None else cfg.simulation["seed"]


def temperature_of(cfg, args) -> float:
    T = args.temperature if args.temperature is not None else cfg.simulation["temperature"]
    if T < 0:
        raise UsageError("temperature must be nonnegative")
    return float(T)


def kind_of(args) -> str:
    return CLASSICAL if args.classical else QUANTUM


def emit(text: str, args, cfg) -> None:
    path = args.out or cfg.output_path
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _grid(t_max: float, dt: float) -> np.ndarray:
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def cmd_check(cfg, args) -> int:
    lines = [f"# commonbath {__version__} check", f"# config: {cfg.path}",
             f"oscillator: m = {fmt(cfg.m)}, omega = {fmt(cfg.omega)}, bath modes = {len(cfg.bath)}"]
    verdict = None
    for name, builder in (("counterterm", build_two_body_common), ("bilinear", build_two_body_bilinear)):
        sys_ = builder(cfg.m, cfg.omega, cfg.bath)
        rep = has_lower_bound(sys_)
        cm = to_cm_rel(sys_)
        h_cm, h_rel = split_cm_rel(cm)
        dK = np.max(np.abs(h_cm.stiffness + h_rel.stiffness - cm.stiffness), initial=0.0)
        dM = np.max(np.abs(h_cm.inverse_masses + h_rel.inverse_masses - cm.inverse_masses), initial=0.0)
        split_ok = dK <= 1e-12 * max(cm.scale, 1.0) and dM <= 1e-12 * np.max(np.abs(cm.inverse_masses))
        cm_rep = is_io_form(h_cm)
        rel_rep = is_io_form(h_rel)
        lines.append(f"[{name}]")
        lines.append(f"min potential eigenvalue: {fmt(min_potential_eigenvalue(sys_))}")
        lines.append(f"bounded: {str(rep.bounded).lower()}")
        lines.append(f"split identity: {'ok' if split_ok else 'FAILED'} (max deviation {dK:.3g})")
        if cm_rep.is_io_form:
            rescale_bath_cm(h_cm)
        lines.append(f"H_cm IO-form: {str(cm_rep.is_io_form).lower()}"
                     + ("" if cm_rep.is_io_form else f" ({'; '.join(cm_rep.violations)})"))
        lines.append(f"H_rel IO-form: {str(rel_rep.is_io_form).lower()}"
                     + ("" if rel_rep.is_io_form else f" ({'; '.join(rel_rep.violations)})"))
        if name == "counterterm":
            verdict = rep.bounded
            total = float(np.sum(cfg.bath.couplings))
            lines.append(f"boundary: m*omega^2 - sum_j m_j w_j^2 = {fmt(cfg.m * cfg.omega**2 - total)}")
    emit("\n".join(lines) + "\n", args, cfg)
    return EXIT_OK if verdict else EXIT_DOMAIN


def cmd_kernel(cfg, args) -> int:
    t_max = args.t_max or cfg.kernel.get("t_max") or cfg.simulation["t_max"]
    dt = args.dt or cfg.kernel.get("dt") or cfg.simulation["dt"]
    times = _grid(t_max, dt)
    ks = memory_kernel(cfg.bath, times)
    out = Output("kernel", cfg, args, [f"mu_zero: {fmt(ks.mu_zero)}"])
    if cfg.spectral is not None:
        cont = cfg.spectral.continuum_kernel(times)
        out.header(["t", "mu", "mu_continuum"])
        for row in zip(times, ks.values, cont):
            out.row(row)
    else:
        out.header(["t", "mu"])
        for row in zip(times, ks.values):
            out.row(row)
    emit(out.text(), args, cfg)
    return EXIT_OK


def _model(cfg, args):
    builder = build_two_body_bilinear if args.model == "bilinear" else build_two_body_common
    return builder(cfg.m, cfg.omega, cfg.bath)


def cmd_spectrum(cfg, args) -> int:
    modes = decompose(_model(cfg, args))
    out = Output("spectrum", cfg, args, [f"model: {args.model}", f"indefinite: {str(modes.indefinite).lower()}"])
    out.header(["k", "squared_frequency", "frequency"])
    for k, w2 in enumerate(modes.squared_frequencies):
        out.row([k, w2, np.sqrt(w2) if w2 >= 0 else float("nan")])
    emit(out.text(), args, cfg)
    return EXIT_OK


def _covariance_rows(cfg, args, T):
    cov = covariance(_model(cfg, args), T, kind_of(args))
    x11, x12, x22 = cov["x1", "x1"], cov["x1", "x2"], cov["x2", "x2"]
    return [
        ("x1", "x1", x11), ("x1", "x2", x12), ("x2", "x2", x22),
        ("X", "X", 0.25 * (x11 + 2 * x12 + x22)),
        ("x", "x", x11 - 2 * x12 + x22),
        ("X", "x", 0.5 * (x11 - x22)),
    ]


def cmd_covariance(cfg, args) -> int:
    T = temperature_of(cfg, args)
    rows = _covariance_rows(cfg, args, T)
    out = Output("covariance", cfg, args, [f"model: {args.model}", f"kind: {kind_of(args)}", f"temperature: {fmt(T)}"])
    out.header(["i", "j", "value"])
    for row in rows:
        out.row(row)
    emit(out.text(), args, cfg)
    return EXIT_OK


def cmd_response(cfg, args) -> int:
    kick = args.kick or cfg.response["kick"]
    dt = args.dt or cfg.response.get("dt") or cfg.simulation["dt"]
    t_max = args.t_max or cfg.response.get("t_max") or cfg.simulation["t_max"]
    J = cfg.response["J"]
    res = impulse_response(_model(cfg, args), kick, J, dt, t_max)
    out = Output("response", cfg, args, [f"model: {args.model}", f"kick: {kick}", f"J: {fmt(J)}"])
    cols = ["x1", "x2", "X", "x", "v1", "v2"]
    out.header(["t", *cols])
    for k, t in enumerate(res.times):
        out.row([t, *(res[c][k] for c in cols)])
    emit(out.text(), args, cfg)
    return EXIT_OK


def _sim_config(cfg, args) -> SimConfig:
    s = cfg.simulation
    T = temperature_of(cfg, args)
    sampling = s["sampling"]
    if args.classical:
        sampling = "classical"
    elif args.quantum:
        sampling = "wigner"
    return SimConfig(
        dt=args.dt or s["dt"], t_max=args.t_max or s["t_max"], n_traj=args.n_traj or s["n_traj"],
        seed=seed_of(cfg, args), sampling=sampling, temperature=T,
        record_stride=s["record_stride"], workers=args.workers or s["workers"],
    )


def cmd_simulate(cfg, args) -> int:
    sim = _sim_config(cfg, args)
    if cfg.simulation["method"] == "white_noise":
        if cfg.spectral is None:
            raise UsageError(f"{cfg.path}: method = white_noise needs an ohmic bath (gamma)")
        kappa = cfg.simulation.get("kappa", float(np.sum(cfg.bath.couplings)))
        res = simulate_gle_white_noise(
            cfg.m, cfg.omega, cfg.spectral.gamma, kappa, sim.temperature, sim,
            PAIRS + (("v1", "v1"), ("v1", "v2")), burn_in=cfg.simulation.get("burn_in"),
        )
        extra = ["method: white_noise", f"kappa: {fmt(kappa)}", f"burn_in: {fmt(res.burn_in)}",
                 f"n_traj: {sim.n_traj}", f"dt: {fmt(sim.dt)}"]
        extra += [f"stationary {a}{b}: {fmt(e.mean[0])} +- {fmt(e.stderr[0])}" for (a, b), e in res.stationary.items()]
        out = Output("simulate", cfg, args, extra)
        pairs = list(res.lagged)
        out.header(["t", *(f"{a}{b}_{s}" for a, b in pairs for s in ("mean", "stderr"))])
        for k, t in enumerate(res.times):
            out.row([t, *(v for p in pairs for v in (res.lagged[p].mean[k], res.lagged[p].stderr[k]))])
    else:
        res = simulate_ensemble(_model(cfg, args), sim, PAIRS)
        extra = ["method: explicit", f"model: {args.model}", f"sampling: {sim.sampling}",
                 f"temperature: {fmt(sim.temperature)}", f"n_traj: {sim.n_traj}", f"dt: {fmt(sim.dt)}"]
        out = Output("simulate", cfg, args, extra)
        cols = []
        for a, b in PAIRS:
            cols += [f"lag_{a}{b}_mean", f"lag_{a}{b}_stderr", f"eq_{a}{b}_mean", f"eq_{a}{b}_stderr"]
        out.header(["t", *cols])
        for k, t in enumerate(res.times):
            row = [t]
            for p in PAIRS:
                row += [res.lagged[p].mean[k], res.lagged[p].stderr[k],
                        res.equal_time[p].mean[k], res.equal_time[p].stderr[k]]
            out.row(row)
    emit(out.text(), args, cfg)
    return EXIT_OK


def _parse_observable(text: str) -> tuple[str, str]:
    if "," in text:
        a, b = (s.strip() for s in text.split(",", 1))
        return a, b
    for a in ("x1", "x2", "X", "x"):
        if text.startswith(a) and text[len(a):] in ("x1", "x2", "X", "x"):
            return a, text[len(a):]
    raise UsageError(f"cannot parse observable {text!r}; use e.g. x1x2 or x1,x2")


def cmd_sweep(cfg, args) -> int:
    if args.param is None or args.from_ is None or args.to is None or args.steps is None:
        raise UsageError("sweep needs --param, --from, --to and --steps")
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    grid = np.linspace(args.from_, args.to, args.steps) if args.steps > 1 else np.array([args.from_])
    obs = _parse_observable(args.observable)
    out = Output("sweep", cfg, args, [f"model: {args.model}", f"kind: {kind_of(args)}",
                                      f"param: {args.param}", f"observable: {obs[0]},{obs[1]}"])
    out.header([args.param, "bounded", "value"])
    T0 = temperature_of(cfg, args)
    for value in grid:
        if args.param == "temperature":
            point, T = cfg, float(value)
        else:
            point, T = cfg.with_bath_parameter(args.param, float(value)), T0
        rows = {(i, j): v for i, j, v in _covariance_rows_safe(point, args, T)}
        bounded = bool(rows)
        val = rows.get(obs, rows.get(obs[::-1], float("nan")))
        out.row([value, bounded, val])
    emit(out.text(), args, cfg)
    return EXIT_OK


def _covariance_rows_safe(cfg, args, T):
    try:
        return _covariance_rows(cfg, args, T)
    except DomainError:
        return []


COMMANDS = {
    "check": cmd_check, "kernel": cmd_kernel, "spectrum": cmd_spectrum, "covariance": cmd_covariance,
    "response": cmd_response, "simulate": cmd_simulate, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    kind = common.add_mutually_exclusive_group()
    kind.add_argument("--quantum", action="store_true", help="quantum moments / Wigner sampling (default)")
    kind.add_argument("--classical", action="store_true", help="classical moments / Boltzmann sampling")
    common.add_argument("--temperature", type=float)
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--n-traj", dest="n_traj", type=int)
    common.add_argument("--workers", type=int, help="worker threads for simulate")
    common.add_argument("--model", choices=("common", "bilinear"), default="common",
                        help="two-body Hamiltonian with or without the counterterm")
    common.add_argument("--kick", choices=("x1", "antisymmetric", "symmetric"))
    common.add_argument("--param", choices=("gamma", "cutoff", "temperature"))
    common.add_argument("--from", dest="from_", type=float)
    common.add_argument("--to", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--observable", default="x1x2", help="sweep observable, e.g. x1x2 or x,x")

    parser = _Parser(prog="commonbath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"commonbath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("commonbath: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = config_mod.load(args.config)
    except UsageError as exc:
        print(f"commonbath: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"commonbath: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"commonbath: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"commonbath: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"commonbath: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
