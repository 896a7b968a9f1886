"""``chanep`` command line.

Exit codes: 0 success, 2 invalid input, 3 precondition not met,
4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from chanep import __version__
from chanep import channels as ch
from chanep import circuits, io, simplex, spectral, tomography
from chanep.errors import ChannelError, ConvergenceError, EigenSolverError, PreconditionError

EXIT_OK, EXIT_INVALID, EXIT_PRECONDITION, EXIT_CONVERGENCE = 0, 2, 3, 4

GLOBAL_DEFAULTS = {"tol": None, "format": None, "out": None, "seed": 0}
COMMAND_DEFAULTS = {
    "sweep": {"pair": "E1,E2", "points": 101, "tomography": False, "shots": 4096, "tol": spectral.PHASE_TOL,
              "format": "csv"},
    "ep-find": {"pair": None, "triple": None, "tol": 1e-12, "format": "json"},
    "phase-diagram": {"triple": "E1,E2,E3", "resolution": 200, "tol": spectral.PHASE_TOL, "format": "csv"},
    "decompose": {"tol": 1e-8, "format": "json"},
    "qpt": {"shots": 4096, "exact": False, "noise": 0.0, "tol": 1e-10, "format": "json"},
    "channels": {"tol": ch.DEFAULT_TOL, "format": "text"},
}


class CLIError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


# --- channel arguments ------------------------------------------------------

def resolve_channel(spec: str) -> tuple[str, np.ndarray]:
    """Fixture name, ``name:arg,...`` (e.g. ``depolarizing:0.5``, ``interp:0.25``), or a JSON file."""
    name, _, arg = spec.partition(":")
    if name == "interp":
        try:
            p = float(arg)
        except ValueError:
            raise ChannelError(f"interp needs a number, got {arg!r}") from None
        if not 0.0 <= p <= 1.0:
            raise ChannelError("interp parameter must lie in [0, 1]")
        return spec, ch.interpolate(ch.e1(), ch.e2(), p)
    if name in ch.builtin_names():
        try:
            args = [float(a) for a in arg.split(",")] if arg else []
        except ValueError:
            raise ChannelError(f"bad fixture arguments in {spec!r}") from None
        if name == "rotation":
            if len(args) != 4:
                raise ChannelError("rotation takes nx,ny,nz,angle")
            args = [args[:3], args[3]]
        try:
            return spec, ch.builtin(name, *args)
        except TypeError:
            raise ChannelError(f"wrong number of arguments for {name}") from None
    if Path(spec).is_file():
        return io.load_channel(spec)
    raise ChannelError(f"unknown channel {spec!r}: not a fixture ({', '.join(ch.builtin_names())}, interp:p) "
                       f"and not a file")


def physical_channel(spec: str) -> tuple[str, np.ndarray]:
    name, S = resolve_channel(spec)
    rep = ch.check_cptp(S)
    if not rep.ok:
        raise ChannelError(f"channel {spec!r} is not CPTP (min Choi eigenvalue {rep.min_choi_eigenvalue:.3e}, "
                           f"TP residual {rep.tp_residual:.3e})")
    return name, S


def _split(value: str, n: int, flag: str) -> list[str]:
    parts = _split_specs(value)
    if len(parts) != n:
        raise ChannelError(f"{flag} takes {n} comma-separated channels, got {value!r}")
    return parts


def _split_specs(value: str) -> list[str]:
    """Split on commas, keeping numeric fixture arguments (``rotation:0,0,1,1.5``) attached."""
    out: list[str] = []
    for piece in value.split(","):
        piece = piece.strip()
        if out and ":" in out[-1] and _is_number(piece):
            out[-1] += "," + piece
        else:
            out.append(piece)
    return [p for p in out if p]


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# --- output -----------------------------------------------------------------

def _header(cfg: dict) -> dict:
    return {"chanep_version": __version__, "config": cfg, "seed": cfg.get("seed")}


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_out(payload: dict, cfg: dict) -> None:
    doc = dict(_header(cfg))
    doc.update(payload)
    _emit(io.dumps(doc), cfg["out"])


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# --- commands ---------------------------------------------------------------

def cmd_channels(cfg: dict) -> int:
    if cfg["action"] == "list":
        rows = [(n, "fixture") for n in ch.builtin_names()] + [("interp:p", "E1 -> E2 interpolation")]
        if cfg["format"] == "json":
            _json_out({"channels": [n for n, _ in rows]}, cfg)
        else:
            _emit("".join(f"{n}\t{d}\n" for n, d in rows), cfg["out"])
        return EXIT_OK
    if not cfg.get("name"):
        raise CLIError("channels show needs a channel name or file")
    name, S = resolve_channel(cfg["name"])
    rep = ch.check_cptp(S, cfg["tol"])
    aff = None
    try:
        aff = ch.superop_to_affine(S)
    except ChannelError:
        pass
    if cfg["format"] == "json":
        _json_out({
            "channel": io.channel_to_json(S, name, "affine" if aff is not None else "superop"),
            "cptp": {"is_cp": rep.is_cp, "is_tp": rep.is_tp,
                     "min_choi_eigenvalue": rep.min_choi_eigenvalue, "tp_residual": rep.tp_residual},
        }, cfg)
    else:
        lines = [f"name: {name}"]
        if aff is not None:
            lines.append("distortion:")
            lines += ["  " + "  ".join(format(v, ".15g") for v in row) for row in aff.distortion]
            lines.append("shift: " + "  ".join(format(v, ".15g") for v in aff.shift))
        else:
            lines.append("superoperator (no real affine form):")
            lines += ["  " + "  ".join(format(complex(v), ".15g") for v in row) for row in S]
        lines.append(f"is_cp: {str(rep.is_cp).lower()}")
        lines.append(f"is_tp: {str(rep.is_tp).lower()}")
        lines.append(f"min_choi_eigenvalue: {rep.min_choi_eigenvalue:.15g}")
        lines.append(f"tp_residual: {rep.tp_residual:.15g}")
        _emit("\n".join(lines) + "\n", cfg["out"])
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_sweep(cfg: dict) -> int:
    a, b = (physical_channel(s)[1] for s in _split(cfg["pair"], 2, "--pair"))
    n = int(cfg["points"])
    if n < 2:
        raise CLIError("--points must be at least 2")
    ps = np.linspace(0.0, 1.0, n)
    reports = [spectrum_of(ch.interpolate(a, b, p), cfg["tol"]) for p in ps]
    w = spectral.track_branches(np.array([r.eigenvalues for r in reports]))
    cols = ["p"] + [f"{part}_lambda{k}" for k in (1, 2, 3) for part in ("re", "im")] + ["phase", "min_rigidity"]
    est = None
    if cfg["tomography"]:
        seeds = np.random.SeedSequence(cfg["seed"]).spawn(n)
        fits = [tomography.full_pipeline(ch.interpolate(a, b, p), int(cfg["shots"]), s) for p, s in zip(ps, seeds)]
        est = spectral.track_branches(np.array([f.eigenvalues for f in fits]))
        cols += [f"{part}_est{k}" for k in (1, 2, 3) for part in ("re", "im")] + ["fidelity"]
    rows = []
    for i, p in enumerate(ps):
        row = [p]
        for z in w[i]:
            row += [z.real, z.imag]
        row += [str(reports[i].phase), float(reports[i].rigidities.min())]
        if est is not None:
            for z in est[i]:
                row += [z.real, z.imag]
            row.append(fits[i].fidelity)
        rows.append(row)
    if cfg["format"] == "json":
        _json_out({"columns": cols, "rows": rows}, cfg)
    else:
        _emit(io.csv_text(cols, rows, _header(cfg)), cfg["out"])
    return EXIT_OK


def spectrum_of(S, tol):
    return spectral.spectrum(ch.distortion_of(S), tol)


def cmd_ep_find(cfg: dict) -> int:
    if bool(cfg.get("pair")) == bool(cfg.get("triple")):
        raise CLIError("ep-find needs exactly one of --pair or --triple")
    if cfg.get("pair"):
        a, b = (physical_channel(s)[1] for s in _split(cfg["pair"], 2, "--pair"))
        Da, Db = ch.distortion_of(a), ch.distortion_of(b)
        rec = spectral.ep_locate_1d(lambda p: (1 - p) * Da + p * Db, 0.0, 1.0, tol=cfg["tol"])
    else:
        chans = [physical_channel(s)[1] for s in _split(cfg["triple"], 3, "--triple")]
        rec = simplex.ep3_search(chans)
    _json_out({"ep": rec.to_dict()}, cfg)
    return EXIT_OK


def cmd_phase_diagram(cfg: dict) -> int:
    chans = [physical_channel(s)[1] for s in _split(cfg["triple"], 3, "--triple")]
    R = int(cfg["resolution"])
    if R < 2:
        raise CLIError("--resolution must be at least 2")
    pd = simplex.phase_diagram(chans, R, tol=cfg["tol"])
    cols = ["a1", "a2", "a3", "phase", "min_rigidity"]
    if cfg["format"] == "json":
        payload = {"columns": cols, "rows": [list(r) for r in pd.csv_rows()]}
        payload.update(pd.sidecar())
        _json_out(payload, cfg)
        return EXIT_OK
    _emit(io.csv_text(cols, pd.csv_rows(), _header(cfg)), cfg["out"])
    if cfg["out"]:
        side = dict(_header(cfg))
        side.update(pd.sidecar())
        Path(cfg["out"]).with_suffix(".json").write_text(io.dumps(side))
    return EXIT_OK


def cmd_decompose(cfg: dict) -> int:
    name, S = physical_channel(cfg["channel"])
    code = EXIT_OK
    try:
        d = circuits.decompose(S, tol=cfg["tol"], seed=cfg["seed"])
    except ConvergenceError as err:
        d, code = err.best, EXIT_CONVERGENCE
    check = circuits.verify_decomposition(S, d)
    report = dict(_header(cfg))
    report.update({"channel": name, "residual": check["distance"], "q1_cptp": check["q1_cptp"],
                   "q2_cptp": check["q2_cptp"], "converged": code == EXIT_OK,
                   "angles": d.angles.tolist()})
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        d.q1.save(out / "q1.circ")
        d.q2.save(out / "q2.circ")
        (out / "report.json").write_text(io.dumps(report))
    sys.stdout.write(io.dumps(report))
    if code != EXIT_OK:
        sys.stderr.write(f"error: decomposition residual {check['distance']:.3e} above {cfg['tol']:.1e}\n")
    return code


def cmd_qpt(cfg: dict) -> int:
    name, S = physical_channel(cfg["channel"])
    shots = None if cfg["exact"] else int(cfg["shots"])
    if shots is not None and shots < 1:
        raise CLIError("--shots must be at least 1")
    t = tomography.exact_table(S, cfg["noise"]) if shots is None else \
        tomography.simulate_experiment(S, shots, cfg["seed"], cfg["noise"])
    rec = tomography.mle_cptp_fit(t, rel_tol=cfg["tol"])
    eig = spectrum_of(rec.superop, spectral.PHASE_TOL).eigenvalues
    cp = rec.cptp
    _json_out({
        "channel": name,
        "counts": t.to_json(),
        "reconstruction": io.channel_to_json(rec.superop, f"mle({name})", "superop"),
        "choi": [[_cplx(z) for z in row] for row in rec.choi],
        "neg_log_likelihood": rec.neg_log_likelihood,
        "iterations": rec.iterations,
        "converged": rec.converged,
        "cptp": {"is_cp": cp.is_cp, "is_tp": cp.is_tp},
        "fidelity": tomography.process_fidelity(rec.superop, S),
        "eigenvalues": [_cplx(z) for z in eig],
        "linear_inversion_is_cp": ch.check_cptp(tomography.linear_inversion(t)).is_cp,
    }, cfg)
    return EXIT_OK


COMMANDS = {
    "channels": cmd_channels,
    "sweep": cmd_sweep,
    "ep-find": cmd_ep_find,
    "phase-diagram": cmd_phase_diagram,
    "decompose": cmd_decompose,
    "qpt": cmd_qpt,
}


# --- parsing ----------------------------------------------------------------

def _global_flags() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g.add_argument("--tol", type=float, help="primary tolerance of the command")
    g.add_argument("--format", choices=["csv", "json", "text"])
    g.add_argument("--out", help="output file (directory for decompose)")
    g.add_argument("--seed", type=int)
    g.add_argument("--config", help="JSON file of flag values; flags given on the line win")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    p = argparse.ArgumentParser(prog="chanep", parents=[common],
                                description="Exceptional points of single-qubit channels.")
    p.add_argument("--version", action="version", version=f"chanep {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    c = sub.add_parser("channels", parents=[common], help="list fixtures or show one channel")
    c.add_argument("action", choices=["list", "show"])
    c.add_argument("name", nargs="?", help="channel spec for show")

    s = sub.add_parser("sweep", parents=[common], help="eigenvalues along a two-channel interpolation")
    s.add_argument("--pair", default=S, help="two channel specs, comma separated (default E1,E2)")
    s.add_argument("--points", type=int, default=S, help="grid points over p in [0, 1] (default 101)")
    s.add_argument("--tomography", action="store_true", default=S,
                   help="add simulated-tomography estimates per point")
    s.add_argument("--shots", type=int, default=S, help="shots per setting (default 4096)")

    e = sub.add_parser("ep-find", parents=[common], help="locate an EP on a pair or triple interpolation")
    e.add_argument("--pair", default=S, help="two channel specs: EP2 on the interpolation")
    e.add_argument("--triple", default=S, help="three channel specs: EP3 on the simplex")

    d = sub.add_parser("phase-diagram", parents=[common], help="phase diagram over a three-channel simplex")
    d.add_argument("--triple", default=S, help="three channel specs (default E1,E2,E3)")
    d.add_argument("--resolution", type=int, default=S, help="lattice divisions per edge (default 200)")

    k = sub.add_parser("decompose", parents=[common], help="compile a channel into two template circuits")
    k.add_argument("channel", help="channel spec")

    q = sub.add_parser("qpt", parents=[common], help="simulated process tomography with MLE reconstruction")
    q.add_argument("channel", help="channel spec")
    q.add_argument("--shots", type=int, default=S, help="shots per setting (default 4096)")
    q.add_argument("--exact", action="store_true", default=S, help="use exact probabilities")
    q.add_argument("--noise", type=float, default=S, help="depolarizing strength added to the channel")
    return p


def resolve_config(ns: argparse.Namespace) -> dict:
    given = vars(ns).copy()
    command = given.pop("command")
    cfg_path = given.pop("config", None)
    file_cfg = {}
    if cfg_path:
        try:
            file_cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise CLIError(f"cannot read config {cfg_path}: {err}") from None
        if not isinstance(file_cfg, dict):
            raise CLIError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    cfg = dict(GLOBAL_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[command])
    unknown = set(file_cfg) - set(cfg) - set(given)
    if unknown:
        raise CLIError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg.update(file_cfg)
    cfg.update(given)
    cfg["command"] = command
    if cfg["tol"] is None or not cfg["tol"] > 0:
        raise CLIError("--tol must be positive")
    if command != "channels" and cfg["format"] == "text":
        raise CLIError("--format text is only available for 'channels'")
    if command == "channels" and cfg["format"] == "csv":
        cfg["format"] = "text"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        return COMMANDS[cfg["command"]](cfg)
    except CLIError as err:
        sys.stderr.write(f"error: {err}\n")
        return err.code
    except ChannelError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INVALID
    except PreconditionError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_PRECONDITION
    except (ConvergenceError, EigenSolverError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_CONVERGENCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
