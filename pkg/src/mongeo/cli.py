"""Command-line front end.

Every command writes its artifacts into ``--out`` (default ``.``) through a
temporary file and a rename, then a ``manifest.json`` listing the resolved
configuration, library versions and the SHA-256 of each artifact.

Settings come from flags, then from ``--config FILE`` (JSON object keyed by
option name), then from built-in defaults.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge or the
evolution hit the blowup guard (artifacts are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .ch import (BLOWUP_LIMIT, ch_evolve, energy_trace, minimality_certificate, peakon_demo)
from .core import JumpRecord, MonotoneMap, TimeGrid
from .energy import FisherRaoOptions, eulerian_energy, relaxed_energy
from .errors import BlowupDetected, MongeoError, ValidationError
from .flow import collapse_demo, fill_jumps, l1_distance
from .hellinger import hellinger_path
from .io import (atomic_write, dumps, map_from_csv, path_from_csv, path_to_csv,
                 profile_from_csv, velocity_from_csv, velocity_to_csv)
from .solver import SolverOptions, refine_map, solve_geodesic
from .svg import line_plot, path_snapshots, trace_plot

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 2, 3

DEFAULTS = {
    "out": ".",
    "nx": None,
    "nt": 32,
    "steps": 32,
    "T": 1.0,
    "init": "hellinger",
    "max_iters": 5000,
    "grad_tol": 1e-6,
    "density_floor": 1e-8,
    "formula": "closed_form",
    "eps": 0.1,
    "refine": 1,
    "seed": 0,
}


class Run:
    """Resolved configuration plus the artifacts written so far."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.out = Path(config["out"]).resolve()
        self.artifacts: dict[str, str] = {}

    def write(self, name: str, data: str) -> None:
        atomic_write(self.out / name, data)
        self.artifacts[name] = hashlib.sha256(data.encode()).hexdigest()

    def finish(self, status: str) -> None:
        manifest = {
            "command": self.command,
            "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in self.config.items()},
            "status": status,
            "versions": {"mongeo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        atomic_write(self.out / "manifest.json", dumps(manifest))


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _load_map(path, nx=None) -> MonotoneMap:
    phi = map_from_csv(_read(path))
    return refine_map(phi, nx) if nx and nx != phi.grid.n else phi


def _load_jumps(path, tgrid: TimeGrid) -> list[JumpRecord]:
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
    entries = data.get("jumps", data) if isinstance(data, dict) else data
    out = []
    for i, e in enumerate(entries):
        try:
            if "left_velocities" in e and "right_velocities" in e:
                jr = JumpRecord(e["location"], e["left_limits"], e["right_limits"],
                                e["left_velocities"], e["right_velocities"])
            else:
                jr = JumpRecord.from_limits(e["location"], e["left_limits"], e["right_limits"], tgrid)
        except KeyError as exc:
            raise ValidationError(f"jump {i}: missing field {exc.args[0]!r}") from None
        if jr.left_limits.size != tgrid.m + 1:
            raise ValidationError(f"jump {i}: expected {tgrid.m + 1} time samples, got {jr.left_limits.size}")
        out.append(jr)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_energy(run: Run) -> int:
    cfg = run.config
    if bool(cfg.get("path")) == bool(cfg.get("velocity")):
        raise ValidationError("energy needs exactly one of --path or --velocity")
    if cfg.get("velocity"):
        v = velocity_from_csv(_read(cfg["velocity"]))
        report = {"eulerian": eulerian_energy(v)}
    else:
        path = path_from_csv(_read(cfg["path"]))
        jumps = _load_jumps(cfg["jumps"], path.tgrid) if cfg.get("jumps") else []
        opts = FisherRaoOptions.floored(cfg["floor"]) if cfg.get("floor") else FisherRaoOptions()
        report = relaxed_energy(path, jumps, opts, formula=cfg["formula"]).to_dict()
    run.write("energy.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_OK


def cmd_geodesic(run: Run) -> int:
    cfg = run.config
    phi0 = _load_map(cfg["from"], cfg["nx"])
    phi1 = _load_map(cfg["to"], cfg["nx"] or phi0.grid.n)
    opts = SolverOptions(max_iters=cfg["max_iters"], grad_tol=cfg["grad_tol"],
                         density_floor=cfg["density_floor"], init=cfg["init"])
    res = solve_geodesic(phi0, phi1, cfg["nt"], opts)
    run.write("path.csv", path_to_csv(res.path))
    run.write("result.json", dumps(res.to_dict()))
    run.write("snapshots.svg", path_snapshots(res.path, "geodesic"))
    if not res.converged:
        print(f"not converged: gradient norm {res.grad_norm:.3e} after {res.iterations} iterations",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_hellinger(run: Run) -> int:
    cfg = run.config
    phi0 = _load_map(cfg["from"], cfg["nx"])
    phi1 = _load_map(cfg["to"], cfg["nx"] or phi0.grid.n)
    rep = hellinger_path(phi0, phi1, cfg["steps"])
    run.write("path.csv", path_to_csv(rep.path))
    run.write("report.json", dumps(rep.to_dict()))
    run.write("snapshots.svg", path_snapshots(rep.path, "Hellinger interpolation"))
    return EXIT_OK


def _trace_csv(t, e, note: str | None = None) -> str:
    lines = ["t,energy"] + [f"{a:.17g},{b:.17g}" for a, b in zip(t, e)]
    if note:
        lines.append(f"# truncated: {note}")
    return "\n".join(lines) + "\n"


def _evolve(cfg):
    grid, v0 = profile_from_csv(_read(cfg["v0"]))
    try:
        v = ch_evolve(v0, cfg["T"], cfg["nt"], grid)
        return v, energy_trace(v), None
    except BlowupDetected as exc:
        return exc.partial, exc.energies, str(exc)


def cmd_evolve(run: Run) -> int:
    v, e, note = _evolve(run.config)
    t = v.tgrid.nodes[:len(e)]
    run.write("velocity.csv", velocity_to_csv(v) + (f"# truncated: {note}\n" if note else ""))
    run.write("energy.csv", _trace_csv(t, e, note))
    run.write("energy.svg", trace_plot(t, e, "energy", "E(t)"))
    if note:
        print(f"blowup guard (max|v_x| dt > {BLOWUP_LIMIT}): {note}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_certify(run: Run) -> int:
    v, _, note = _evolve(run.config)
    if note:
        # only the resolved part of the solution can be certified
        cert = minimality_certificate(v, v.tgrid.T).to_dict()
        cert["truncated"] = note
        run.write("certificate.json", dumps(cert))
        print(f"blowup guard: {note}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    cert = minimality_certificate(v, run.config["T"])
    run.write("certificate.json", dumps(cert.to_dict()))
    print(dumps(cert.to_dict()), end="")
    return EXIT_OK


def cmd_fill(run: Run) -> int:
    cfg = run.config
    path = path_from_csv(_read(cfg["path"]))
    jumps = _load_jumps(cfg["jumps"], path.tgrid)
    res = fill_jumps(path, jumps, cfg["eps"], refine=cfg["refine"])
    before = relaxed_energy(path, jumps)
    after = relaxed_energy(res.path)
    report = {"eps": res.eps, "widths": res.spec.widths.tolist(),
              "energy_in": before.to_dict(), "energy_out": after.to_dict(),
              "l1_distance": l1_distance(res.path, path, jumps)}
    run.write("filled.csv", path_to_csv(res.path))
    run.write("report.json", dumps(report))
    return EXIT_OK


def cmd_demo(run: Run) -> int:
    which = run.config["which"]
    if which == "collapse":
        d = collapse_demo()
        run.write("trajectories.csv", path_to_csv(d.to_half_path))
        expected = {str(x): 1.5 * abs(x - 0.5) ** (2.0 / 3.0) for x in d.arrival_times}
        report = {"arrival_times": {str(k): v for k, v in d.arrival_times.items()},
                  "expected_arrival_times": expected,
                  "stationary_half_max_motion": float(np.max(np.abs(d.stationary_half - 0.5))),
                  "departing_residual": d.departing_residual}
        run.write("collapse.json", dumps(report))
        x = d.to_half_path.sgrid.nodes
        series = [(d.times, d.to_half_path.values[:, j], f"x={x[j]:.3g}") for j in range(x.size)]
        run.write("trajectories.svg", line_plot(series[:9] if len(series) <= 9 else series[::2],
                                                title="particles under the cube-root field",
                                                xlabel="t", ylabel="phi(t, x)"))
        return EXIT_OK
    r = peakon_demo()
    lines = ["t,min_density"] + [f"{a:.17g},{b:.17g}" for a, b in zip(r.times, r.min_density)]
    run.write("min_density.csv", "\n".join(lines) + "\n")
    run.write("min_density.svg", trace_plot(r.times, r.min_density, "peakon collision", "min phi_x"))
    run.write("peakon.json", dumps({"blowup_step": r.blowup_step, "final_time": float(r.times[-1]),
                                    "min_density": float(r.min_density.min())}))
    return EXIT_OK


COMMANDS = {"energy": cmd_energy, "geodesic": cmd_geodesic, "evolve": cmd_evolve,
            "certify": cmd_certify, "hellinger": cmd_hellinger, "fill": cmd_fill, "demo": cmd_demo}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mongeo",
        description=__doc__.split("\n\n")[0],
        epilog="Precedence: flags > --config file > defaults. "
               "MONGEO_THREADS caps worker threads.",
    )
    parser.add_argument("--version", action="version", version=f"mongeo {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", default=None, help="output directory (default .)")
    common.add_argument("--config", default=None, help="JSON file with option values")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized suites")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", parents=[common], help="energy of a path or velocity field")
    p.add_argument("--path", default=None)
    p.add_argument("--velocity", default=None)
    p.add_argument("--jumps", default=None, help="JSON list of jump records")
    p.add_argument("--formula", choices=["closed_form", "as_printed"], default=None)
    p.add_argument("--floor", type=float, default=None, help="Fisher-Rao density floor")

    for name, helptext in (("geodesic", "minimal path between two maps"),
                           ("hellinger", "explicit interpolation path")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--from", dest="from", required=False, default=None)
        p.add_argument("--to", default=None)
        p.add_argument("--nx", type=int, default=None, help="resample maps to this many cells")
        if name == "geodesic":
            p.add_argument("--nt", type=int, default=None)
            p.add_argument("--init", choices=["hellinger", "linear"], default=None)
            p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
            p.add_argument("--grad-tol", dest="grad_tol", type=float, default=None)
            p.add_argument("--density-floor", dest="density_floor", type=float, default=None)
        else:
            p.add_argument("--steps", type=int, default=None)

    for name, helptext in (("evolve", "Camassa-Holm evolution"),
                           ("certify", "short-time minimality certificate")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--v0", default=None, help="initial velocity CSV (m=0)")
        p.add_argument("-T", dest="T", type=float, default=None)
        p.add_argument("--nt", type=int, default=None)

    p = sub.add_parser("fill", parents=[common], help="fill the jumps of a path")
    p.add_argument("--path", default=None)
    p.add_argument("--jumps", default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--refine", type=int, default=None)

    p = sub.add_parser("demo", parents=[common], help="built-in scenarios")
    p.add_argument("which", choices=["collapse", "peakon"])
    return parser


REQUIRED = {"geodesic": ("from", "to"), "hellinger": ("from", "to"), "evolve": ("v0",),
            "certify": ("v0",), "fill": ("path", "jumps")}


def resolve_config(args: argparse.Namespace) -> dict:
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON ({exc.msg})") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    cfg = dict(DEFAULTS)
    cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    cfg.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    if args.command in ("evolve", "certify") and "T" not in file_cfg and args.T is None:
        cfg["T"] = 0.3
    for key in REQUIRED.get(args.command, ()):
        if not cfg.get(key):
            raise ValidationError(f"missing required option --{key}")
    for key in ("from", "to", "path", "jumps", "v0", "velocity"):
        if cfg.get(key):
            cfg[key] = str(Path(cfg[key]).resolve())
    cfg["out"] = str(Path(cfg["out"]).resolve())
    for key in ("nx", "nt", "steps"):
        if cfg.get(key) is not None and int(cfg[key]) < 2:
            raise ValidationError(f"--{key} must be at least 2")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = Run(args.command, cfg)
        code = COMMANDS[args.command](run)
        run.finish({EXIT_OK: "ok", EXIT_NOT_CONVERGED: "not_converged"}.get(code, "error"))
        return code
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MongeoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
