"""Command-line front end.

Settings are layered: built-in defaults, then an optional ``--preset``, then
the ``--config`` file (YAML, or a manifest written by an earlier run), then
individual flags. Exit codes: 0 ok, 2 configuration, 3 instability,
4 insufficient data, 5 trapping detected.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import make_grid, sample_field, speed_from_dict
from .core.phantom import phantom_from_dict
from .core.sensors import build_sensor_ring
from .errors import CFLError, ConfigError, InstabilityError, InsufficientDataError
from .metrics import NORMS, crossing_time, disc_mask, error_sweep, noise_experiment
from .rays import RaySeed, classify_trapping, default_seeds, tangential_seeds, trace_ray
from .time_reversal import (
    ReversalParams,
    field_to_csv,
    field_to_pgm,
    reverse,
    write_field,
)
from .wave_fwd import BoundaryTrace, SimParams, Snapshot, simulate_forward

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_DATA, EXIT_TRAPPED = 0, 2, 3, 4, 5

DEFAULTS: dict = {
    "speed": {"kind": "radial", "amplitude": 0.15, "oscillations": 3.0},
    "phantom": {"preset": "two_disc", "sigma": 0.08},
    "grid": {"h_forward": 0.01, "h_reconstruct": 0.01, "reconstruct_halfwidth": 1.2},
    "cfl": 0.5,
    "eps": 1.0,
    "T": 6.0,
    # start may be "crossing"; stop may be a number or "<k>x" (k times the crossing time)
    "T_list": {"start": "crossing", "stop": 8.0, "count": 13},
    "t_final": None,
    "snapshot_times": [],
    "norm": "h1",
    "seed": 0,
    "noise": {"amplitudes": []},
    "rays": {
        "seeds": "lattice",
        "spacing": 0.25,
        "n_angles": 16,
        "radii": [0.6, 0.75, 0.9],
        "t_max": 100.0,
        "dt": 0.001,
        "r_escape": 2.0,
        "save_paths": 4,
    },
    "jobs": 1,
}

PRESETS: dict[str, dict] = {
    "fig2": {"speed": {"kind": "radial"}, "phantom": {"preset": "comb"}, "norm": "h1"},
    "fig3": {"speed": {"kind": "bump"}, "phantom": {"preset": "comb"}, "norm": "h1"},
    "fig4": {
        "speed": {"kind": "crater"},
        "phantom": {"preset": "comb"},
        "norm": "l2",
        "T_list": {"stop": "5x"},
    },
    "fig5": {
        "speed": {"kind": "paraboloid"},
        "phantom": {"preset": "comb"},
        "norm": "l2",
        "T_list": {"stop": "5x"},
        "grid": {"h_forward": 0.02, "h_reconstruct": 0.02},
    },
}


# --------------------------------------------------------------------------
# config loading


def _line_marks(node, path=(), marks=None) -> dict:
    marks = {} if marks is None else marks
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_marks(v, path + (k.value,), marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_marks(v, path + (i,), marks)
    return marks


@dataclass
class Source:
    name: str
    marks: dict
    prefix: tuple = ()

    def where(self, path: tuple) -> str:
        full = self.prefix + tuple(path)
        while full and full not in self.marks:
            full = full[:-1]
        line = self.marks.get(full)
        return f"{self.name}:{line}" if line else self.name


def _merge(base: dict, over: dict, src: Source | None, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            where = src.where(path + (k,)) if src else "<preset>"
            raise ConfigError(f"{where}: unknown key {'.'.join(map(str, path + (k,)))!r}")
        # speed and phantom are replaced wholesale when the kind/preset changes
        if isinstance(v, dict) and isinstance(base[k], dict) and k not in ("speed", "phantom"):
            out[k] = _merge(base[k], v, src, path + (k,))
        elif k == "speed" and isinstance(v, dict):
            out[k] = dict(v) if v.get("kind", base[k].get("kind")) != base[k].get("kind") else {**base[k], **v}
        elif k == "phantom" and isinstance(v, dict):
            out[k] = {**base[k], **v}
            if "ellipses" in v:
                out[k].pop("preset", None)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | None, preset: str | None = None) -> tuple[dict, Source]:
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[preset], None)
    if path is None:
        return cfg, Source("<defaults>", {})
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    if data is None:
        return cfg, Source(path, {})
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a mapping")
    marks = _line_marks(node)
    prefix = ()
    if data.get("tool") == "tatsim" and "config" in data:
        data, prefix = data["config"], ("config",)
    src = Source(str(path), marks, prefix)
    return _merge(cfg, data, src), src


@dataclass
class Run:
    cfg: dict
    speed: object
    phantom: object
    src: Source


def _num(cfg, key, src, positive=True):
    v = cfg
    for k in key:
        v = v[k]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{src.where(key)}: {'.'.join(key)} must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{src.where(key)}: {'.'.join(key)} must be positive, got {v}")
    return float(v)


def validate(cfg: dict, src: Source) -> Run:
    try:
        speed = speed_from_dict(cfg["speed"])
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"{src.where(('speed',))}: bad speed profile: {e}") from None
    try:
        phantom = phantom_from_dict(cfg["phantom"])
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"{src.where(('phantom',))}: bad phantom: {e}") from None
    for key in (("grid", "h_forward"), ("grid", "h_reconstruct"), ("grid", "reconstruct_halfwidth"),
                ("eps",), ("T",), ("cfl",)):
        _num(cfg, key, src)
    if not cfg["cfl"] <= 1:
        raise ConfigError(f"{src.where(('cfl',))}: cfl must lie in (0, 1], got {cfg['cfl']}")
    if cfg["grid"]["reconstruct_halfwidth"] <= 1 + cfg["grid"]["h_reconstruct"]:
        raise ConfigError(f"{src.where(('grid', 'reconstruct_halfwidth'))}: square must contain the unit circle")
    if cfg["norm"] not in NORMS:
        raise ConfigError(f"{src.where(('norm',))}: norm must be one of {sorted(NORMS)}")
    if cfg["t_final"] is not None:
        _num(cfg, ("t_final",), src)
    if not isinstance(cfg["seed"], int):
        raise ConfigError(f"{src.where(('seed',))}: seed must be an integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError(f"{src.where(('jobs',))}: jobs must be a positive integer")
    run = Run(cfg, speed, phantom, src)
    t_list(run)
    return run


def t_list(run: Run) -> list[float]:
    spec, src = run.cfg["T_list"], run.src
    if isinstance(spec, list):
        try:
            return [float(t) for t in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"{src.where(('T_list',))}: T_list entries must be numbers") from None
    if not isinstance(spec, dict):
        raise ConfigError(f"{src.where(('T_list',))}: T_list must be a list or a start/stop/count mapping")
    tc = crossing_time(run.speed)

    def resolve(key):
        v = spec[key]
        if v == "crossing":
            return tc
        if isinstance(v, str) and v.endswith("x"):
            try:
                return float(v[:-1]) * tc
            except ValueError:
                pass
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        raise ConfigError(f"{src.where(('T_list', key))}: cannot read T_list.{key}={v!r}")

    count = spec.get("count")
    if not isinstance(count, int) or count < 1:
        raise ConfigError(f"{src.where(('T_list', 'count'))}: count must be a positive integer")
    return [float(t) for t in np.linspace(resolve("start"), resolve("stop"), count)]


# --------------------------------------------------------------------------
# helpers


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def write_manifest(out: Path, command: str, cfg: dict, outputs: list[Path], t0: float, inputs=()) -> Path:
    path = out / f"manifest_{command}.json"
    man = {
        "tool": "tatsim",
        "version": __version__,
        "command": command,
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "inputs": [{"path": str(p), "sha256": _sha(Path(p))} for p in inputs],
        "outputs": [{"path": p.name, "sha256": _sha(p)} for p in outputs],
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }
    path.write_text(json.dumps(man, indent=2) + "\n")
    return path


def recon_grid(cfg):
    a = cfg["grid"]["reconstruct_halfwidth"]
    return make_grid(-a, a, cfg["grid"]["h_reconstruct"])


def _read_trace(path) -> BoundaryTrace:
    if path is None:
        raise ConfigError("--trace is required")
    if not Path(path).exists():
        raise ConfigError(f"trace file {path} not found")
    return BoundaryTrace.read(path)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(run: Run, out: Path, args) -> int:
    t0 = time.perf_counter()
    cfg = run.cfg
    need = max([cfg["T"]] + t_list(run))
    t_final = cfg["t_final"] if cfg["t_final"] is not None else need
    rg = recon_grid(cfg)
    h = cfg["grid"]["h_forward"]
    snap_grid = rg if abs(rg.h - h) <= 1e-12 * h else None
    P = SimParams.auto(h, t_final, run.speed, cfg["cfl"], cfg["snapshot_times"], snap_grid)
    ring = build_sensor_ring(P.grid)
    print(f"sensors: {len(ring)}")
    print(f"domain half-width a: {-P.grid.origin[0]:.6g}")
    print(f"dt: {P.dt:.6g}")
    print(f"n_steps: {P.n_steps}")
    trace, snaps = simulate_forward(P, run.speed, run.phantom, ring)
    outputs = [out / "trace.bin"]
    trace.write(outputs[0])
    for s in snaps:
        p = out / f"snapshot_{s.step:07d}.npz"
        s.save(p)
        outputs.append(p)
        print(f"snapshot: step {s.step} t={s.time:.6g} -> {p.name}")
    write_manifest(out, "simulate", cfg, outputs, t0)
    return EXIT_OK


def cmd_reconstruct(run: Run, out: Path, args) -> int:
    t0 = time.perf_counter()
    cfg = run.cfg
    trace = _read_trace(args.trace)
    inputs = [args.trace]
    snap = None
    if args.exact_snapshot:
        snap = Snapshot.load(args.exact_snapshot)
        inputs.append(args.exact_snapshot)
        grid = snap.p.grid
        T = snap.time
    else:
        grid = recon_grid(cfg)
        T = cfg["T"]
    if T > trace.duration + 1e-9:
        raise ConfigError(f"T={T} exceeds trace duration {trace.duration:.6g}")
    ring = build_sensor_ring(grid)
    params = ReversalParams.create(grid, T, run.speed, eps=cfg["eps"], cfl=cfg["cfl"], snapshot=snap)
    rec = reverse(params, trace, run.speed, ring)
    outputs = [out / "recon.bin", out / "recon.csv", out / "recon.pgm"]
    write_field(rec.field, outputs[0])
    field_to_csv(rec.field, outputs[1])
    field_to_pgm(rec.field, outputs[2])
    f = sample_field(run.phantom, grid)
    m = disc_mask(grid, ring=ring)
    diff = rec.field - f
    print(f"mode: {params.mode}  T: {params.T:.6g}  eps: {params.eps:g}")
    print(f"L2 error: {NORMS['l2'](diff, m):.6e}")
    print(f"H1 error: {NORMS['h1'](diff, m):.6e}")
    if snap is not None:
        inside = ring.inside()
        rel = float(np.max(np.abs(diff.values[inside])) / max(np.max(np.abs(f.values)), 1e-300))
        print(f"round-trip max error / max|f|: {rel:.3e}")
    write_manifest(out, "reconstruct", cfg, outputs, t0, inputs)
    return EXIT_OK


def cmd_sweep(run: Run, out: Path, args) -> int:
    t0 = time.perf_counter()
    cfg = run.cfg
    trace = _read_trace(args.trace)
    rg = recon_grid(cfg)
    ring = build_sensor_ring(rg)
    Ts = t_list(run)
    res = error_sweep(trace, run.speed, run.phantom, ring, Ts, cfg["eps"], cfg["norm"], cfg["cfl"], cfg["jobs"])
    outputs = [out / "sweep.csv", out / "sweep.svg", out / "sweep.txt"]
    res.to_csv(outputs[0])
    res.to_svg(outputs[1])
    outputs[2].write_text(res.summary())
    print(res.summary(), end="")
    amps = cfg["noise"]["amplitudes"]
    if amps:
        pts = noise_experiment(trace, amps, cfg["seed"], cfg["T"], run.speed, run.phantom, ring,
                               cfg["eps"], cfg["norm"], cfg["cfl"])
        p = out / "noise.csv"
        p.write_text("amplitude,error\n" + "".join(f"{a!r},{e!r}\n" for a, e in pts))
        outputs.append(p)
    write_manifest(out, "sweep", cfg, outputs, t0, [args.trace])
    return EXIT_OK


def cmd_rays(run: Run, out: Path, args) -> int:
    t0 = time.perf_counter()
    rc = run.cfg["rays"]
    if rc["seeds"] == "lattice":
        seeds = default_seeds(rc["spacing"], rc["n_angles"])
    elif rc["seeds"] == "tangential":
        seeds = tangential_seeds(rc["radii"], rc["n_angles"])
    else:
        raise ConfigError(f"{run.src.where(('rays', 'seeds'))}: seeds must be 'lattice' or 'tangential'")
    rep = classify_trapping(run.speed, seeds, rc["t_max"], rc["dt"], rc["r_escape"], run.cfg["jobs"])
    print(rep.table())
    outputs = [out / "rays.csv", out / "rays.txt"]
    rep.to_csv(outputs[0])
    outputs[1].write_text(rep.table() + "\n")
    trapped = [v.seed for v in rep.verdicts if not v.escaped]
    stride = max(1, int(round(0.05 / rc["dt"])))
    for k, seed in enumerate((trapped or seeds)[: rc["save_paths"]]):
        p = out / f"ray_{k:03d}.csv"
        trace_ray(RaySeed(seed.x0, seed.xi0), run.speed, rc["t_max"], rc["dt"], rc["r_escape"], stride).to_csv(p)
        outputs.append(p)
    write_manifest(out, "rays", run.cfg, outputs, t0)
    return EXIT_OK if rep.n_trapped == 0 else EXIT_TRAPPED


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "rays": cmd_rays,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tatsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tatsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "print-default-config"):
        s = sub.add_parser(name)
        s.add_argument("--preset", choices=sorted(PRESETS))
        if name == "print-default-config":
            continue
        s.add_argument("--config", help="YAML config or a manifest from an earlier run")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--jobs", type=int)
        s.add_argument("--seed", type=int)
        if name in ("reconstruct", "sweep"):
            s.add_argument("--trace", help="TATTRACE1 file from 'simulate'")
            s.add_argument("--eps", type=float)
        if name == "reconstruct":
            s.add_argument("--T", type=float, dest="T")
            s.add_argument("--exact-snapshot", help="snapshot .npz for exact reversal")
        if name == "sweep":
            s.add_argument("--T-list", dest="T_list", help="comma-separated cutoff times")
            s.add_argument("--norm", choices=sorted(NORMS))
            s.add_argument("--T", type=float, dest="T", help="cutoff time for the noise experiment")
    return p


def _apply_flags(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    for key in ("jobs", "seed", "eps", "T", "norm"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    v = getattr(args, "T_list", None)
    if v is not None:
        try:
            cfg["T_list"] = [float(t) for t in v.split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"--T-list: cannot parse {v!r}") from None
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "print-default-config":
            cfg, _ = load_config(None, args.preset)
            sys.stdout.write(yaml.safe_dump(cfg, sort_keys=False))
            return EXIT_OK
        cfg, src = load_config(args.config, args.preset)
        run = validate(_apply_flags(cfg, args), src)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](run, out, args)
    except InstabilityError as e:
        print(f"error: numerical instability at {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    except InsufficientDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, CFLError, FileNotFoundError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
