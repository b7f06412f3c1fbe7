"""Command line: quasilevel <command> --config run.json --out results/

Exit status 0 on success, 1 on a domain error (critical level, degenerate
case, ...), 2 on a bad config or bad arguments.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as qio
from . import render as rnd
from .errors import ConfigError, DomainError, QuasilevelError
from .qp_core import AffineEmbedding, QuasiperiodicFunction, TrigSeries

COMMANDS = ("trace", "surface", "decompose", "interval", "zones", "profile4d", "separator", "verify4d", "render",
            "selftest")

FUNCTION_KEYS = {"preset", "dimension", "amplitudes", "terms", "constant", "lift"}
DIRECTION_KEYS = {"covector", "covectors", "l1", "l2", "Q"}
SWEEP_KEYS = {"samples", "c_policy", "limit"}
TOP_KEYS = {"function", "direction", "sweep", "level", "levels", "offset", "window", "h", "resolution", "tol",
            "seed", "threads", "cache_dir", "t_samples", "sample_count", "timing", "centre"}


@dataclass
class RunConfig:
    function: dict
    direction: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    levels: list = field(default_factory=lambda: [0.0])
    offset: list | None = None
    centre: list = field(default_factory=lambda: [0.0, 0.0])
    window: float = 8.0
    h: float = 1.0 / 32
    resolution: int = 24
    tol: float = 1e-3
    seed: int = 0
    threads: int = 1
    cache_dir: str | None = None
    t_samples: int = 16
    sample_count: int = 30
    timing: bool = False

    def to_json(self):
        return {"function": self.function, "direction": self.direction, "sweep": self.sweep, "levels": self.levels,
                "offset": self.offset, "centre": self.centre, "window": self.window, "h": self.h, "resolution": self.resolution,
                "tol": self.tol, "seed": self.seed, "t_samples": self.t_samples, "sample_count": self.sample_count}

    def series(self) -> TrigSeries:
        return build_series(self.function)


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _fail(msg, key, text):
    ln = _line_of(text, key)
    where = f" (line {ln})" if ln else ""
    raise ConfigError(f"key {key!r}{where}: {msg}")


def _check_keys(d, allowed, text, scope):
    if not isinstance(d, dict):
        _fail(f"{scope} must be an object", scope, text)
    for k in d:
        if k not in allowed:
            _fail(f"unknown key in {scope}", k, text)


def build_series(spec) -> TrigSeries:
    preset = spec.get("preset")
    n = int(spec.get("dimension", 3))
    if preset is None:
        f = TrigSeries.from_terms(n, [])
    elif preset == "cos_sum":
        f = TrigSeries.cos_sum(n, spec.get("amplitudes"))
    elif preset == "sin_sum":
        f = TrigSeries.sin_sum(n, spec.get("amplitudes"))
    else:
        raise ConfigError(f"key 'preset': unknown preset {preset!r}")
    lift = int(spec.get("lift", 0))
    if lift:
        f = f.lift(lift)
    if spec.get("terms"):
        dim = f.dimension
        f = f + TrigSeries.from_terms(dim, [(tuple(m), complex(c[0], c[1]) if isinstance(c, list) else c)
                                            for m, c in spec["terms"]])
    if spec.get("constant"):
        f = f + float(spec["constant"])
    return f


def parse_config(text, source="<config>") -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be an object")
    _check_keys(d, TOP_KEYS, text, "config")
    if "function" not in d:
        raise ConfigError(f"{source}: missing key 'function'")
    _check_keys(d["function"], FUNCTION_KEYS, text, "function")
    _check_keys(d.get("direction", {}), DIRECTION_KEYS, text, "direction")
    _check_keys(d.get("sweep", {}), SWEEP_KEYS, text, "sweep")
    for k in ("window", "h", "tol"):
        if k in d and not (isinstance(d[k], (int, float)) and d[k] > 0):
            _fail("must be a positive number", k, text)
    for k in ("resolution", "threads", "t_samples", "sample_count"):
        if k in d and not (isinstance(d[k], int) and d[k] > 0):
            _fail("must be a positive integer", k, text)
    if "seed" in d and not isinstance(d["seed"], int):
        _fail("must be an integer", "seed", text)
    levels = d.get("levels", [d["level"]] if "level" in d else [0.0])
    if not isinstance(levels, list) or not all(isinstance(v, (int, float)) for v in levels):
        _fail("must be a number or list of numbers", "levels" if "levels" in d else "level", text)
    try:
        build_series(d["function"])
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        _fail(f"invalid function spec: {e}", "function", text)
    cfg = RunConfig(d["function"], d.get("direction", {}), d.get("sweep", {}), [float(v) for v in levels],
                    d.get("offset"))
    for k in ("window", "h", "tol"):
        if k in d:
            setattr(cfg, k, float(d[k]))
    for k in ("resolution", "threads", "t_samples", "sample_count", "seed"):
        if k in d:
            setattr(cfg, k, int(d[k]))
    if "centre" in d:
        if not (isinstance(d["centre"], list) and len(d["centre"]) == 2):
            _fail("must be a list of two numbers", "centre", text)
        cfg.centre = [float(v) for v in d["centre"]]
    cfg.cache_dir = d.get("cache_dir")
    cfg.timing = bool(d.get("timing", False))
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text, str(path))


# ------------------------------------------------------------ commands ----

def _plane_function(f, cfg):
    from .plane_trace import PlaneSlice, slice_function
    if f.dimension == 2:
        return QuasiperiodicFunction(f, AffineEmbedding(np.eye(2), np.zeros(2)))
    B = np.atleast_2d(np.asarray(cfg.direction.get("covectors", cfg.direction.get("covector")), dtype=float))
    a = cfg.offset if cfg.offset is not None else [0.0] * B.shape[0]
    return slice_function(f, PlaneSlice.from_covectors(B, a))


def _direction(cfg):
    if "covector" not in cfg.direction:
        raise ConfigError("key 'direction': need 'covector' for this command")
    return np.asarray(cfg.direction["covector"], dtype=float)


def _pair(cfg):
    from .torus4 import DirectionPair
    d = cfg.direction
    if "l1" not in d or "l2" not in d:
        raise ConfigError("key 'direction': need 'l1' and 'l2' for four quasiperiods")
    return DirectionPair(d["l1"], d["l2"], int(d.get("Q", 1000)))


def cmd_trace(cfg, f):
    from .plane_trace import classify_and_fit, trace_level
    from .errors import TooShort
    qp2 = _plane_function(f, cfg)
    out = []
    rows = []
    for c in cfg.levels:
        trajs = trace_level(qp2, c, cfg.window, cfg.h, centre=tuple(cfg.centre))
        for i, t in enumerate(trajs):
            fit = None
            if not t.closed and t.diameter() >= cfg.window:
                # short pieces cut off by the window edge have no meaningful direction
                try:
                    fit = classify_and_fit(t)
                except TooShort:
                    pass
            direction = None if fit is None or fit.direction is None else [float(v) for v in fit.direction]
            dev = None if fit is None or fit.kind == "Compact" else fit.deviation_sup
            rows.append([len(rows), t.closed, t.diameter(), direction, dev, c])
        out.append(("trace", {"level": c, "trajectories": [t.to_json() for t in trajs]}))
    table = (["id", "closed", "diameter", "direction", "deviation", "level"], rows)
    return out, table


def cmd_surface(cfg, f):
    from .torus3 import extract_level_surface
    out = []
    for c in cfg.levels:
        M = extract_level_surface(f, c, cfg.resolution)
        comps = [{"chi": int(s.chi), "genus": int(s.genus), "class": [int(v) for v in s.homology],
                  "triangles": int(len(s.triangles))} for s in M.components]
        out.append(("surface", {"level": c, "resolution": cfg.resolution, "components": comps}))
    rows = [[i, p["level"], x["chi"], x["genus"], x["class"]] for i, (_, p) in enumerate(out)
            for x in p["components"]]
    return out, (["id", "level", "chi", "genus", "class"], rows)


def cmd_decompose(cfg, f):
    from .torus3 import verdict
    B = _direction(cfg)
    out, rows = [], []
    for c in cfg.levels:
        v = verdict(f, B, c, resolution=cfg.resolution)
        out.append(("decompose", {"level": c, "direction": B.tolist(), "verdict": v.to_json()}))
        rows.append([c, v.kind, None if v.mu is None else [int(x) for x in v.mu], v.count])
    return out, (["level", "kind", "mu", "count"], rows)


def cmd_interval(cfg, f):
    from .torus3 import energy_interval
    B = _direction(cfg)
    U = energy_interval(f, B, tol=cfg.tol, resolution=cfg.resolution)
    return [("interval", {"direction": B.tolist(), "interval": U.to_json()})], \
        (["kind", "lo", "hi", "tol"], [[U.kind, U.lo, U.hi, U.tol]])


def cmd_zones(cfg, f):
    from .atlas import sweep
    sw = cfg.sweep
    zm = sweep(f, sw.get("c_policy", "symmetric"), int(sw.get("samples", 2000)), c=cfg.levels[0],
               resolution=cfg.resolution, threads=cfg.threads, cache_dir=cfg.cache_dir, limit=sw.get("limit"),
               tol=cfg.tol)
    rows = [[s.index, *[float(v) for v in s.direction], s.kind, None if s.mu is None else list(s.mu), s.nudged]
            for s in zm.samples]
    return [("zones", {"zonemap": zm.to_json()})], (["index", "x", "y", "z", "kind", "mu", "nudged"], rows)


def _profile(cfg, f, dp):
    from .torus4 import slice_profile
    return slice_profile(f, dp, cfg.t_samples, cfg.tol, cfg.resolution, threads=cfg.threads)


def cmd_profile4d(cfg, f):
    dp = _pair(cfg)
    P = _profile(cfg, f, dp)
    rows = [[float(t), k, l, h, None if m is None else list(m)] for t, k, l, h, m in
            zip(P.t, P.kinds, P.lo, P.hi, P.labels)]
    return [("profile4d", {"pair": dp.to_json(), "profile": P.to_json()})], (["t", "kind", "lo", "hi", "label"], rows)


def cmd_separator(cfg, f):
    from .torus4 import base_function, construct_separator
    dp = _pair(cfg)
    P = _profile(cfg, f, dp)
    out, rows = [], []
    for c in cfg.levels:
        S = construct_separator(f, dp, c, P)
        payload = {"level": c, "pair": dp.to_json(), "separator": S.to_json(), "base_grid": None,
                   "base_levels": list(S.base_levels)}
        if S.kind == "fbar":
            G, _ = base_function(f, dp, P.label)
            payload["base_grid"] = G.tolist()
        out.append(("separator", payload))
        rows.append([c, S.kind, list(S.klass), S.position])
    return out, (["level", "kind", "class", "position"], rows)


def cmd_verify4d(cfg, f):
    from .torus4 import construct_separator, verify_theorem1
    dp = _pair(cfg)
    P = _profile(cfg, f, dp)
    out, rows = [], []
    for c in cfg.levels:
        S = construct_separator(f, dp, c, P)
        r = verify_theorem1(f, dp, c, cfg.sample_count, cfg.window, cfg.h, separator=S, seed=cfg.seed,
                            threads=cfg.threads)
        out.append(("verify4d", {"level": c, "separator": S.to_json(), "report": r.to_json()}))
        rows.append([c, r.open_count, r.compact_count, r.C, r.D, r.stable])
    return out, (["level", "open", "compact", "C", "D", "stable"], rows)


HANDLERS = {"trace": cmd_trace, "surface": cmd_surface, "decompose": cmd_decompose, "interval": cmd_interval,
            "zones": cmd_zones, "profile4d": cmd_profile4d, "separator": cmd_separator, "verify4d": cmd_verify4d}


def _write_outputs(out_dir, name, records, table):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    qio.write_records(out_dir / f"{name}.jsonl", records)
    if table is not None:
        qio.atomic_write(out_dir / f"{name}.csv", qio.to_csv(*table))
    svgs = []
    for i, r in enumerate(records):
        try:
            svgs.append(rnd.render_record(r))
        except QuasilevelError:
            continue
    for i, s in enumerate(svgs):
        qio.atomic_write(out_dir / (f"{name}.svg" if len(svgs) == 1 else f"{name}-{i}.svg"), s)


def run_pipeline(command, cfg: RunConfig, out_dir):
    f = cfg.series()
    t0 = time.perf_counter()
    items, table = HANDLERS[command](cfg, f)
    dt = time.perf_counter() - t0 if cfg.timing else 0.0
    chash = qio.config_hash(cfg.to_json())
    records = [qio.ResultRecord(chash, op, payload, dt) for op, payload in items]
    if out_dir is not None:
        _write_outputs(out_dir, command, records, table)
    return records


def cmd_render(paths, out_dir):
    n = 0
    for p in paths:
        for i, r in enumerate(qio.read_records(p, strict=True)):
            svg = rnd.render_record(r)
            qio.atomic_write(Path(out_dir) / f"{Path(p).stem}-{i}.svg", svg)
            n += 1
    return n


def selftest(verbose=True):
    """The quick examples with exactly known answers."""
    from .atlas import symmetric_level_check
    from .plane_trace import torus2_level_classes
    from .qp_core import evaluate, irrationality_degree
    from .torus3 import extract_level_surface

    f2 = TrigSeries.cos_sum(2)
    qp = QuasiperiodicFunction(f2, AffineEmbedding(np.eye(2), np.zeros(2)))
    f3 = TrigSeries.cos_sum(3)
    checks = [
        ("evaluate at origin", lambda: abs(evaluate(qp, [0.0, 0.0]) - 2.0) < 1e-12),
        ("periodicity", lambda: abs(evaluate(qp, [0.3, 0.7]) - evaluate(qp, [1.3, -0.3])) < 1e-12),
        ("rational covector degree", lambda: irrationality_degree([1.0, 2.0, 3.0]) == 1),
        ("T^2 classes at c=1.2", lambda: torus2_level_classes(f2, 1.2) == [(0, 0)]),
        ("sphere at c=2.5", lambda: [s.chi for s in extract_level_surface(f3, 2.5, 16).components] == [2]),
        ("cos-sum antisymmetric", lambda: symmetric_level_check(f3, (0.5, 0.5, 0.5))),
        ("constant breaks antisymmetry", lambda: not symmetric_level_check(f3 + 0.1, (0.5, 0.5, 0.5))),
    ]
    ok = True
    for name, fn in checks:
        try:
            res = bool(fn())
        except Exception as e:          # a crash is a failure here
            res = False
            name += f" ({type(e).__name__}: {e})"
        ok &= res
        if verbose:
            print(f"{'PASS' if res else 'FAIL'}  {name}")
    return ok


def build_parser():
    ap = argparse.ArgumentParser(prog="quasilevel", description="Level lines of quasiperiodic functions.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "selftest":
            continue
        if name == "render":
            p.add_argument("inputs", nargs="+", help="record files (JSON lines)")
            p.add_argument("--out", default=".")
            continue
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--resolution", type=int)
        p.add_argument("--window", type=float)
        p.add_argument("--tol", type=float)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "selftest":
            return 0 if selftest() else 1
        if args.command == "render":
            cmd_render(args.inputs, args.out)
            return 0
        cfg = load_config(args.config)
        for k in ("threads", "seed", "resolution", "window", "tol"):
            v = getattr(args, k)
            if v is not None:
                if k in ("window", "tol") and v <= 0 or k in ("threads", "resolution") and v < 1:
                    raise ConfigError(f"--{k} must be positive")
                setattr(cfg, k, v)
        recs = run_pipeline(args.command, cfg, args.out)
        if args.out is None:
            for r in recs:
                print(r.to_line())
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
