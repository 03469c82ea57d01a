"""Command-line pipelines: generate, pack, percolate, estimate, certify, sweep.

Options come from an optional flat ``key = value`` config file (``--config``)
and from flags; flags win.  Exit codes: 0 success, 1 failed certificate or
invalid packing, 2 bad configuration, 3 infeasible certifier search,
4 generator capacity exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import generators as gen
from .certify import InfeasibleError, certify_general_theorem, certify_square_theorem, max_certified_p, refine_alpha_table
from .circlepack import PlanarMap, Triangulation, TriangulationError, compute_radii, extend_to_triangulation, layout
from .geometry import GeometryError, Packing, validate_packing
from .graph import build_graph
from .percolation import (Crossing, EventSpec, ReachDistance, crossing_event, default_workers, monte_carlo,
                          reach_event, sample_bonds, sample_sites, window_of)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CAPACITY = 0, 1, 2, 3, 4
RECORD_FIELDS = ("event", "p", "trials", "hits", "phat", "ci_lo", "ci_hi", "seed")


class ConfigError(ValueError):
    pass


def parse_p(text) -> float:
    """Probability literal: a float, ``e-26`` (meaning exp(-26)) or ``exp(-26)``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    try:
        if s.startswith("exp(") and s.endswith(")"):
            return math.exp(float(s[4:-1]))
        if s.startswith("e") and len(s) > 1:
            return math.exp(float(s[1:]))
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse probability {text!r}") from None


def parse_grid(text) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    s = str(text).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:step")
        a, b, h = (parse_p(x) for x in parts)
        if not h > 0 or b < a:
            raise ConfigError(f"grid {text!r} is empty")
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [round(a + k * h, 12) for k in range(n)]
    return [parse_p(x) for x in s.split(",") if x.strip()]


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


# key -> (type, help)
FAMILY_KEYS = {
    "family": (str, "packing family: " + ", ".join(gen.FAMILIES)),
    "packing": (str, "read the packing from this JSON file instead of a family"),
    "n": (int, "window size"),
    "levels": (int, "rings of triangle-times-n"),
    "M": (float, "aspect (ellipse-ladder) or lens disks per pair (bond-counterexample)"),
    "lines": (int, "rows of the ellipse ladder"),
    "length": (int, "ellipses per ladder row"),
    "gap": (float, "extra same-side row spacing of the ladder"),
    "depth": (int, "quadtree depth"),
    "split": (float, "quadtree split probability"),
    "tiling_seed": (int, "seed of the random quadtree tiling"),
    "degree": (int, "vertex degree of the hyperbolic ball"),
    "generations": (int, "generations of the hyperbolic ball"),
}
EVENT_KEYS = {
    "event": (str, "crossing or reach"),
    "mode": (str, "site or bond"),
    "direction": (str, "left-right or top-bottom"),
    "color": (str, "open or closed"),
    "diagonal": (_bool, "allow corner-only contacts"),
    "source": (int, "source shape of reach events"),
    "r": (float, "reach distance"),
    "tol": (float, "relative adjacency tolerance"),
}
MC_KEYS = {
    "p": (parse_p, "retention probability"),
    "trials": (int, "Monte Carlo trials"),
    "seed": (int, "master seed (mandatory)"),
    "workers": (int, "worker threads (default PACKPERC_THREADS or 1)"),
    "format": (str, "json or csv"),
}
CERT_KEYS = {
    "p": (parse_p, "probability to certify (square theorem)"),
    "d": (int, "dimension (general theorem)"),
    "epsilon": (float, "regularity constant (general theorem)"),
    "C": (float, "decay-rate multiplier (general theorem)"),
    "m0": (int, "fix m0 instead of searching"),
    "max_p": (_bool, "report the largest certified p for squares"),
    "alpha_table": (_bool, "also refine the alpha table"),
    "k_max": (int, "alpha table: largest k"),
    "r_max": (float, "alpha table: largest r"),
    "step": (float, "alpha table: grid step"),
}
PACK_KEYS = {
    "input": (str, "JSON file with faces (disk triangulation) or rotation (planar map)"),
    "boundary_radius": (float, "radius of every boundary circle"),
    "svg": (str, "also write an SVG drawing to this path"),
    "family": (str, "triangle-times-n or hyperbolic-ball"),
    "levels": FAMILY_KEYS["levels"],
    "degree": FAMILY_KEYS["degree"],
    "generations": FAMILY_KEYS["generations"],
}

COMMANDS = {
    "generate": {**FAMILY_KEYS, "edges": (_bool, "print the adjacency edge list as CSV instead"),
                 "tol": EVENT_KEYS["tol"]},
    "pack": PACK_KEYS,
    "percolate": {**FAMILY_KEYS, **EVENT_KEYS, "p": MC_KEYS["p"], "seed": MC_KEYS["seed"],
                  "trial": (int, "trial index"), "bits": (_bool, "include the sampled bits")},
    "estimate": {**FAMILY_KEYS, **EVENT_KEYS, **MC_KEYS},
    "sweep": {**FAMILY_KEYS, **EVENT_KEYS, **{k: v for k, v in MC_KEYS.items() if k != "p"},
              "p_grid": (parse_grid, "p values: start:stop:step or a comma list")},
    "certify": CERT_KEYS,
}

DEFAULTS = {
    "event": "crossing", "mode": "site", "direction": "left-right", "color": "open", "diagonal": True,
    "tol": 1e-9, "trials": 1000, "format": "json", "trial": 0, "bits": False, "edges": False,
    "boundary_radius": 1.0, "C": 1.0, "k_max": 4, "r_max": 64.0, "step": 0.25, "max_p": False,
    "alpha_table": False,
}

FAMILY_ARGS = {
    "triangular": {"n": "n"},
    "moore": {"n": "n"},
    "quadtree": {"tiling_seed": "seed", "depth": "depth", "split": "split"},
    "triangle-times-n": {"levels": "levels"},
    "ellipse-ladder": {"M": "M", "lines": "lines", "length": "length", "gap": "gap"},
    "bond-counterexample": {"M": "M", "n": "n"},
    "hyperbolic-ball": {"degree": "degree", "generations": "generations"},
}
INT_FAMILY_ARGS = {("bond-counterexample", "M")}


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(command: str, flags: dict, config: dict) -> dict:
    """Merge config and flags (flags win), check keys and convert values."""
    schema = COMMANDS[command]
    unknown = sorted(set(config) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    out = {}
    for k, (typ, _) in schema.items():
        if k in merged:
            try:
                out[k] = typ(merged[k]) if isinstance(merged[k], str) or typ in (parse_p, parse_grid) else merged[k]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {merged[k]!r} ({exc})") from None
        elif k in DEFAULTS:
            out[k] = DEFAULTS[k]
    return out


# ---------------------------------------------------------------------------
# pipeline pieces

def build_packing(cfg: dict) -> Packing:
    if cfg.get("packing"):
        try:
            with open(cfg["packing"], encoding="utf-8") as fh:
                return Packing.from_json(fh.read())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load packing {cfg['packing']}: {exc}") from None
    family = cfg.get("family")
    if family not in gen.FAMILIES:
        raise ConfigError(f"family must be one of {', '.join(gen.FAMILIES)} (or give packing=FILE)")
    fn = gen.FAMILIES[family][0]
    kwargs = {}
    for key, arg in FAMILY_ARGS[family].items():
        if key in cfg:
            v = cfg[key]
            kwargs[arg] = int(v) if (family, key) in INT_FAMILY_ARGS else v
    try:
        return fn(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{family}: {exc}") from None


def build_event(cfg: dict, P: Packing) -> EventSpec:
    mode = cfg["mode"]
    if mode not in ("site", "bond"):
        raise ConfigError("mode must be site or bond")
    if cfg["event"] == "crossing":
        if cfg["color"] not in ("open", "closed"):
            raise ConfigError("color must be open or closed")
        try:
            ev = Crossing(window_of(P), cfg["direction"], cfg["color"], cfg["diagonal"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif cfg["event"] == "reach":
        if "r" not in cfg:
            raise ConfigError("reach events need r")
        src = int(cfg.get("source", P.meta.get("source", 0)))
        if not 0 <= src < len(P):
            raise ConfigError(f"source {src} out of range")
        ev = ReachDistance(src, cfg["r"])
    else:
        raise ConfigError("event must be crossing or reach")
    return EventSpec(ev, mode)


def _need_seed(cfg):
    if "seed" not in cfg:
        raise ConfigError("a seed is mandatory for estimation (no implicit entropy)")


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p={p} outside [0, 1]")


def _emit_records(records, fmt, out):
    if fmt == "json":
        for rec in records:
            out.write(json.dumps(rec) + "\n")
            out.flush()
    elif fmt == "csv":
        w = csv.DictWriter(out, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow(rec)
            out.flush()
    else:
        raise ConfigError("format must be json or csv")


# ---------------------------------------------------------------------------
# commands

def cmd_generate(cfg, out):
    P = build_packing(cfg)
    bad = validate_packing(P)
    if bad:
        i, j, depth = bad[0]
        print(f"invalid packing: {len(bad)} overlapping pairs, e.g. ({i}, {j}) by {depth:.3g}", file=sys.stderr)
        return EXIT_FAIL
    if cfg["edges"]:
        out.write(build_graph(P, cfg["tol"]).to_csv())
    else:
        out.write(P.to_json() + "\n")
    return EXIT_OK


def cmd_pack(cfg, out):
    if cfg.get("input"):
        try:
            with open(cfg["input"], encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load {cfg['input']}: {exc}") from None
        if "faces" in data:
            T = Triangulation.from_faces(data["faces"])
        elif "rotation" in data:
            closed, info = extend_to_triangulation(PlanarMap(data["rotation"]))
            T, _ = closed.puncture(info["hubs"][0])
        else:
            raise ConfigError("input needs a 'faces' or a 'rotation' list")
        if T.is_closed:
            T, _ = T.puncture(T.n - 1)
    elif cfg.get("family") == "triangle-times-n":
        T = gen.triangle_times_n_triangulation(cfg.get("levels", 10))
    elif cfg.get("family") == "hyperbolic-ball":
        T = gen.hyperbolic_triangulation(cfg.get("degree", 7), cfg.get("generations", 3))
    else:
        raise ConfigError("pack needs input=FILE or family = triangle-times-n | hyperbolic-ball")
    R = compute_radii(T, cfg["boundary_radius"])
    L = layout(T, R)
    P = L.to_packing(angle_residual=R.residual, tangency_residual=L.residual)
    if cfg.get("svg"):
        with open(cfg["svg"], "w", encoding="utf-8") as fh:
            fh.write(L.to_svg())
    out.write(P.to_json() + "\n")
    return EXIT_OK


def cmd_percolate(cfg, out):
    _need_seed(cfg)
    if "p" not in cfg:
        raise ConfigError("percolate needs p")
    _check_p(cfg["p"])
    P = build_packing(cfg)
    E = build_event(cfg, P)
    G = build_graph(P, cfg["tol"])
    sampler = sample_sites if E.mode == "site" else sample_bonds
    S = sampler(G, cfg["p"], cfg["seed"], cfg["trial"])
    if isinstance(E.event, Crossing):
        ev = E.event
        hit = crossing_event(P, S, ev.window, ev.direction, ev.color, ev.diagonal, G)
    else:
        hit = reach_event(P, G, S, E.event.source, E.event.r)
    rec = {"event": E.event.label, "mode": E.mode, "p": cfg["p"], "seed": cfg["seed"], "trial": cfg["trial"],
           "hit": bool(hit), "open": int(S.open.sum()), "size": int(len(S.open))}
    if cfg["bits"]:
        rec["bits"] = "".join("1" if b else "0" for b in S.open)
    out.write(json.dumps(rec) + "\n")
    return EXIT_OK


def _estimates(cfg, ps, out):
    _need_seed(cfg)
    if cfg["trials"] < 1:
        raise ConfigError("trials must be positive")
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    for p in ps:
        _check_p(p)
    workers = cfg.get("workers") or default_workers()
    P = build_packing(cfg)
    E = build_event(cfg, P)
    G = build_graph(P, cfg["tol"])

    def records():
        for p in ps:
            yield monte_carlo(E, P, G, p, cfg["trials"], cfg["seed"], workers).record()

    _emit_records(records(), cfg["format"], out)
    return EXIT_OK


def cmd_estimate(cfg, out):
    if "p" not in cfg:
        raise ConfigError("estimate needs p")
    return _estimates(cfg, [cfg["p"]], out)


def cmd_sweep(cfg, out):
    if "p_grid" not in cfg:
        raise ConfigError("sweep needs p_grid")
    return _estimates(cfg, cfg["p_grid"], out)


def cmd_certify(cfg, out):
    if "d" in cfg or "epsilon" in cfg:
        d, eps = cfg.get("d", 2), cfg.get("epsilon", 1.0)
        try:
            m0, p, cert = certify_general_theorem(d, eps, cfg["C"], cfg.get("m0"))
        except InfeasibleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        doc = cert.to_dict()
    else:
        if cfg["max_p"]:
            p = max_certified_p()
        elif "p" in cfg:
            p = cfg["p"]
        else:
            p = math.exp(-26.0)
        if not 0.0 < p < 1.0:
            raise ConfigError("p must lie in (0, 1)")
        cert = certify_square_theorem(p)
        doc = cert.to_dict()
        if cfg["alpha_table"] and cert.overall:
            A = refine_alpha_table(p, cfg["k_max"], cfg["r_max"], cfg["step"])
            doc["alpha_table"] = {"step": A.step, "iterations": A.iterations, "values": A.values.tolist()}
    out.write(json.dumps(doc) + "\n")
    return EXIT_OK if cert.overall else EXIT_FAIL


HANDLERS = {"generate": cmd_generate, "pack": cmd_pack, "percolate": cmd_percolate, "estimate": cmd_estimate,
            "sweep": cmd_sweep, "certify": cmd_certify}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="packperc", description="Percolation on packings and certified decay constants.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        for key, (_, hlp) in schema.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=hlp)
    return ap


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        ns = make_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    buf = io.StringIO()
    try:
        config = read_config(ns.config) if ns.config else {}
        cfg = resolve(ns.command, flags, config)
        # stream sweeps line by line; buffer everything else so failures leave no partial output
        target = out if ns.command in ("sweep", "estimate") else buf
        code = HANDLERS[ns.command](cfg, target)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except gen.GeneratorCapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (GeometryError, TriangulationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
