"""Command-line front end: configuration, caching, pipeline, artifacts.

Subcommands map one-to-one onto the library stages; every artifact is
JSON carrying a versioned "schema" field and validated against the
matching description under schemas/ before it is written.  Writes are
atomic (temp file plus rename) and deterministic: rerunning a command
with the same config produces byte-identical files, warm or cold cache.

Config precedence is defaults, then flags, then the --config file; a
value in the file wins over the same flag on the command line.
"""

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import jsonschema

from . import __version__
from .angles import Angle
from .errors import RayatlasError
from .poly import Polynomial, escaping_criticals
from .rays import trace_ray
from .equipot import (ComponentSeed, crash_pair_table, interval_ladder,
                      rational_crash_pairs)
from .semiconj import build_pi_table, semiconjugacy_summary
from .portrait import (CriticalMarker, attachments, audit_counts,
                       build_portrait, ghost_sector_cycles, load_criticals,
                       load_essential, load_portrait, sectors_of)
from .render import Frame, render_figure, write_ppm
from .surgery import (build_model, enumerate_choices, isolated_points,
                      load_model, verify_against_polynomial)


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class RunConfig:
    """Everything a pipeline run depends on, with ledger defaults."""

    poly: str = None             # polynomial JSON path
    seed: list = None            # [re, im] marker of the bounded component
    k: int = 1                   # component period
    d: int = None                # inner degree; inferred when omitted
    s0: float = None             # ladder start potential override
    levels: int = 10             # ladder depth
    depth: int = 10              # semiconjugacy table depth
    s_min: float = 1e-12         # trace potential floor
    co_tol: float = 1e-4         # co-landing spread tolerance
    fix_tol: float = 1e-5        # fixed-point residual tolerance
    out_dir: str = "rayatlas-out"
    cache_dir: str = None        # RAYATLAS_CACHE or out_dir/.cache

    def validate(self) -> "RunConfig":
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.d is not None and self.d < 2:
            raise ValueError("inner degree d must be >= 2")
        for name in ("s_min", "co_tol", "fix_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.levels < 1 or self.depth < 1:
            raise ValueError("levels and depth must be >= 1")
        return self

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def merge_config(args) -> RunConfig:
    """Defaults, overridden by flags, overridden by the config file."""
    cfg = RunConfig()
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            doc = json.load(fh)
        for key, v in doc.items():
            name = key.replace("-", "_")
            if not any(f.name == name for f in fields(RunConfig)):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, name, v)
    return cfg.validate()


def load_polynomial(path) -> Polynomial:
    """Read a polynomial file: {"coeffs": [c0, c1, ...]} ascending,
    entries either numbers or [re, im] pairs."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema", "rayatlas/polynomial/1") != "rayatlas/polynomial/1":
        raise ValueError(f"not a polynomial file: {doc.get('schema')!r}")
    coeffs = []
    for c in doc["coeffs"]:
        if isinstance(c, (list, tuple)):
            coeffs.append(complex(c[0], c[1]))
        else:
            coeffs.append(complex(c))
    return Polynomial(tuple(coeffs))


def parse_angle(text):
    """Angle from 'p/q' (exact) or a decimal literal (measured)."""
    text = str(text).strip()
    if "/" in text:
        return Angle.of(Fraction(text))
    return Angle.of(float(text))


def _parse_point(text) -> complex:
    re, im = (float(v) for v in str(text).split(","))
    return complex(re, im)


def _seed_of(cfg: RunConfig):
    """ComponentSeed from the config, which may hold the flag string
    're,im' or the file form [re, im]."""
    if cfg.seed is None:
        return None
    if isinstance(cfg.seed, str):
        return ComponentSeed(_parse_point(cfg.seed), cfg.k)
    return ComponentSeed(complex(cfg.seed[0], cfg.seed[1]), cfg.k)


# ---------------------------------------------------------------------------
# Schema-validated atomic JSON output


_SCHEMA_DIR = Path(__file__).parent / "schemas"
_SCHEMA_FILES = {
    "rayatlas/polynomial/1": "polynomial.v1.json",
    "rayatlas/trace/1": "trace.v1.json",
    "rayatlas/ladder/1": "ladder.v1.json",
    "rayatlas/crash/1": "crash.v1.json",
    "rayatlas/pitable/1": "pitable.v1.json",
    "rayatlas/semiconj/1": "semiconj.v1.json",
    "rayatlas/portrait-run/1": "portrait_run.v1.json",
    "rayatlas/surgery/1": "surgery.v1.json",
    "rayatlas/surgery-verify/1": "surgery_verify.v1.json",
    "rayatlas/report/1": "report.v1.json",
    "rayatlas/diagnostic/1": "diagnostic.v1.json",
}
_SCHEMA_CACHE = {}


def validate_document(doc: dict) -> dict:
    """Check a document against its shipped schema; returns it."""
    sid = doc.get("schema")
    if sid not in _SCHEMA_FILES:
        raise ValueError(f"document carries unknown schema {sid!r}")
    if sid not in _SCHEMA_CACHE:
        with open(_SCHEMA_DIR / _SCHEMA_FILES[sid]) as fh:
            _SCHEMA_CACHE[sid] = json.load(fh)
    jsonschema.validate(doc, _SCHEMA_CACHE[sid])
    return doc


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_json(path, doc: dict, validate: bool = True) -> Path:
    path = Path(path)
    if validate:
        validate_document(doc)
    _atomic_write(path, _dump(doc).encode("utf-8"))
    return path


# ---------------------------------------------------------------------------
# Content-addressed cache


class Cache:
    """File cache keyed by content hash; misses return None."""

    def __init__(self, root):
        self.root = Path(root)

    @staticmethod
    def key(*parts) -> str:
        blob = json.dumps(parts, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / (key + ".json")

    def get(self, key: str):
        p = self._path(key)
        try:
            with open(p) as fh:
                return json.load(fh)
        except (OSError, ValueError):
            return None

    def put(self, key: str, doc: dict) -> dict:
        _atomic_write(self._path(key), _dump(doc).encode("utf-8"))
        return doc


def open_cache(cfg: RunConfig) -> Cache:
    root = cfg.cache_dir or os.environ.get("RAYATLAS_CACHE") \
        or str(Path(cfg.out_dir) / ".cache")
    return Cache(root)


# ---------------------------------------------------------------------------
# Pipeline stages


def _fr(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


def _crash_stage(P: Polynomial, cfg: RunConfig) -> dict:
    rows = rational_crash_pairs(P, cfg.k)
    if rows is not None:
        pairs = [{
            "angles": [_fr(a) for a in r["angles"]],
            "image_angle": _fr(r["image_angle"]),
            "potential": r["potential"],
            "critical": [r["critical"].location.real,
                         r["critical"].location.imag],
        } for r in rows]
        exact = True
    else:
        pairs = [{
            "angles": list(r["angles"]),
            "image_angle": r["image_angle"],
            "potential": r["potential"],
            "critical": [r["critical"].location.real,
                         r["critical"].location.imag],
        } for r in crash_pair_table(P)]
        exact = False
    return {"schema": "rayatlas/crash/1", "exact": exact, "pairs": pairs}


def _ladder_stage(ladder) -> dict:
    return {"schema": "rayatlas/ladder/1",
            "k": ladder[0].k, "d": ladder[0].d, "D": ladder[0].D,
            "levels": [level.to_json() for level in ladder]}


def _sector_key_json(key) -> list:
    return [key[0], _fr(key[1])]


def _auto_portrait_stage(P: Polynomial, cfg: RunConfig, summary: dict,
                         crash_doc: dict) -> dict:
    """Fixed-ray portrait derived from the fiber over 0.

    Needs exact crash labels; the turn side at a broken fixed angle is
    away from its wake.  Skips cleanly when the data is not there.
    """
    if not crash_doc["exact"]:
        return {"schema": "rayatlas/portrait-run/1",
                "skipped": "crash angles are not rational"}
    fib0 = next((f for f in summary["fibers"]
                 if f["tau"] == {"num": 0, "den": 1}), None)
    if fib0 is None or not fib0["resolved"]:
        return {"schema": "rayatlas/portrait-run/1",
                "skipped": "no resolved fiber over 0"}
    lam = sorted(Fraction(p["num"], p["den"]) for p in fib0["points"])
    if len(lam) < 2:
        return {"schema": "rayatlas/portrait-run/1",
                "skipped": "fiber over 0 is a single angle"}

    D = P.degree
    wakes = {}   # broken fixed angle -> its wake partner
    for row in crash_doc["pairs"]:
        angles = [Fraction(a["num"], a["den"]) for a in row["angles"]]
        for a in angles:
            if a in lam and len(angles) == 2:
                partner = angles[1] if a == angles[0] else angles[0]
                wakes[a] = partner
    sides = []
    for a in lam:
        if a not in wakes:
            sides.append("smooth")
        elif (wakes[a] - a) % 1 < Fraction(1, 2):
            sides.append("minus")   # wake opens to the right
        else:
            sides.append("plus")
    portrait = build_portrait(D, cfg.k, [lam], [sides])

    # the sector free of wakes holds the bounded component
    wake_free = []
    for i, a in enumerate(lam):
        b = lam[(i + 1) % len(lam)]
        span = (b - a) % 1 or Fraction(1)
        if not any((w - a) % 1 < span for w in wakes.values()):
            wake_free.append(a)
    essential = [(0, wake_free[0])] if len(wake_free) == 1 else None
    analysis = sectors_of(portrait, essential)

    markers = [CriticalMarker(
        rays=tuple(Fraction(a["num"], a["den"]) for a in row["angles"]
                   if Fraction(a["num"], a["den"]) in lam),
        label=f"critical-{i}")
        for i, row in enumerate(crash_doc["pairs"])]
    markers = [m for m in markers if m.rays]
    doc = {"schema": "rayatlas/portrait-run/1",
           "portrait": portrait.to_json(),
           "sectors": analysis.to_json(),
           "ghost_cycles": len(ghost_sector_cycles(analysis))}
    if markers and essential is not None:
        report = attachments(portrait, analysis, markers)
        n1 = report.n1
        n2 = max(0, len(crash_doc["pairs"]) - n1)
        doc["attachments"] = {
            "n1": n1,
            "ambiguous": list(report.ambiguous),
            "point_attached": {k: [_sector_key_json(s) for s in v]
                               for k, v in report.point_attached.items()},
            "value_attached": {k: [_sector_key_json(s) for s in v]
                               for k, v in report.value_attached.items()},
        }
        doc["audit"] = audit_counts(portrait, analysis, n1, n2,
                                    ladder_d(summary), fiber_card=len(lam))
    return doc


def ladder_d(summary: dict) -> int:
    return summary["degree"]


def run_report(cfg: RunConfig) -> dict:
    """The analysis pipeline: crash data, ladder, semiconjugacy,
    portrait.  Each stage is persisted under out_dir as soon as it is
    computed, so a later failure leaves the finished stages behind."""
    P = load_polynomial(cfg.poly)
    out = Path(cfg.out_dir)
    cache = open_cache(cfg)
    stages = {}

    def persist(name, doc):
        stages[name] = doc
        write_json(out / f"stage_{name}.json", doc)

    crash_key = Cache.key("crash", P.hash_key(), cfg.k)
    crash_doc = cache.get(crash_key)
    if crash_doc is None:
        crash_doc = cache.put(crash_key, _crash_stage(P, cfg))
    persist("crash", crash_doc)

    report = {"schema": "rayatlas/report/1", "config": cfg.to_json(),
              "degree": P.degree, "stages": stages, "connected": False}
    if not escaping_criticals(P) and cfg.s0 is None:
        # connected filled set: the angle set is the whole circle and
        # the interesting machinery degenerates
        report["connected"] = True
        write_json(out / "report.json", report)
        return report

    ladder_key = Cache.key("ladder", P.hash_key(), cfg.k, cfg.d,
                           cfg.levels, cfg.s0)
    semi_key = Cache.key("semiconj", P.hash_key(), cfg.k, cfg.d,
                         cfg.levels, cfg.s0, cfg.depth)
    ladder_doc = cache.get(ladder_key)
    summary = cache.get(semi_key)
    if ladder_doc is None or summary is None:
        ladder = interval_ladder(P, cfg.k, cfg.d, n_max=cfg.levels,
                                 s0=cfg.s0)
        ladder_doc = cache.put(ladder_key, _ladder_stage(ladder))
        table = build_pi_table(ladder, depth=min(cfg.depth, len(ladder) - 1))
        summary = cache.put(semi_key, semiconjugacy_summary(table))
    persist("ladder", ladder_doc)
    persist("semiconj", summary)

    persist("portrait", _auto_portrait_stage(P, cfg, summary, crash_doc))

    write_json(out / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# Subcommands


def _diagnostic(exc: BaseException) -> int:
    doc = {"schema": "rayatlas/diagnostic/1",
           "error": type(exc).__name__,
           "message": str(exc)}
    report = getattr(exc, "report", None)
    if isinstance(report, dict):
        doc["report"] = report
    print(_dump(validate_document(doc)), end="")
    return 2


def _emit(doc: dict, path=None) -> int:
    """Write the artifact if a path is given, else print it."""
    if path:
        write_json(path, doc)
        print(json.dumps({"written": str(path), "schema": doc["schema"]}))
    else:
        print(_dump(validate_document(doc)), end="")
    return 0


def cmd_trace(args) -> int:
    cfg = merge_config(args)
    P = load_polynomial(cfg.poly)
    ang = parse_angle(args.angle)
    tr = trace_ray(P, ang, side=args.side, s_min=cfg.s_min)
    doc = tr.to_json()
    rc = _emit(doc, args.out)
    if args.render:
        frame = Frame(_parse_point(args.center), args.width,
                      args.pixels, args.pixels)
        img = render_figure(P, frame, rays=[(ang, args.side)],
                            seed=_seed_of(cfg), s_min=max(cfg.s_min, 1e-8))
        write_ppm(args.render, img)
    return rc


def cmd_angle_set(args) -> int:
    cfg = merge_config(args)
    P = load_polynomial(cfg.poly)
    ladder = interval_ladder(P, cfg.k, cfg.d, n_max=cfg.levels, s0=cfg.s0)
    return _emit(_ladder_stage(ladder), args.out)


def cmd_semiconj(args) -> int:
    cfg = merge_config(args)
    P = load_polynomial(cfg.poly)
    ladder = interval_ladder(P, cfg.k, cfg.d, n_max=cfg.levels, s0=cfg.s0)
    table = build_pi_table(ladder, depth=min(cfg.depth, len(ladder) - 1))
    if args.table_out:
        write_json(args.table_out, table.to_json())
    return _emit(semiconjugacy_summary(table), args.out)


def cmd_portrait(args) -> int:
    with open(args.portrait_file) as fh:
        doc = json.load(fh)
    portrait = load_portrait(doc)
    analysis = sectors_of(portrait, load_essential(doc))
    out = {"schema": "rayatlas/portrait-run/1",
           "portrait": portrait.to_json(),
           "sectors": analysis.to_json(),
           "ghost_cycles": len(ghost_sector_cycles(analysis))}
    criticals = load_criticals(doc)
    if criticals:
        report = attachments(portrait, analysis, criticals)
        n2 = args.n2 if args.n2 is not None else 0
        out["attachments"] = {
            "n1": report.n1,
            "ambiguous": list(report.ambiguous),
            "point_attached": {k: [_sector_key_json(s) for s in v]
                               for k, v in report.point_attached.items()},
            "value_attached": {k: [_sector_key_json(s) for s in v]
                               for k, v in report.value_attached.items()},
        }
        if args.inner_degree:
            out["audit"] = audit_counts(portrait, analysis, report.n1, n2,
                                        args.inner_degree,
                                        fiber_card=args.fiber_card)
    return _emit(out, args.out)


def cmd_surgery_model(args) -> int:
    choices = [c.strip() for c in args.choices.split(",") if c.strip()]
    model = build_model(args.degree, args.inner_degree, args.base_index,
                        choices)
    doc = model.to_json()
    doc["isolated_points"] = [_fr(a) for a in isolated_points(model)]
    enum = enumerate_choices(args.degree, args.inner_degree)
    doc["enumeration"] = {"count": enum["count"],
                          "expected": enum["expected"],
                          "matches": enum["matches"]}
    return _emit(doc, args.out)


def cmd_verify(args) -> int:
    cfg = merge_config(args)
    P = load_polynomial(cfg.poly)
    with open(args.model) as fh:
        model = load_model(json.load(fh))
    report = verify_against_polynomial(
        model, P, _seed_of(cfg), co_tol=cfg.co_tol, fix_tol=cfg.fix_tol,
        s_min=cfg.s_min)
    return _emit(report, args.out)


def cmd_render(args) -> int:
    cfg = merge_config(args)
    P = load_polynomial(cfg.poly)
    frame = Frame(_parse_point(args.center), args.width,
                  args.pixels, args.pixels)
    rays = []
    if args.rays:
        for part in args.rays.split(","):
            spec, _, side = part.partition(":")
            rays.append((parse_angle(spec), side or "smooth"))
    potentials = [float(v) for v in args.potentials.split(",")] \
        if args.potentials else []
    img = render_figure(P, frame, rays=rays, potentials=potentials,
                        seed=_seed_of(cfg), s_min=max(cfg.s_min, 1e-8),
                        max_iter=args.max_iter)
    write_ppm(args.out, img)
    print(json.dumps({"written": str(args.out),
                      "pixels": [args.pixels, args.pixels]}))
    return 0


def cmd_report(args) -> int:
    cfg = merge_config(args)
    report = run_report(cfg)
    print(json.dumps({"written": str(Path(cfg.out_dir) / "report.json"),
                      "stages": sorted(report["stages"]),
                      "connected": report["connected"]}))
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_config_flags(p: argparse.ArgumentParser, poly_required=True) -> None:
    p.add_argument("--config", help="JSON config; overrides flags")
    p.add_argument("--poly", required=poly_required,
                   help="polynomial JSON file")
    p.add_argument("--seed", help="component marker 're,im'")
    p.add_argument("--period", dest="k", type=int)
    p.add_argument("--inner-degree", dest="d", type=int)
    p.add_argument("--start-potential", dest="s0", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--min-potential", dest="s_min", type=float)
    p.add_argument("--co-tol", dest="co_tol", type=float)
    p.add_argument("--fix-tol", dest="fix_tol", type=float)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--cache-dir", dest="cache_dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rayatlas",
        description="external rays, angle sets, and circle semiconjugacies "
                    "for polynomials with disconnected Julia sets")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace one external ray")
    _add_config_flags(p)
    p.add_argument("--angle", required=True, help="'p/q' or decimal")
    p.add_argument("--side", default="smooth",
                   choices=["smooth", "plus", "minus"])
    p.add_argument("--out")
    p.add_argument("--render", help="overlay image path (PPM)")
    p.add_argument("--center", default="0,0")
    p.add_argument("--width", type=float, default=4.0)
    p.add_argument("--pixels", type=int, default=480)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("angle-set", help="interval ladder of ray angles")
    _add_config_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_angle_set)

    p = sub.add_parser("semiconj", help="circle semiconjugacy summary")
    _add_config_flags(p)
    p.add_argument("--out")
    p.add_argument("--table-out", help="also dump the full table")
    p.set_defaults(func=cmd_semiconj)

    p = sub.add_parser("portrait", help="orbit portrait combinatorics")
    p.add_argument("--portrait-file", required=True)
    p.add_argument("--inner-degree", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--fiber-card", dest="fiber_card", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("surgery-model", help="build a wake-collection model")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--inner-degree", type=int, required=True)
    p.add_argument("--base-index", type=int, default=0)
    p.add_argument("--choices", required=True,
                   help="comma list of left/right")
    p.add_argument("--out")
    p.set_defaults(func=cmd_surgery_model)

    p = sub.add_parser("verify", help="check a model against a polynomial")
    _add_config_flags(p)
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="escape-time image with overlays")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="PPM path")
    p.add_argument("--center", default="0,0")
    p.add_argument("--width", type=float, default=4.0)
    p.add_argument("--pixels", type=int, default=640)
    p.add_argument("--rays", help="comma list of angle:side")
    p.add_argument("--potentials", help="comma list of level values")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=160)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("report", help="full analysis pipeline")
    _add_config_flags(p)
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RayatlasError, ValueError, OSError, json.JSONDecodeError) as exc:
        return _diagnostic(exc)


if __name__ == "__main__":
    sys.exit(main())
